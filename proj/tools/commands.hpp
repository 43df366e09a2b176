#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ccgg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

struct IngestArgs {
  std::optional<std::string> tu;
  std::optional<int> toy;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> config;
};

struct TrainArgs {
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> config;
  std::optional<std::string> checkpoint;  // graph classifier checkpoint
};

struct GenerateArgs {
  std::string out;
  int cls = 0;
  int count = 0;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> checkpoint;  // generator checkpoint
};

struct EvaluateArgs {
  std::string out;
  std::optional<std::string> reference;
  std::optional<std::string> checkpoint;  // graph classifier checkpoint
};

void cmd_ingest(const IngestArgs& args);
void cmd_train_classifier(const TrainArgs& args);
void cmd_train(const TrainArgs& args);
void cmd_generate(const GenerateArgs& args);
void cmd_evaluate(const EvaluateArgs& args);

/// Parses argv, dispatches, and maps failures to exit codes.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace ccgg::cli
