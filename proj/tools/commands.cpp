#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"

#include "ccgg/classifiers.hpp"
#include "ccgg/errors.hpp"
#include "ccgg/evaluation.hpp"
#include "ccgg/io.hpp"
#include "ccgg/sampling.hpp"
#include "ccgg/training.hpp"

namespace ccgg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunPaths {
  fs::path root;

  fs::path config() const { return root / "config.json"; }
  fs::path manifest() const { return root / "manifest.json"; }
  fs::path data(const std::string& split) const { return root / "data" / (split + ".json"); }
  fs::path classifier() const { return root / "checkpoints" / "classifier.ckpt"; }
  fs::path generator() const { return root / "checkpoints" / "generator.ckpt"; }
  fs::path log(const std::string& name) const { return root / "logs" / (name + ".jsonl"); }
  fs::path samples(int cls) const { return root / "samples" / ("class_" + std::to_string(cls)); }
  fs::path report() const { return root / "report.json"; }
};

json histogram_to_json(const NodeCountHistogram& h) {
  json j = json::object();
  for (const auto& [cls, counts] : h) {
    json c = json::object();
    for (const auto& [n, k] : counts) c[std::to_string(n)] = k;
    j[std::to_string(cls)] = c;
  }
  return j;
}

NodeCountHistogram histogram_from_json(const json& j) {
  NodeCountHistogram h;
  for (const auto& [cls, counts] : j.items()) {
    for (const auto& [n, k] : counts.items()) h[std::stoi(cls)][std::stoi(n)] = k.get<int>();
  }
  return h;
}

json class_counts(const std::vector<Graph>& graphs) {
  std::map<int, int> counts;
  for (const auto& g : graphs) ++counts[g.class_label()];
  json j = json::object();
  for (const auto& [cls, k] : counts) j[std::to_string(cls)] = k;
  return j;
}

TrainConfig resolve_config(const RunPaths& run, const std::optional<std::string>& config_path,
                           const std::optional<std::uint64_t>& seed) {
  TrainConfig cfg;
  if (config_path) {
    cfg = TrainConfig::from_json(read_json_file(*config_path));
  } else if (fs::exists(run.config())) {
    cfg = TrainConfig::from_json(read_json_file(run.config()));
  }
  if (seed) cfg.seed = *seed;
  cfg.validate();
  return cfg;
}

json require_manifest(const RunPaths& run) {
  if (!fs::exists(run.manifest())) {
    throw IngestionError("no manifest at " + run.manifest().string() + "; run ingest first");
  }
  return read_json_file(run.manifest());
}

void restore_or_throw(const Checkpoint& ckpt, ParamStore& store, const fs::path& path) {
  try {
    ckpt.restore(store);
  } catch (const ArgumentError& e) {
    throw IngestionError(path.string() + ": " + e.what());
  }
}

GraphClassifier load_graph_classifier(const fs::path& path) {
  if (!fs::exists(path)) {
    throw TrainingError("missing graph classifier checkpoint " + path.string() +
                        "; run train-classifier first");
  }
  const Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.config.value("kind", "") != "graph_classifier") {
    throw IngestionError(path.string() + " is not a graph classifier checkpoint");
  }
  GraphClassifier clf(GraphClassifierConfig::from_json(ckpt.config.at("classifier")), 0);
  restore_or_throw(ckpt, clf.params(), path);
  return clf;
}

struct LoadedGenerator {
  Generator gen;
  NodeClassifier nodeclf;
  NodeCountHistogram histogram;
};

LoadedGenerator load_generator(const fs::path& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.config.value("kind", "") != "generator") {
    throw IngestionError(path.string() + " is not a generator checkpoint");
  }
  const auto& nc = ckpt.config.at("node_classifier");
  LoadedGenerator out{
      Generator(GeneratorConfig::from_json(ckpt.config.at("generator")), 0),
      NodeClassifier({nc.at("input_dim").get<int>(), nc.at("hidden").get<int>(),
                      nc.at("num_node_labels").get<int>()},
                     0),
      histogram_from_json(ckpt.config.at("node_count_histogram"))};
  restore_or_throw(ckpt, out.gen.params(), path);
  restore_or_throw(ckpt, out.nodeclf.params(), path);
  return out;
}

// Malformed graph files are data errors, not usage errors.
std::vector<Graph> read_graphs(const fs::path& path) {
  try {
    return load_graphs(path);
  } catch (const ArgumentError& e) {
    throw IngestionError(path.string() + ": " + e.what());
  }
}

std::vector<Graph> load_reference(const fs::path& path) {
  if (!fs::exists(path)) throw IngestionError("reference " + path.string() + " does not exist");
  if (fs::is_directory(path)) {
    for (const auto& entry : fs::directory_iterator(path)) {
      const auto name = entry.path().filename().string();
      const std::string suffix = "_A.txt";
      if (name.size() > suffix.size() && name.ends_with(suffix)) {
        return load_tu_dataset(path, name.substr(0, name.size() - suffix.size())).graphs;
      }
    }
  }
  return read_graphs(path);
}

}  // namespace

void cmd_ingest(const IngestArgs& args) {
  if (args.tu.has_value() == args.toy.has_value()) {
    throw ArgumentError("ingest needs exactly one of --tu or --toy");
  }
  const RunPaths run{args.out};
  TrainConfig cfg;
  if (args.config) cfg = TrainConfig::from_json(read_json_file(*args.config));
  if (args.seed) cfg.seed = *args.seed;
  cfg.validate();

  json manifest;
  std::vector<Graph> graphs;
  std::vector<long long> class_values;
  std::vector<long long> node_label_values;
  if (args.tu) {
    const fs::path dir(*args.tu);
    if (!fs::is_directory(dir)) throw IngestionError("TU directory " + dir.string() + " does not exist");
    const std::string name = dir.filename().empty() ? dir.parent_path().filename().string()
                                                    : dir.filename().string();
    std::optional<int> cap;
    if (cfg.max_nodes > 0) cap = cfg.max_nodes;
    auto ds = load_tu_dataset(dir, name, cap);
    graphs = std::move(ds.graphs);
    class_values = ds.class_values;
    node_label_values = ds.node_label_values;
    if (node_label_values.empty()) node_label_values = {0};
    manifest["dataset"] = name;
    manifest["source"] = "tu";
  } else {
    if (*args.toy < 1) throw ArgumentError("--toy needs a positive graph count");
    graphs = synthesize_toy_corpus(*args.toy, {cfg.toy_min_nodes, cfg.toy_max_nodes}, cfg.seed);
    class_values = {0, 1};
    node_label_values = {0, 1, 2};
    manifest["dataset"] = "toy";
    manifest["source"] = "toy";
  }
  if (cfg.max_nodes > 0 && max_num_nodes(graphs) > cfg.max_nodes) {
    throw CapacityError("dataset has a graph with " + std::to_string(max_num_nodes(graphs)) +
                        " nodes, N = " + std::to_string(cfg.max_nodes));
  }
  const DatasetSplit split = stratified_split(graphs, cfg.seed);

  manifest["seed"] = cfg.seed;
  manifest["num_graphs"] = graphs.size();
  manifest["num_classes"] = class_values.size();
  manifest["num_node_labels"] = node_label_values.size();
  manifest["max_nodes"] = max_num_nodes(graphs);
  manifest["class_values"] = class_values;
  manifest["node_label_values"] = node_label_values;
  manifest["counts"] = {{"all", class_counts(graphs)},
                        {"train", class_counts(split.train)},
                        {"validation", class_counts(split.validation)},
                        {"test", class_counts(split.test)}};
  manifest["node_count_histograms"] = {{"all", histogram_to_json(node_count_histogram(graphs))},
                                       {"train", histogram_to_json(split.train_histogram())},
                                       {"validation", histogram_to_json(split.validation_histogram())},
                                       {"test", histogram_to_json(split.test_histogram())}};

  write_json_file(run.config(), cfg.to_json());
  write_json_file(run.data("train"), graphs_to_json(split.train));
  write_json_file(run.data("validation"), graphs_to_json(split.validation));
  write_json_file(run.data("test"), graphs_to_json(split.test));
  write_json_file(run.manifest(), manifest);
  std::fprintf(stderr, "ingested %zu graphs (%zu classes) into %s\n", graphs.size(),
               class_values.size(), run.root.string().c_str());
}

void cmd_train_classifier(const TrainArgs& args) {
  const RunPaths run{args.out};
  const json manifest = require_manifest(run);
  const TrainConfig cfg = resolve_config(run, args.config, args.seed);
  DatasetSplit split{read_graphs(run.data("train")), read_graphs(run.data("validation")),
                     read_graphs(run.data("test"))};
  const int m = manifest.at("num_classes").get<int>();
  const int labels = manifest.at("num_node_labels").get<int>();

  ClassifierTrainConfig cc;
  cc.epochs = cfg.clf_epochs;
  cc.lr = cfg.clf_lr;
  cc.batch_size = cfg.clf_batch_size;
  cc.width = cfg.clf_width;
  cc.seed = cfg.seed;
  auto result = train_graph_classifier(split, m, labels, cc);

  fs::create_directories(run.root / "logs");
  std::ofstream log(run.log("classifier"));
  for (std::size_t e = 0; e < result.validation_accuracy.size(); ++e) {
    log << json{{"epoch", e + 1}, {"validation_accuracy", result.validation_accuracy[e]}}.dump()
        << "\n";
  }
  log << json{{"best_epoch", result.best_epoch + 1},
              {"best_validation_accuracy", result.best_validation_accuracy},
              {"test_accuracy", classifier_accuracy(result.classifier, split.test)}}
             .dump()
      << "\n";

  Checkpoint ckpt;
  ckpt.config = {{"kind", "graph_classifier"},
                 {"classifier", result.classifier.config().to_json()},
                 {"best_epoch", result.best_epoch + 1},
                 {"best_validation_accuracy", result.best_validation_accuracy}};
  ckpt.put(result.classifier.params());
  save_checkpoint(run.classifier(), ckpt);
  write_json_file(run.config(), cfg.to_json());
  std::fprintf(stderr, "graph classifier: best validation accuracy %.4f at epoch %d\n",
               result.best_validation_accuracy, result.best_epoch + 1);
}

void cmd_train(const TrainArgs& args) {
  const RunPaths run{args.out};
  const json manifest = require_manifest(run);
  const TrainConfig cfg = resolve_config(run, args.config, args.seed);
  const fs::path clf_path = args.checkpoint ? fs::path(*args.checkpoint) : run.classifier();
  const GraphClassifier clf = load_graph_classifier(clf_path);

  const auto train = read_graphs(run.data("train"));
  const int m = manifest.at("num_classes").get<int>();
  const int labels = manifest.at("num_node_labels").get<int>();
  const int n_max = cfg.max_nodes > 0 ? cfg.max_nodes : manifest.at("max_nodes").get<int>();
  const GeneratorConfig gc = cfg.generator_config(m, n_max);

  Generator gen(gc, substream_seed(cfg.seed, 0x6E6));
  NodeClassifier nodeclf({gc.hidden_dim(), cfg.nodeclf_hidden, labels},
                         substream_seed(cfg.seed, 0x40DE));
  Trainer trainer(gen, nodeclf, clf, cfg);
  const auto examples = make_examples(train, gc.block_size, gc.max_nodes);

  const json nodeclf_json = {{"input_dim", gc.hidden_dim()},
                             {"hidden", cfg.nodeclf_hidden},
                             {"num_node_labels", labels}};
  auto snapshot = [&](int epoch, const LossBreakdown& loss) {
    Checkpoint ckpt;
    ckpt.config = {{"kind", "generator"},
                   {"generator", gc.to_json()},
                   {"node_classifier", nodeclf_json},
                   {"node_count_histogram", histogram_to_json(node_count_histogram(train))},
                   {"epoch", epoch},
                   {"loss", loss.to_json()},
                   {"train_config", cfg.to_json()}};
    ckpt.put(gen.params());
    ckpt.put(nodeclf.params());
    return ckpt;
  };

  write_json_file(run.config(), cfg.to_json());
  fs::create_directories(run.root / "logs");
  std::ofstream log(run.log("train"));
  Checkpoint best = snapshot(0, {});
  double best_total = std::numeric_limits<double>::infinity();
  trainer.fit(examples, [&](int epoch, const LossBreakdown& loss) {
    json line = loss.to_json();
    line["epoch"] = epoch + 1;
    log << line.dump() << "\n" << std::flush;
    std::fprintf(stderr, "epoch %d total %.4f (adj %.4f cond %.4f node %.4f)\n", epoch + 1,
                 loss.total, loss.l_adj, loss.l_condition, loss.l_node_label);
    if (loss.total < best_total) {
      best_total = loss.total;
      best = snapshot(epoch + 1, loss);
    }
  });
  save_checkpoint(run.generator(), best);
  std::fprintf(stderr, "generator checkpoint written to %s\n", run.generator().string().c_str());
}

void cmd_generate(const GenerateArgs& args) {
  const RunPaths run{args.out};
  if (args.count < 0) throw ArgumentError("--count must be >= 0");
  const fs::path ckpt_path = args.checkpoint ? fs::path(*args.checkpoint) : run.generator();
  if (!fs::exists(ckpt_path)) {
    throw TrainingError("missing generator checkpoint " + ckpt_path.string() + "; run train first");
  }
  const auto loaded = load_generator(ckpt_path);
  const int m = loaded.gen.config().num_classes;
  if (args.cls < 0 || args.cls >= m) {
    throw ArgumentError("--class " + std::to_string(args.cls) + " outside [0, " +
                        std::to_string(m) + ")");
  }
  std::uint64_t seed = 0;
  if (args.seed) {
    seed = *args.seed;
  } else if (fs::exists(run.config())) {
    seed = TrainConfig::from_json(read_json_file(run.config())).seed;
  }

  const auto graphs = generate_batch(args.cls, static_cast<std::size_t>(args.count), seed,
                                     loaded.gen, loaded.nodeclf, loaded.histogram);
  const fs::path dir = run.samples(args.cls);
  if (fs::exists(dir)) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.path().extension() == ".json") fs::remove(entry.path());
    }
  }
  fs::create_directories(dir);
  json files = json::array();
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "graph_%05zu.json", i);
    write_json_file(dir / name, graph_to_json(graphs[i]));
    files.push_back(name);
  }
  write_json_file(dir / "manifest.json", {{"class", args.cls},
                                          {"count", args.count},
                                          {"seed", seed},
                                          {"checkpoint", ckpt_path.string()},
                                          {"checkpoint_hash", file_hash(ckpt_path)},
                                          {"files", files}});
  std::fprintf(stderr, "wrote %d graphs of class %d to %s\n", args.count, args.cls,
               dir.string().c_str());
}

void cmd_evaluate(const EvaluateArgs& args) {
  const RunPaths run{args.out};
  const fs::path ref_path = args.reference ? fs::path(*args.reference) : run.data("test");
  const auto reference = load_reference(ref_path);

  std::vector<Graph> generated;
  if (fs::is_directory(run.root / "samples")) {
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(run.root / "samples")) {
      if (entry.is_directory()) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) {
      auto gs = read_graphs(d);
      generated.insert(generated.end(), gs.begin(), gs.end());
    }
  }

  std::set<int> class_set;
  for (const auto& g : reference) class_set.insert(g.class_label());
  for (const auto& g : generated) class_set.insert(g.class_label());
  const std::vector<int> classes(class_set.begin(), class_set.end());
  EvalReport report = stats_diff_table(reference, generated, classes);

  const fs::path clf_path = args.checkpoint ? fs::path(*args.checkpoint) : run.classifier();
  if (fs::exists(clf_path) && !generated.empty()) {
    const GraphClassifier clf = load_graph_classifier(clf_path);
    const auto acc = accuracy_per_class(generated, clf);
    for (int cls : classes) {
      auto it = acc.find(cls);
      report.accuracy[cls] = it == acc.end() ? std::nullopt : std::optional<double>(it->second);
    }
    report.auc = classifier_auc(generated, clf);
  } else if (args.checkpoint) {
    throw TrainingError("missing graph classifier checkpoint " + clf_path.string());
  }

  json j = report.to_json();
  j["reference"] = ref_path.string();
  j["num_reference"] = reference.size();
  j["num_generated"] = generated.size();
  write_json_file(run.report(), j);
  std::fputs(report.to_table().c_str(), stdout);
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Class-conditional graph generation"};
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* s_ingest = app.add_subcommand("ingest", "Load a TU dataset or synthesize the toy corpus");
  s_ingest->add_option("--tu", ingest.tu, "TU dataset directory (e.g. ./NCI1)");
  s_ingest->add_option("--toy", ingest.toy, "Number of toy graphs to synthesize");
  s_ingest->add_option("--out", ingest.out, "Run directory")->required();
  s_ingest->add_option("--seed", ingest.seed, "Seed");
  s_ingest->add_option("--config", ingest.config, "Config JSON");

  TrainArgs train_clf;
  auto* s_clf = app.add_subcommand("train-classifier", "Pretrain the graph classifier");
  s_clf->add_option("--out", train_clf.out, "Run directory")->required();
  s_clf->add_option("--seed", train_clf.seed, "Seed");
  s_clf->add_option("--config", train_clf.config, "Config JSON");

  TrainArgs train;
  auto* s_train = app.add_subcommand("train", "Train the generator and node classifier");
  s_train->add_option("--out", train.out, "Run directory")->required();
  s_train->add_option("--seed", train.seed, "Seed");
  s_train->add_option("--config", train.config, "Config JSON");
  s_train->add_option("--checkpoint", train.checkpoint, "Graph classifier checkpoint");

  GenerateArgs gen;
  auto* s_gen = app.add_subcommand("generate", "Sample graphs of one class");
  s_gen->add_option("--out", gen.out, "Run directory")->required();
  s_gen->add_option("--class", gen.cls, "Class id")->required();
  s_gen->add_option("--count", gen.count, "Number of graphs")->required();
  s_gen->add_option("--seed", gen.seed, "Seed");
  s_gen->add_option("--checkpoint", gen.checkpoint, "Generator checkpoint");

  EvaluateArgs eval;
  auto* s_eval = app.add_subcommand("evaluate", "Compare generated graphs with a reference set");
  s_eval->add_option("--out", eval.out, "Run directory")->required();
  s_eval->add_option("--reference", eval.reference, "Reference graphs (JSON or TU directory)");
  s_eval->add_option("--checkpoint", eval.checkpoint, "Graph classifier checkpoint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (s_ingest->parsed()) cmd_ingest(ingest);
    if (s_clf->parsed()) cmd_train_classifier(train_clf);
    if (s_train->parsed()) cmd_train(train);
    if (s_gen->parsed()) cmd_generate(gen);
    if (s_eval->parsed()) cmd_evaluate(eval);
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kExitNumeric;
  } catch (const ArgumentError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const IngestionError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const CapacityError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const TrainingError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const IndexError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  }
  return kExitOk;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("ccgg");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace ccgg::cli
