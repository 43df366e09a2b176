#pragma once

// Parameter storage, layers, optimizer and checkpoint archive shared by the
// generator and both classifiers.

#include <deque>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "ccgg/autodiff.hpp"
#include "ccgg/rng.hpp"

namespace ccgg {

/// Ordered collection of named parameters with stable addresses.
class ParamStore {
 public:
  Parameter& add(const std::string& name, Matrix init);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }
  std::size_t num_scalars() const;

  std::vector<Parameter*> pointers();

 private:
  std::deque<Parameter> params_;
  std::map<std::string, std::size_t> index_;
};

// Initializers.
Matrix he_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng);
Matrix orthogonal(Eigen::Index n, Rng& rng);

/// y = x W + b with W stored (in x out).
class Linear {
 public:
  Linear() = default;
  Linear(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng);

  ad::Var operator()(ad::Tape& tape, ad::Var x) const;
  Eigen::Index in_features() const { return weight_->value.rows(); }
  Eigen::Index out_features() const { return weight_->value.cols(); }
  const Parameter& weight() const { return *weight_; }
  const Parameter& bias() const { return *bias_; }

 private:
  Parameter* weight_ = nullptr;
  Parameter* bias_ = nullptr;
};

/// Stack of Linear layers with ReLU between them (not after the last).
/// Layer k is named "<prefix>/<k>/weight" and "<prefix>/<k>/bias".
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParamStore& store, const std::string& prefix, const std::vector<Eigen::Index>& widths,
      Rng& rng);

  ad::Var operator()(ad::Tape& tape, ad::Var x) const;
  Eigen::Index in_features() const { return layers_.front().in_features(); }
  Eigen::Index out_features() const { return layers_.back().out_features(); }
  const std::vector<Linear>& layers() const { return layers_; }

 private:
  std::vector<Linear> layers_;
};

/// Gated recurrent cell:
///   r = s(x Wir + bir + h Whr + bhr), z = s(x Wiz + biz + h Whz + bhz)
///   n = tanh(x Win + bin + r * (h Whn + bhn)), h' = (1 - z) * n + z * h
class GruCell {
 public:
  GruCell() = default;
  GruCell(ParamStore& store, const std::string& prefix, Eigen::Index input, Eigen::Index hidden,
          Rng& rng);

  ad::Var operator()(ad::Tape& tape, ad::Var input, ad::Var hidden) const;

 private:
  Linear ir_, iz_, in_, hr_, hz_, hn_;
};

/// Parameter -> accumulated gradient.
class GradientBuffer {
 public:
  void add(const Parameter& p, const Matrix& g);
  void add_tape(const ad::Tape& tape);
  void merge(const GradientBuffer& other);
  void scale(double s);
  const Matrix* find(const Parameter& p) const;
  bool empty() const { return grads_.empty(); }
  const std::map<const Parameter*, Matrix>& entries() const { return grads_; }

 private:
  std::map<const Parameter*, Matrix> grads_;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Global gradient-norm clip; <= 0 disables.
  double clip_norm = 0.0;
};

class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamOptions options);
  void step(const GradientBuffer& grads);
  void set_lr(double lr) { options_.lr = lr; }
  long long steps() const { return t_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Matrix> m_, v_;
  AdamOptions options_;
  long long t_ = 0;
};

/// Parameter archive:
///   8 bytes  magic "CCGGCKP1"
///   8 bytes  little-endian u64 header length
///   header   JSON {"config": {...}, "tensors": [{"name", "shape": [r, c], "offset"}]}
///   payload  float64 little-endian, row-major, offsets in elements
struct Checkpoint {
  nlohmann::json config;
  std::map<std::string, Matrix> tensors;

  void put(const ParamStore& store);
  /// Copies matching tensors into `store`; every store entry must be present
  /// with the same shape.
  void restore(ParamStore& store) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ccgg
