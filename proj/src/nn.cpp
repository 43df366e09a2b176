#include "ccgg/nn.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "ccgg/errors.hpp"

namespace ccgg {

static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes little-endian");

Parameter& ParamStore::add(const std::string& name, Matrix init) {
  if (contains(name)) throw ArgumentError("duplicate parameter " + name);
  index_.emplace(name, params_.size());
  params_.push_back({name, std::move(init)});
  return params_.back();
}

Parameter& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ArgumentError("unknown parameter " + name);
  return params_[it->second];
}

const Parameter& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ArgumentError("unknown parameter " + name);
  return params_[it->second];
}

std::size_t ParamStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

std::vector<Parameter*> ParamStore::pointers() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

Matrix he_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  Matrix w(fan_in, fan_out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-bound, bound);
  return w;
}

Matrix orthogonal(Eigen::Index n, Rng& rng) {
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  // Sign fix so the result is uniformly distributed.
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < n; ++j) {
    if (r(j, j) < 0) q.col(j) *= -1.0;
  }
  return q;
}

Linear::Linear(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index out,
               Rng& rng)
    : weight_(&store.add(name + "/weight", he_uniform(in, out, rng))),
      bias_(&store.add(name + "/bias", Matrix::Zero(1, out))) {}

ad::Var Linear::operator()(ad::Tape& tape, ad::Var x) const {
  return ad::add_row(ad::matmul(x, tape.param(*weight_)), tape.param(*bias_));
}

Mlp::Mlp(ParamStore& store, const std::string& prefix, const std::vector<Eigen::Index>& widths,
         Rng& rng) {
  if (widths.size() < 2) throw ArgumentError("MLP needs at least input and output widths");
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    layers_.emplace_back(store, prefix + "/" + std::to_string(k), widths[k], widths[k + 1], rng);
  }
}

ad::Var Mlp::operator()(ad::Tape& tape, ad::Var x) const {
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    x = layers_[k](tape, x);
    if (k + 1 < layers_.size()) x = ad::relu(x);
  }
  return x;
}

GruCell::GruCell(ParamStore& store, const std::string& prefix, Eigen::Index input,
                 Eigen::Index hidden, Rng& rng)
    : ir_(store, prefix + "/ir", input, hidden, rng),
      iz_(store, prefix + "/iz", input, hidden, rng),
      in_(store, prefix + "/in", input, hidden, rng),
      hr_(store, prefix + "/hr", hidden, hidden, rng),
      hz_(store, prefix + "/hz", hidden, hidden, rng),
      hn_(store, prefix + "/hn", hidden, hidden, rng) {
  // Input maps: uniform(+-1/sqrt(hidden)); recurrent maps: orthogonal.
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (const Linear* l : {&ir_, &iz_, &in_}) {
    auto& w = store.at(l->weight().name).value;
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-bound, bound);
  }
  for (const Linear* l : {&hr_, &hz_, &hn_}) store.at(l->weight().name).value = orthogonal(hidden, rng);
}

ad::Var GruCell::operator()(ad::Tape& tape, ad::Var input, ad::Var hidden) const {
  using namespace ad;
  Var r = sigmoid(add(ir_(tape, input), hr_(tape, hidden)));
  Var z = sigmoid(add(iz_(tape, input), hz_(tape, hidden)));
  Var n = ccgg::ad::tanh(add(in_(tape, input), mul(r, hn_(tape, hidden))));
  // (1 - z) * n + z * h  ==  n + z * (h - n)
  return add(n, mul(z, sub(hidden, n)));
}

void GradientBuffer::add(const Parameter& p, const Matrix& g) {
  auto it = grads_.find(&p);
  if (it == grads_.end()) {
    grads_.emplace(&p, g);
  } else {
    it->second += g;
  }
}

void GradientBuffer::add_tape(const ad::Tape& tape) {
  tape.for_each_param_grad([this](const Parameter& p, const Matrix& g) { add(p, g); });
}

void GradientBuffer::merge(const GradientBuffer& other) {
  for (const auto& [p, g] : other.grads_) add(*p, g);
}

void GradientBuffer::scale(double s) {
  for (auto& [p, g] : grads_) g *= s;
}

const Matrix* GradientBuffer::find(const Parameter& p) const {
  auto it = grads_.find(&p);
  return it == grads_.end() ? nullptr : &it->second;
}

Adam::Adam(std::vector<Parameter*> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  for (const Parameter* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step(const GradientBuffer& grads) {
  ++t_;
  double clip = 1.0;
  if (options_.clip_norm > 0) {
    double sq = 0;
    for (const Parameter* p : params_) {
      if (const Matrix* g = grads.find(*p)) sq += g->squaredNorm();
    }
    const double norm = std::sqrt(sq);
    if (norm > options_.clip_norm) clip = options_.clip_norm / norm;
  }
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Matrix* g = grads.find(*params_[i]);
    if (g == nullptr) continue;
    m_[i] = options_.beta1 * m_[i] + (1.0 - options_.beta1) * clip * (*g);
    v_[i] = options_.beta2 * v_[i] + (1.0 - options_.beta2) * (clip * (*g)).cwiseAbs2();
    params_[i]->value.array() -=
        options_.lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + options_.eps);
  }
}

void Checkpoint::put(const ParamStore& store) {
  for (const auto& p : store) tensors[p.name] = p.value;
}

void Checkpoint::restore(ParamStore& store) const {
  for (auto& p : store) {
    auto it = tensors.find(p.name);
    if (it == tensors.end()) throw ArgumentError("checkpoint lacks tensor " + p.name);
    if (it->second.rows() != p.value.rows() || it->second.cols() != p.value.cols()) {
      throw ArgumentError("checkpoint tensor " + p.name + " has shape " +
                          std::to_string(it->second.rows()) + "x" +
                          std::to_string(it->second.cols()) + ", expected " +
                          std::to_string(p.value.rows()) + "x" + std::to_string(p.value.cols()));
    }
    p.value = it->second;
  }
}

namespace {
constexpr char kMagic[8] = {'C', 'C', 'G', 'G', 'C', 'K', 'P', '1'};
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json header;
  header["config"] = ckpt.config;
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, m] : ckpt.tensors) {
    header["tensors"].push_back({{"name", name}, {"shape", {m.rows(), m.cols()}}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(m.size());
  }
  const std::string text = header.dump();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot write checkpoint " + path.string());
  const std::uint64_t len = text.size();
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, m] : ckpt.tensors) {
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(m.size() * sizeof(double)));
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open checkpoint " + path.string());
  char magic[8];
  std::uint64_t len = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw IngestionError(path.string() + " is not a checkpoint archive");
  }
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  std::vector<char> payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Checkpoint ckpt;
  try {
    const auto header = nlohmann::json::parse(text);
    ckpt.config = header.at("config");
    for (const auto& t : header.at("tensors")) {
      const auto rows = t.at("shape").at(0).get<Eigen::Index>();
      const auto cols = t.at("shape").at(1).get<Eigen::Index>();
      const auto offset = t.at("offset").get<std::uint64_t>();
      const auto bytes = static_cast<std::uint64_t>(rows * cols) * sizeof(double);
      if ((offset * sizeof(double)) + bytes > payload.size()) {
        throw IngestionError(path.string() + ": truncated payload");
      }
      Matrix m(rows, cols);
      std::memcpy(m.data(), payload.data() + offset * sizeof(double), bytes);
      ckpt.tensors.emplace(t.at("name").get<std::string>(), std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError(path.string() + ": bad checkpoint header: " + e.what());
  }
  return ckpt;
}

}  // namespace ccgg
