#include "ccgg/autodiff.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "ccgg/errors.hpp"

namespace ccgg::ad {

const Matrix& Var::value() const { return tape_->nodes_[id_].value; }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ArgumentError("scalar() on a non-1x1 value");
  return v(0, 0);
}

bool Var::requires_grad() const { return tape_->nodes_[id_].needs_grad; }

Var Tape::constant(Matrix value) {
  nodes_.push_back({std::move(value), {}, {}, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Matrix value) {
  nodes_.push_back({std::move(value), {}, {}, record_});
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(const Parameter& p) {
  auto it = params_.find(&p);
  if (it != params_.end()) return Var(this, it->second);
  Var v = frozen_.count(&p) ? constant(p.value) : variable(p.value);
  params_.emplace(&p, v.id());
  return v;
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
  bool needs = false;
  if (record_) {
    for (const Var& in : inputs) {
      if (in.tape_ != this) throw ArgumentError("operands recorded on different tapes");
      needs = needs || nodes_[in.id_].needs_grad;
    }
  }
  nodes_.push_back({std::move(value), {}, needs ? std::move(backward) : Backward{}, needs});
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var root) {
  if (root.tape_ != this) throw ArgumentError("backward root from another tape");
  if (nodes_[root.id_].value.size() != 1) throw ArgumentError("backward root must be 1x1");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  if (!nodes_[root.id_].needs_grad) return;
  nodes_[root.id_].grad = Matrix::Ones(1, 1);
  for (std::size_t i = root.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0 || !n.backward) continue;
    n.backward(*this, n.grad, n.value);
  }
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[v.id_];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::for_each_param_grad(
    const std::function<void(const Parameter&, const Matrix&)>& fn) const {
  for (const auto& [p, id] : params_) {
    if (nodes_[id].grad.size() != 0) fn(*p, nodes_[id].grad);
  }
}

void Tape::accumulate(std::size_t id, const Matrix& g) { accumulate_expr(id, g); }

namespace {

void require_same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ArgumentError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                        std::to_string(b.cols()));
  }
}

double stable_log_sigmoid(double x) {
  return std::min(x, 0.0) - std::log1p(std::exp(-std::abs(x)));
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) {
    throw ArgumentError("matmul: inner dimensions " + std::to_string(a.cols()) + " vs " +
                        std::to_string(b.rows()));
  }
  Matrix out = a.value() * b.value();
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    if (a.requires_grad()) t.accumulate_expr(a.id(), g * b.value().transpose());
    if (b.requires_grad()) t.accumulate_expr(b.id(), a.value().transpose() * g);
  });
}

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  return a.tape()->record(a.value() + b.value(), {a, b},
                          [a, b](Tape& t, const Matrix& g, const Matrix&) {
                            t.accumulate(a.id(), g);
                            t.accumulate(b.id(), g);
                          });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  return a.tape()->record(a.value() - b.value(), {a, b},
                          [a, b](Tape& t, const Matrix& g, const Matrix&) {
                            t.accumulate(a.id(), g);
                            t.accumulate_expr(b.id(), -g);
                          });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  return a.tape()->record(a.value().cwiseProduct(b.value()), {a, b},
                          [a, b](Tape& t, const Matrix& g, const Matrix&) {
                            t.accumulate_expr(a.id(), g.cwiseProduct(b.value()));
                            t.accumulate_expr(b.id(), g.cwiseProduct(a.value()));
                          });
}

Var neg(Var a) { return scale(a, -1.0); }

Var scale(Var a, double s) {
  return a.tape()->record(a.value() * s, {a}, [a, s](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate_expr(a.id(), g * s);
  });
}

Var add_scalar(Var a, double s) {
  Matrix out = a.value().array() + s;
  return a.tape()->record(std::move(out), {a}, [a](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(a.id(), g);
  });
}

Var add_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ArgumentError("add_row: bad bias shape");
  Matrix out = a.value().rowwise() + row.value().row(0);
  return a.tape()->record(std::move(out), {a, row},
                          [a, row](Tape& t, const Matrix& g, const Matrix&) {
                            t.accumulate(a.id(), g);
                            t.accumulate_expr(row.id(), g.colwise().sum());
                          });
}

Var mul_col(Var a, Var col) {
  if (col.cols() != 1 || col.rows() != a.rows()) throw ArgumentError("mul_col: bad column shape");
  Matrix out = a.value().array().colwise() * col.value().col(0).array();
  return a.tape()->record(
      std::move(out), {a, col}, [a, col](Tape& t, const Matrix& g, const Matrix&) {
        if (a.requires_grad()) {
          t.accumulate_expr(a.id(), (g.array().colwise() * col.value().col(0).array()).matrix());
        }
        if (col.requires_grad()) {
          t.accumulate_expr(col.id(), g.cwiseProduct(a.value()).rowwise().sum());
        }
      });
}

Var div_col(Var a, Var col) {
  if (col.cols() != 1 || col.rows() != a.rows()) throw ArgumentError("div_col: bad column shape");
  Matrix out = a.value().array().colwise() / col.value().col(0).array();
  return a.tape()->record(
      std::move(out), {a, col}, [a, col](Tape& t, const Matrix& g, const Matrix& out) {
        const auto d = col.value().col(0).array();
        if (a.requires_grad()) t.accumulate_expr(a.id(), (g.array().colwise() / d).matrix());
        if (col.requires_grad()) {
          // d(a/d)/dd = -(a/d)/d
          Matrix gd = -(g.cwiseProduct(out).rowwise().sum().array() / d).matrix();
          t.accumulate(col.id(), gd);
        }
      });
}

Var relu(Var a) {
  Matrix out = a.value().cwiseMax(0.0);
  return a.tape()->record(std::move(out), {a}, [a](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate_expr(a.id(), (a.value().array() > 0.0).select(g, 0.0).matrix());
  });
}

Var sigmoid(Var a) {
  Matrix out = a.value().unaryExpr([](double x) { return stable_sigmoid(x); });
  return a.tape()->record(std::move(out), {a}, [a](Tape& t, const Matrix& g, const Matrix& y) {
    t.accumulate_expr(a.id(), (g.array() * y.array() * (1.0 - y.array())).matrix());
  });
}

Var log_sigmoid(Var a) {
  Matrix out = a.value().unaryExpr([](double x) { return stable_log_sigmoid(x); });
  return a.tape()->record(std::move(out), {a}, [a](Tape& t, const Matrix& g, const Matrix&) {
    // d/dx log sigmoid(x) = sigmoid(-x)
    Matrix s = a.value().unaryExpr([](double x) { return stable_sigmoid(-x); });
    t.accumulate_expr(a.id(), g.cwiseProduct(s));
  });
}

Var tanh(Var a) {
  Matrix out = a.value().array().tanh().matrix();
  return a.tape()->record(std::move(out), {a}, [a](Tape& t, const Matrix& g, const Matrix& y) {
    t.accumulate_expr(a.id(), (g.array() * (1.0 - y.array().square())).matrix());
  });
}

Var exp(Var a) {
  Matrix out = a.value().array().exp().matrix();
  return a.tape()->record(std::move(out), {a}, [a](Tape& t, const Matrix& g, const Matrix& y) {
    t.accumulate_expr(a.id(), g.cwiseProduct(y));
  });
}

Var log(Var a) {
  Matrix out = a.value().array().log().matrix();
  return a.tape()->record(std::move(out), {a}, [a](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate_expr(a.id(), g.cwiseQuotient(a.value()));
  });
}

Var log1p(Var a) {
  Matrix out = a.value().unaryExpr([](double x) { return std::log1p(x); });
  return a.tape()->record(std::move(out), {a}, [a](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate_expr(a.id(), (g.array() / (1.0 + a.value().array())).matrix());
  });
}

Var clamp(Var a, double lo, double hi) {
  Matrix out = a.value().cwiseMax(lo).cwiseMin(hi);
  return a.tape()->record(
      std::move(out), {a}, [a, lo, hi](Tape& t, const Matrix& g, const Matrix&) {
        const auto& x = a.value().array();
        t.accumulate_expr(a.id(), ((x >= lo) && (x <= hi)).select(g, 0.0).matrix());
      });
}

Var clamp_min(Var a, double lo) {
  return clamp(a, lo, std::numeric_limits<double>::infinity());
}

Var concat_cols(Var a, Var b) {
  if (a.rows() != b.rows()) throw ArgumentError("concat_cols: row mismatch");
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const auto ac = a.cols();
  const auto bc = b.cols();
  return a.tape()->record(std::move(out), {a, b},
                          [a, b, ac, bc](Tape& t, const Matrix& g, const Matrix&) {
                            t.accumulate_expr(a.id(), g.leftCols(ac));
                            t.accumulate_expr(b.id(), g.rightCols(bc));
                          });
}

Var concat_rows(Var a, Var b) {
  if (a.cols() != b.cols()) throw ArgumentError("concat_rows: column mismatch");
  Matrix out(a.rows() + b.rows(), a.cols());
  out << a.value(), b.value();
  const auto ar = a.rows();
  const auto br = b.rows();
  return a.tape()->record(std::move(out), {a, b},
                          [a, b, ar, br](Tape& t, const Matrix& g, const Matrix&) {
                            t.accumulate_expr(a.id(), g.topRows(ar));
                            t.accumulate_expr(b.id(), g.bottomRows(br));
                          });
}

Var gather_rows(Var a, std::span<const int> index) {
  const auto& src = a.value();
  Matrix out(static_cast<Eigen::Index>(index.size()), src.cols());
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] < 0 || index[k] >= src.rows()) throw ArgumentError("gather_rows: index range");
    out.row(static_cast<Eigen::Index>(k)) = src.row(index[k]);
  }
  std::vector<int> idx(index.begin(), index.end());
  return a.tape()->record(std::move(out), {a},
                          [a, idx = std::move(idx)](Tape& t, const Matrix& g, const Matrix&) {
                            Matrix ga = Matrix::Zero(a.rows(), a.cols());
                            for (std::size_t k = 0; k < idx.size(); ++k) {
                              ga.row(idx[k]) += g.row(static_cast<Eigen::Index>(k));
                            }
                            t.accumulate(a.id(), ga);
                          });
}

Var scatter_add_rows(Var a, std::span<const int> index, Eigen::Index out_rows) {
  if (static_cast<Eigen::Index>(index.size()) != a.rows()) {
    throw ArgumentError("scatter_add_rows: index length mismatch");
  }
  Matrix out = Matrix::Zero(out_rows, a.cols());
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] < 0 || index[k] >= out_rows) throw ArgumentError("scatter_add_rows: index range");
    out.row(index[k]) += a.value().row(static_cast<Eigen::Index>(k));
  }
  std::vector<int> idx(index.begin(), index.end());
  return a.tape()->record(std::move(out), {a},
                          [a, idx = std::move(idx)](Tape& t, const Matrix& g, const Matrix&) {
                            Matrix ga(a.rows(), a.cols());
                            for (std::size_t k = 0; k < idx.size(); ++k) {
                              ga.row(static_cast<Eigen::Index>(k)) = g.row(idx[k]);
                            }
                            t.accumulate(a.id(), ga);
                          });
}

Var select_col(Var a, Eigen::Index col) {
  if (col < 0 || col >= a.cols()) throw ArgumentError("select_col: column out of range");
  Matrix out = a.value().col(col);
  return a.tape()->record(std::move(out), {a}, [a, col](Tape& t, const Matrix& g, const Matrix&) {
    Matrix ga = Matrix::Zero(a.rows(), a.cols());
    ga.col(col) = g.col(0);
    t.accumulate(a.id(), ga);
  });
}

Var pick(Var a, Eigen::Index r, Eigen::Index c) {
  if (r < 0 || c < 0 || r >= a.rows() || c >= a.cols()) throw ArgumentError("pick: out of range");
  Matrix out(1, 1);
  out(0, 0) = a.value()(r, c);
  return a.tape()->record(std::move(out), {a}, [a, r, c](Tape& t, const Matrix& g, const Matrix&) {
    Matrix ga = Matrix::Zero(a.rows(), a.cols());
    ga(r, c) = g(0, 0);
    t.accumulate(a.id(), ga);
  });
}

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape()->record(std::move(out), {a}, [a](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate_expr(a.id(), Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var sum_rows(Var a) {
  Matrix out = a.value().colwise().sum();
  return a.tape()->record(std::move(out), {a}, [a](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate_expr(a.id(), g.replicate(a.rows(), 1));
  });
}

Var mean_rows(Var a) {
  if (a.rows() == 0) throw ArgumentError("mean_rows of an empty matrix");
  return scale(sum_rows(a), 1.0 / static_cast<double>(a.rows()));
}

Var sum_cols(Var a) {
  Matrix out = a.value().rowwise().sum();
  return a.tape()->record(std::move(out), {a}, [a](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate_expr(a.id(), g.replicate(1, a.cols()));
  });
}

Var logsumexp_rows(Var a) {
  const auto& x = a.value();
  if (x.cols() == 0) throw ArgumentError("logsumexp over zero columns");
  Matrix out(x.rows(), 1);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    out(r, 0) = m + std::log((x.row(r).array() - m).exp().sum());
  }
  return a.tape()->record(std::move(out), {a}, [a](Tape& t, const Matrix& g, const Matrix& y) {
    Matrix soft = (a.value().colwise() - y.col(0)).array().exp().matrix();
    t.accumulate_expr(a.id(), (soft.array().colwise() * g.col(0).array()).matrix());
  });
}

Var log_softmax_rows(Var a) {
  const auto& x = a.value();
  if (x.cols() == 0) throw ArgumentError("log_softmax over zero columns");
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    const double lse = m + std::log((x.row(r).array() - m).exp().sum());
    out.row(r) = x.row(r).array() - lse;
  }
  return a.tape()->record(std::move(out), {a}, [a](Tape& t, const Matrix& g, const Matrix& y) {
    Matrix soft = y.array().exp().matrix();
    Matrix gsum = g.rowwise().sum();
    t.accumulate_expr(a.id(), g - (soft.array().colwise() * gsum.col(0).array()).matrix());
  });
}

Var softmax_rows(Var a) { return exp(log_softmax_rows(a)); }

Var bernoulli_log_prob(Var logits, std::span<const double> bits) {
  const auto& z = logits.value();
  if (static_cast<Eigen::Index>(bits.size()) != z.rows()) {
    throw ArgumentError("bernoulli_log_prob: " + std::to_string(bits.size()) + " bits for " +
                        std::to_string(z.rows()) + " rows");
  }
  Matrix out(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double b = bits[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      out(r, c) = b * stable_log_sigmoid(z(r, c)) + (1.0 - b) * stable_log_sigmoid(-z(r, c));
    }
  }
  std::vector<double> b(bits.begin(), bits.end());
  return logits.tape()->record(
      std::move(out), {logits}, [logits, b = std::move(b)](Tape& t, const Matrix& g, const Matrix&) {
        const auto& z = logits.value();
        Matrix gz(z.rows(), z.cols());
        for (Eigen::Index r = 0; r < z.rows(); ++r) {
          for (Eigen::Index c = 0; c < z.cols(); ++c) {
            // d/dz = b - sigmoid(z)
            gz(r, c) = g(r, c) * (b[static_cast<std::size_t>(r)] - stable_sigmoid(z(r, c)));
          }
        }
        t.accumulate(logits.id(), gz);
      });
}

Var straight_through(Var soft, Matrix hard) {
  if (hard.rows() != soft.rows() || hard.cols() != soft.cols()) {
    throw ArgumentError("straight_through: shape mismatch");
  }
  return soft.tape()->record(std::move(hard), {soft},
                             [soft](Tape& t, const Matrix& g, const Matrix&) {
                               t.accumulate(soft.id(), g);
                             });
}

Var place_entries(Matrix base, Var values, std::span<const Placement> placements) {
  if (values.cols() != 1) throw ArgumentError("place_entries: values must be a column");
  for (const auto& p : placements) {
    if (p.source < 0 || p.source >= values.rows() || p.row < 0 || p.row >= base.rows() ||
        p.col < 0 || p.col >= base.cols()) {
      throw ArgumentError("place_entries: placement out of range");
    }
    base(p.row, p.col) = values.value()(p.source, 0);
  }
  std::vector<Placement> ps(placements.begin(), placements.end());
  return values.tape()->record(std::move(base), {values},
                               [values, ps = std::move(ps)](Tape& t, const Matrix& g,
                                                            const Matrix&) {
                                 Matrix gv = Matrix::Zero(values.rows(), 1);
                                 for (const auto& p : ps) gv(p.source, 0) += g(p.row, p.col);
                                 t.accumulate(values.id(), gv);
                               });
}

}  // namespace ccgg::ad
