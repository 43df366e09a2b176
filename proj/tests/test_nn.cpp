#include <fstream>

#include "doctest.h"
#include "helpers.hpp"

#include "ccgg/errors.hpp"
#include "ccgg/nn.hpp"

using namespace ccgg;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
  return m;
}

/// Worst relative FD error over every parameter of `store` for loss f.
double store_gradient_error(ParamStore& store, const std::function<ad::Var(ad::Tape&)>& f) {
  ad::Tape tape;
  tape.backward(f(tape));
  GradientBuffer grads;
  grads.add_tape(tape);
  double worst = 0.0;
  for (auto& p : store) {
    const Matrix* g = grads.find(p);
    const Matrix analytic = g ? *g : Matrix::Zero(p.value.rows(), p.value.cols());
    worst = std::max(worst, testing::worst_gradient_error(
                                [&] {
                                  ad::Tape t(false);
                                  return f(t).scalar();
                                },
                                p.value, analytic));
  }
  return worst;
}

}  // namespace

TEST_CASE("linear layer computes xW + b") {
  ParamStore store;
  Rng rng(1);
  Linear lin(store, "lin", 3, 2, rng);
  CHECK(store.contains("lin/weight"));
  CHECK(store.contains("lin/bias"));
  CHECK(lin.in_features() == 3);
  CHECK(lin.out_features() == 2);
  const Matrix x = random_matrix(4, 3, rng);
  ad::Tape tape;
  const Matrix y = lin(tape, tape.constant(x)).value();
  const Matrix expected = (x * store.at("lin/weight").value).rowwise() +
                          store.at("lin/bias").value.row(0);
  CHECK((y - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(store.add("lin/weight", Matrix::Zero(1, 1)), ArgumentError);
  CHECK_THROWS_AS(store.at("nope"), ArgumentError);
}

TEST_CASE("mlp and gru gradients match finite differences") {
  ParamStore store;
  Rng rng(2);
  Mlp mlp(store, "mlp", {3, 5, 2}, rng);
  GruCell gru(store, "gru", 2, 4, rng);
  const Matrix x = random_matrix(3, 3, rng);
  const Matrix h = random_matrix(3, 4, rng);
  auto loss = [&](ad::Tape& t) {
    auto y = mlp(t, t.constant(x));
    auto hn = gru(t, y, t.constant(h));
    return ad::sum(ad::mul(hn, hn));
  };
  CHECK(store_gradient_error(store, loss) < 1e-5);
  CHECK(mlp.layers().size() == 2);
  CHECK(store.contains("mlp/1/weight"));
  CHECK_THROWS_AS(Mlp(store, "bad", {3}, rng), ArgumentError);
}

TEST_CASE("gru with zero update gate keeps the candidate") {
  ParamStore store;
  Rng rng(3);
  GruCell gru(store, "g", 2, 2, rng);
  for (auto& p : store) p.value.setZero();
  ad::Tape tape;
  Matrix h(1, 2);
  h << 0.4, -0.6;
  // All-zero weights: z = 0.5, n = 0, so h' = h / 2.
  const Matrix out = gru(tape, tape.constant(Matrix::Zero(1, 2)), tape.constant(h)).value();
  CHECK(out(0, 0) == doctest::Approx(0.2));
  CHECK(out(0, 1) == doctest::Approx(-0.3));
}

TEST_CASE("adam minimizes a quadratic") {
  ParamStore store;
  Parameter& w = store.add("w", Matrix::Constant(1, 3, 5.0));
  Adam adam(store.pointers(), AdamOptions{0.1});
  Matrix target(1, 3);
  target << 1, -2, 0.5;
  for (int i = 0; i < 500; ++i) {
    ad::Tape tape;
    auto d = ad::sub(tape.param(w), tape.constant(target));
    tape.backward(ad::sum(ad::mul(d, d)));
    GradientBuffer g;
    g.add_tape(tape);
    adam.step(g);
  }
  CHECK(adam.steps() == 500);
  CHECK((w.value - target).cwiseAbs().maxCoeff() < 1e-2);
}

TEST_CASE("first adam step moves each coordinate by lr") {
  ParamStore store;
  Parameter& w = store.add("w", Matrix::Zero(1, 2));
  Adam adam(store.pointers(), AdamOptions{0.01});
  GradientBuffer g;
  Matrix grad(1, 2);
  grad << 3.0, -0.002;
  g.add(w, grad);
  adam.step(g);
  CHECK(w.value(0, 0) == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(w.value(0, 1) == doctest::Approx(0.01).epsilon(1e-4));
}

TEST_CASE("gradient buffer merges and scales") {
  Parameter p{"p", Matrix::Zero(1, 1)};
  GradientBuffer a;
  GradientBuffer b;
  a.add(p, Matrix::Constant(1, 1, 2.0));
  b.add(p, Matrix::Constant(1, 1, 4.0));
  a.merge(b);
  a.scale(0.5);
  REQUIRE(a.find(p) != nullptr);
  CHECK((*a.find(p))(0, 0) == doctest::Approx(3.0));
}

TEST_CASE("checkpoint round trip and mismatch") {
  ParamStore store;
  Rng rng(4);
  Mlp mlp(store, "m", {4, 3, 2}, rng);
  Checkpoint ckpt;
  ckpt.config = {{"kind", "test"}, {"width", 3}};
  ckpt.put(store);
  const auto dir = testing::scratch_dir("ckpt");
  save_checkpoint(dir / "a.ckpt", ckpt);

  ParamStore other;
  Rng rng2(99);
  Mlp mlp2(other, "m", {4, 3, 2}, rng2);
  const auto loaded = load_checkpoint(dir / "a.ckpt");
  CHECK(loaded.config == ckpt.config);
  loaded.restore(other);
  for (const auto& p : store) CHECK(other.at(p.name).value == p.value);

  ParamStore wrong;
  Mlp mlp3(wrong, "m", {4, 5, 2}, rng2);
  CHECK_THROWS_AS(loaded.restore(wrong), ArgumentError);

  {
    std::ofstream out(dir / "junk.ckpt", std::ios::binary);
    out << "not a checkpoint";
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "junk.ckpt"), IngestionError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), IngestionError);
}

TEST_CASE("initializers") {
  Rng rng(5);
  const Matrix q = orthogonal(6, rng);
  CHECK(((q * q.transpose()) - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-9);
  const Matrix w = he_uniform(50, 40, rng);
  const double bound = std::sqrt(6.0 / 50.0);
  CHECK(w.cwiseAbs().maxCoeff() <= bound);
}
