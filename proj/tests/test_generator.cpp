#include "doctest.h"
#include "helpers.hpp"

#include "ccgg/errors.hpp"
#include "ccgg/generator.hpp"

using namespace ccgg;

namespace {

GeneratorConfig small_config(int block = 1, int n = 6, int k = 3) {
  GeneratorConfig c;
  c.block_size = block;
  c.max_nodes = n;
  c.num_mixtures = k;
  c.rounds = 2;
  c.hidden_dim_h = 4;
  c.cond_dim = 2;
  c.num_classes = 2;
  return c;
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
  return m;
}

/// Zero-initialized biases put ReLUs exactly on their kink for nodes with
/// identical states; finite differences need a generic point.
void randomize_biases(ParamStore& store, Rng& rng) {
  for (auto& p : store) {
    if (p.name.ends_with("bias") || p.name.ends_with("/bh") || p.name.ends_with("/bc")) {
      for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = rng.uniform(-0.5, 0.5);
    }
  }
}

void zero_params(Generator& gen, const std::string& prefix = "") {
  for (auto& p : gen.params()) {
    if (p.name.rfind(prefix, 0) == 0) p.value.setZero();
  }
}

}  // namespace

TEST_CASE("config validation and json") {
  auto c = small_config();
  CHECK(GeneratorConfig::from_json(c.to_json()).to_json() == c.to_json());
  c.num_mixtures = 0;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
  CHECK_THROWS_AS(ClassConditionVector::one_hot(2, 2), ArgumentError);
  const std::vector<double> bad{0.5, 0.5};
  CHECK_THROWS_AS(ClassConditionVector::from_values(bad), ArgumentError);
  const std::vector<double> good{0.0, 1.0};
  CHECK(ClassConditionVector::from_values(good).class_index() == 1);
}

TEST_CASE("init_representations") {
  Generator gen(small_config(), 1);
  const auto c0 = ClassConditionVector::one_hot(0, 2);
  const auto c1 = ClassConditionVector::one_hot(1, 2);
  std::vector<BitRow> rows{BitRow(6, 0), BitRow{1, 0, 0, 0, 0, 0}};

  SUBCASE("zero weights give zero states") {
    zero_params(gen);
    ad::Tape tape;
    auto s = init_representations(tape, gen, rows, 1, c0);
    CHECK(s.h.value().isZero());
  }
  SUBCASE("first step: block only, structure part zero") {
    ad::Tape tape;
    auto s = init_representations(tape, gen, {}, 1, c0);
    CHECK(s.num_nodes() == 1);
    CHECK(s.x == std::vector<std::uint8_t>{1});
    CHECK(s.h.value().leftCols(4).isZero());
    CHECK_FALSE(s.h.value().rightCols(2).isZero());
  }
  SUBCASE("class only moves the condition coordinates") {
    ad::Tape tape;
    auto s0 = init_representations(tape, gen, rows, 2, c0);
    auto s1 = init_representations(tape, gen, rows, 2, c1);
    CHECK(s0.h.rows() == 4);
    CHECK(s0.x == std::vector<std::uint8_t>{0, 0, 1, 1});
    CHECK(s0.h.value().leftCols(4) == s1.h.value().leftCols(4));
    CHECK(s0.h.value().rightCols(2) != s1.h.value().rightCols(2));
    CHECK(s0.h.value().bottomRows(2).leftCols(4).isZero());
  }
  SUBCASE("errors") {
    ad::Tape tape;
    CHECK_THROWS_AS(init_representations(tape, gen, rows, 0, c0), ArgumentError);
    CHECK_THROWS_AS(init_representations(tape, gen, rows, 5, c0), CapacityError);
    CHECK_THROWS_AS(init_representations(tape, gen, rows, 1, ClassConditionVector::one_hot(0, 3)),
                    ArgumentError);
  }
}

TEST_CASE("gnn_round is permutation equivariant") {
  Generator gen(small_config(1, 8), 2);
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 6;
    const Matrix h = random_matrix(n, 6, rng);
    std::vector<std::uint8_t> x(n);
    for (auto& f : x) f = rng.bernoulli(0.5) ? 1 : 0;
    std::vector<Edge> edges;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (rng.bernoulli(0.4)) edges.emplace_back(i, j);
      }
    }
    const auto perm = testing::random_permutation(n, rng);
    Matrix hp(n, 6);
    std::vector<std::uint8_t> xp(n);
    std::vector<Edge> ep;
    for (int v = 0; v < n; ++v) {
      hp.row(perm[v]) = h.row(v);
      xp[perm[v]] = x[v];
    }
    for (const auto& [u, v] : edges) ep.emplace_back(perm[u], perm[v]);

    ad::Tape tape;
    const Matrix out = gnn_round(tape, gen, NodeStates{tape.constant(h), x}, edges, 0).h.value();
    const Matrix outp = gnn_round(tape, gen, NodeStates{tape.constant(hp), xp}, ep, 0).h.value();
    for (int v = 0; v < n; ++v) {
      CHECK((out.row(v) - outp.row(perm[v])).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("gnn_round without edges and with zero weights") {
  Generator gen(small_config(), 4);
  Rng rng(5);
  const Matrix h = random_matrix(3, 6, rng);
  ad::Tape tape;
  // No edges: every node receives a zero message, so only the GRU acts.
  const Matrix a = gnn_round(tape, gen, NodeStates{tape.constant(h), {0, 0, 1}}, {}, 0).h.value();
  const std::vector<Edge> none;
  const Matrix b = gen.round(0).update(tape, tape.constant(Matrix::Zero(3, 6)), tape.constant(h)).value();
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);

  // Identical states: all differences vanish, same as no edges.
  Matrix same = Matrix::Ones(3, 6);
  const std::vector<Edge> tri{{0, 1}, {1, 2}, {0, 2}};
  const Matrix c = gnn_round(tape, gen, NodeStates{tape.constant(same), {0, 0, 0}}, tri, 0).h.value();
  const Matrix d = gnn_round(tape, gen, NodeStates{tape.constant(same), {0, 0, 0}}, none, 0).h.value();
  // Messages f(0) are nonzero only through biases, which start at zero.
  CHECK((c - d).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("output heads") {
  SUBCASE("K = 1 gives alpha = [1]") {
    Generator gen(small_config(1, 6, 1), 6);
    ad::Tape tape;
    std::vector<BitRow> rows(3, BitRow(6, 0));
    auto step = run_step(tape, gen, rows, 1, ClassConditionVector::one_hot(0, 2));
    const auto mix = step.heads.mixture();
    CHECK(mix.alpha.size() == 1);
    CHECK(mix.alpha(0) == doctest::Approx(1.0));
  }
  SUBCASE("zero theta head gives 0.5") {
    Generator gen(small_config(), 7);
    zero_params(gen, "gen/heads/theta");
    ad::Tape tape;
    std::vector<BitRow> rows(2, BitRow(6, 0));
    auto step = run_step(tape, gen, rows, 1, ClassConditionVector::one_hot(1, 2));
    const auto mix = step.heads.mixture();
    CHECK(mix.theta.rows() == 2);
    CHECK((mix.theta.array() - 0.5).abs().maxCoeff() < 1e-12);
  }
  SUBCASE("equal states give equal theta rows") {
    Generator gen(small_config(2), 8);
    ad::Tape tape;
    NodeStates s{tape.constant(Matrix::Constant(4, 6, 0.3)), {0, 0, 1, 1}};
    const auto mix = output_heads(tape, gen, s, Block{2, 4}).mixture();
    REQUIRE(mix.theta.rows() == 2 + 3);
    for (Eigen::Index r = 1; r < mix.theta.rows(); ++r) CHECK(mix.theta.row(r) == mix.theta.row(0));
    mix.validate();
  }
  SUBCASE("empty block throws") {
    Generator gen(small_config(), 9);
    ad::Tape tape;
    NodeStates s{tape.constant(Matrix::Zero(2, 6)), {0, 1}};
    CHECK_THROWS_AS(output_heads(tape, gen, s, Block{2, 2}), ArgumentError);
  }
}

TEST_CASE("mixture simplex validation") {
  MixtureParams mix;
  mix.alpha = Eigen::VectorXd::Constant(2, 0.6);
  mix.theta = Matrix::Constant(1, 2, 0.5);
  CHECK_THROWS_AS(mix.validate(), ArgumentError);
  mix.alpha << 0.4, 0.6;
  CHECK_NOTHROW(mix.validate());
  mix.theta(0, 0) = 1.0;
  CHECK_THROWS_AS(mix.validate(), ArgumentError);
}

TEST_CASE("block log-likelihood") {
  SUBCASE("two edges at 0.5 give log 0.25") {
    MixtureParams mix;
    mix.alpha = Eigen::VectorXd::Ones(1);
    mix.theta = Matrix::Constant(2, 1, 0.5);
    const std::vector<std::uint8_t> bits{1, 0};
    CHECK(block_log_likelihood(mix, bits) == doctest::Approx(std::log(0.25)));
  }
  SUBCASE("identical components collapse to one") {
    MixtureParams one;
    one.alpha = Eigen::VectorXd::Ones(1);
    one.theta = Matrix(3, 1);
    one.theta << 0.2, 0.7, 0.9;
    MixtureParams many;
    many.alpha = Eigen::VectorXd::Constant(4, 0.25);
    many.theta = one.theta.replicate(1, 4);
    const std::vector<std::uint8_t> bits{0, 1, 1};
    CHECK(block_log_likelihood(many, bits) == doctest::Approx(block_log_likelihood(one, bits)));
  }
  SUBCASE("brute force over all bit patterns") {
    Rng rng(10);
    MixtureParams mix;
    mix.alpha = Eigen::VectorXd(3);
    mix.alpha << 0.2, 0.5, 0.3;
    mix.theta = Matrix(4, 3);
    for (Eigen::Index i = 0; i < mix.theta.size(); ++i) mix.theta.data()[i] = rng.uniform(0.05, 0.95);
    double total = 0.0;
    for (int pattern = 0; pattern < 16; ++pattern) {
      std::vector<std::uint8_t> bits(4);
      for (int e = 0; e < 4; ++e) bits[e] = (pattern >> e) & 1;
      double p = 0.0;
      for (int k = 0; k < 3; ++k) {
        double prod = mix.alpha(k);
        for (int e = 0; e < 4; ++e) prod *= bits[e] ? mix.theta(e, k) : 1.0 - mix.theta(e, k);
        p += prod;
      }
      CHECK(block_log_likelihood(mix, bits) == doctest::Approx(std::log(p)).epsilon(1e-12));
      total += p;
    }
    CHECK(total == doctest::Approx(1.0));
  }
  SUBCASE("dimension mismatch") {
    MixtureParams mix;
    mix.alpha = Eigen::VectorXd::Ones(1);
    mix.theta = Matrix::Constant(2, 1, 0.5);
    const std::vector<std::uint8_t> bits{1};
    CHECK_THROWS_AS(block_log_likelihood(mix, bits), ArgumentError);
  }
  SUBCASE("tape version matches the double version") {
    Generator gen(small_config(2, 6, 3), 11);
    ad::Tape tape;
    std::vector<BitRow> rows{BitRow(6, 0), BitRow{1, 0, 0, 0, 0, 0}};
    auto step = run_step(tape, gen, rows, 2, ClassConditionVector::one_hot(0, 2));
    const std::vector<std::uint8_t> bits{1, 0, 0, 1, 1};
    CHECK(block_log_likelihood(step.heads, bits).scalar() ==
          doctest::Approx(block_log_likelihood(step.heads.mixture(), bits)).epsilon(1e-10));
  }
}

TEST_CASE("graph log-likelihood") {
  const auto c0 = ClassConditionVector::one_hot(0, 2);
  const auto c1 = ClassConditionVector::one_hot(1, 2);

  SUBCASE("single node has likelihood one") {
    Generator gen(small_config(), 12);
    auto [og, part] = decompose(Graph::unlabeled(1, {}), 1, 6);
    CHECK(graph_log_likelihood(gen, og, c0) == doctest::Approx(0.0));
  }
  SUBCASE("value is a log-probability and depends on the class") {
    Generator gen(small_config(), 13);
    Rng rng(14);
    int differs = 0;
    for (int trial = 0; trial < 10; ++trial) {
      auto [og, part] = decompose(testing::random_graph(rng, 3, 6, 0.5), 1, 6);
      const double a = graph_log_likelihood(gen, og, c0);
      const double b = graph_log_likelihood(gen, og, c1);
      CHECK(a <= 0.0);
      differs += a != b;
    }
    // The class embedding cancels in state differences and reaches the heads
    // only through the recurrent update, so small graphs may tie.
    CHECK(differs >= 8);
  }
  SUBCASE("B = 2 equals the sum over blocks") {
    Generator gen(small_config(2), 15);
    Graph g = Graph::unlabeled(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 4}, {1, 3}});
    auto [og, part] = decompose(g, 2, 6);
    CHECK(part.num_steps() == 3);
    double sum = 0.0;
    std::size_t candidates = 0;
    for (const auto& block : part.blocks) {
      ad::Tape tape(false);
      std::span<const BitRow> prior(og.lower_rows.data(), block.begin);
      auto step = run_step(tape, gen, prior, block.size(), c0);
      candidates += step.graph.candidates.size();
      sum += block_log_likelihood(step.heads.mixture(), observed_bits(og, step.graph));
    }
    CHECK(candidates == 10);
    CHECK(graph_log_likelihood(gen, og, c0) == doctest::Approx(sum).epsilon(1e-10));
  }
  SUBCASE("capacity") {
    Generator gen(small_config(), 16);
    auto [og, part] = decompose(Graph::unlabeled(7, {}), 1, 7);
    CHECK_THROWS_AS(graph_log_likelihood(gen, og, c0), CapacityError);
  }
}

TEST_CASE("graph log-likelihood gradient matches finite differences") {
  Generator gen(small_config(2), 17);
  Rng rng(18);
  randomize_biases(gen.params(), rng);
  Graph g = Graph::unlabeled(5, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {2, 4}});
  auto [og, part] = decompose(g, 2, 6);
  const auto c = ClassConditionVector::one_hot(1, 2);

  ad::Tape tape;
  tape.backward(graph_log_likelihood(tape, gen, og, c));
  GradientBuffer grads;
  grads.add_tape(tape);
  double worst = 0.0;
  int nonzero = 0;
  for (auto& p : gen.params()) {
    const Matrix* gp = grads.find(p);
    const Matrix analytic = gp ? *gp : Matrix::Zero(p.value.rows(), p.value.cols());
    if (gp && gp->cwiseAbs().maxCoeff() > 0) ++nonzero;
    worst = std::max(worst, testing::worst_gradient_error(
                                [&] { return graph_log_likelihood(gen, og, c); }, p.value, analytic));
  }
  CHECK(worst < 1e-4);
  CHECK(nonzero > 10);
}
