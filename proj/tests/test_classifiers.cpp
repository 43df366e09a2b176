#include "doctest.h"
#include "helpers.hpp"

#include "ccgg/classifiers.hpp"
#include "ccgg/errors.hpp"

using namespace ccgg;

namespace {

GraphClassifier small_classifier(std::uint64_t seed, int labels = 3) {
  return GraphClassifier(GraphClassifierConfig{2, labels, 8, 3}, seed);
}

double max_abs(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("graph classifier outputs") {
  const auto clf = small_classifier(1);
  Rng rng(2);

  SUBCASE("zero adjacency equals the edgeless graph") {
    Graph g = testing::random_graph(rng, 5, 5, 0.0, 3);
    const auto a = classify_graph(clf, Matrix::Zero(5, 5), one_hot_features(g, 3));
    const auto b = classify_graph(clf, g);
    CHECK(max_abs(a.normalized, b.normalized) < 1e-12);
    CHECK(a.normalized.sum() == doctest::Approx(1.0));
    CHECK((a.scores.array() >= 0).all());
    CHECK((a.scores.array() <= 1).all());
  }
  SUBCASE("binary adjacency reproduces the discrete path") {
    for (int trial = 0; trial < 20; ++trial) {
      Graph g = testing::random_graph(rng, 2, 10, 0.3, 3);
      const auto a = classify_graph(clf, testing::dense_adjacency(g), one_hot_features(g, 3));
      CHECK(max_abs(a.normalized, classify_graph(clf, g).normalized) < 1e-12);
    }
  }
  SUBCASE("permutation invariance") {
    for (int trial = 0; trial < 30; ++trial) {
      Graph g = testing::random_graph(rng, 2, 12, 0.35, 3);
      Graph h = testing::relabel(g, testing::random_permutation(g.num_nodes(), rng));
      const auto pg = classify_graph(clf, g);
      const auto ph = classify_graph(clf, h);
      CHECK(max_abs(pg.scores, ph.scores) < 1e-10);
    }
  }
  SUBCASE("invalid inputs") {
    Matrix a = Matrix::Zero(3, 3);
    a(0, 1) = 1.5;
    CHECK_THROWS_AS(classify_graph(clf, a, uniform_features(3, 3)), ArgumentError);
    a(0, 1) = -0.1;
    CHECK_THROWS_AS(classify_graph(clf, a, uniform_features(3, 3)), ArgumentError);
    CHECK_THROWS_AS(classify_graph(clf, Matrix::Zero(3, 3), uniform_features(3, 2)), ArgumentError);
    CHECK_THROWS_AS(one_hot_features(Graph(2, {}, {0, 5}, 0), 3), ArgumentError);
  }
}

TEST_CASE("classifier gradient with respect to a relaxed adjacency") {
  const auto clf = small_classifier(3);
  Rng rng(4);
  const int n = 6;
  Matrix adj = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) adj(i, j) = adj(j, i) = rng.uniform(0.1, 0.9);
  }
  const Matrix feats = uniform_features(n, 3);
  auto f = [&](ad::Tape& t, const Matrix& a) {
    return classification_cross_entropy(classify_graph(t, clf, t.constant(a), feats), 1);
  };
  ad::Tape tape;
  auto av = tape.variable(adj);
  tape.backward(classification_cross_entropy(classify_graph(tape, clf, av, feats), 1));
  const Matrix g = tape.grad(av);
  CHECK(g.cwiseAbs().maxCoeff() > 0);
  Matrix probe = adj;
  const double worst = testing::worst_gradient_error(
      [&] {
        ad::Tape t(false);
        return f(t, probe).scalar();
      },
      probe, g);
  CHECK(worst < 1e-5);
}

TEST_CASE("classifier training on the toy corpus") {
  const auto corpus = synthesize_toy_corpus(200, {6, 12}, 5);
  const auto split = stratified_split(corpus, 6);
  ClassifierTrainConfig cfg;
  cfg.epochs = 30;
  cfg.seed = 7;
  const auto result = train_graph_classifier(split, 2, kToyNodeLabels, cfg);
  CHECK(classifier_accuracy(result.classifier, split.test) >= 0.9);
  CHECK(result.validation_accuracy.size() == 30);
  CHECK(result.best_validation_accuracy ==
        doctest::Approx(classifier_accuracy(result.classifier, split.validation)));

  // Same seed, same parameters.
  const auto again = train_graph_classifier(split, 2, kToyNodeLabels, cfg);
  for (const auto& p : result.classifier.params()) {
    CHECK(again.classifier.params().at(p.name).value == p.value);
  }
}

TEST_CASE("classifier trained on shuffled labels is at chance") {
  auto corpus = synthesize_toy_corpus(200, {6, 12}, 8);
  Rng rng(9);
  std::vector<int> labels;
  for (const auto& g : corpus) labels.push_back(g.class_label());
  rng.shuffle(labels.begin(), labels.end());
  DatasetSplit split;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    (i % 5 == 0 ? split.validation : split.train).push_back(corpus[i].with_class(labels[i]));
  }
  ClassifierTrainConfig cfg;
  cfg.epochs = 15;
  cfg.seed = 10;
  const auto result = train_graph_classifier(split, 2, kToyNodeLabels, cfg);
  const auto fresh = synthesize_toy_corpus(400, {6, 12}, 11);
  CHECK(std::abs(classifier_accuracy(result.classifier, fresh) - 0.5) <= 0.1);
}

TEST_CASE("classifier training needs two classes") {
  DatasetSplit split;
  split.train = {Graph::unlabeled(2, {{0, 1}}, 0), Graph::unlabeled(3, {}, 0)};
  CHECK_THROWS_AS(train_graph_classifier(split, 2, 1, ClassifierTrainConfig{}), TrainingError);
}

TEST_CASE("node classifier") {
  NodeClassifier clf(NodeClassifierConfig{6, 16, 3}, 12);
  Rng rng(13);
  Matrix states(5, 6);
  for (Eigen::Index i = 0; i < states.size(); ++i) states.data()[i] = rng.uniform(-1, 1);

  SUBCASE("rows are distributions") {
    const Matrix p = classify_nodes(clf, states);
    CHECK(p.rows() == 5);
    CHECK(p.cols() == 3);
    for (Eigen::Index r = 0; r < p.rows(); ++r) CHECK(p.row(r).sum() == doctest::Approx(1.0));
  }
  SUBCASE("zero weights give uniform rows") {
    NodeClassifier z(NodeClassifierConfig{6, 16, 3}, 14);
    for (auto& p : z.params()) p.value.setZero();
    const Matrix p = classify_nodes(z, states);
    CHECK((p.array() - 1.0 / 3.0).abs().maxCoeff() < 1e-12);
  }
  SUBCASE("identical states give identical rows; row order is equivariant") {
    states.row(3) = states.row(1);
    const Matrix p = classify_nodes(clf, states);
    CHECK(p.row(3) == p.row(1));
    const auto perm = testing::random_permutation(5, rng);
    Matrix shuffled(5, 6);
    for (int v = 0; v < 5; ++v) shuffled.row(perm[v]) = states.row(v);
    const Matrix q = classify_nodes(clf, shuffled);
    for (int v = 0; v < 5; ++v) CHECK((q.row(perm[v]) - p.row(v)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("width mismatch") {
    CHECK_THROWS_AS(classify_nodes(clf, Matrix::Zero(2, 5)), ArgumentError);
  }
}
