#include <doctest.h>

#include <map>

#include "core/ensemble.hpp"
#include "core/error.hpp"
#include "support.hpp"

using namespace zslb;

namespace {

// Hand-built set; scores are filled so that each row's argmax is `predicted`.
BasePredictionSet hand_set(std::vector<ClassId> cands, std::vector<std::vector<ClassId>> predicted,
                           std::vector<std::vector<double>> confidence, std::vector<std::vector<double>> margin) {
  BasePredictionSet s;
  s.candidates = std::move(cands);
  const std::size_t rows = predicted.front().size();
  for (std::size_t k = 0; k < predicted.size(); ++k) {
    s.classifiers.push_back("c" + std::to_string(k));
    Eigen::MatrixXd sc = Eigen::MatrixXd::Zero(Eigen::Index(rows), Eigen::Index(s.candidates.size()));
    Eigen::VectorXd cf(static_cast<Eigen::Index>(rows)), mg(static_cast<Eigen::Index>(rows));
    for (std::size_t r = 0; r < rows; ++r) {
      const auto j = std::find(s.candidates.begin(), s.candidates.end(), predicted[k][r]) - s.candidates.begin();
      sc(Eigen::Index(r), j) = 1.0;
      cf(Eigen::Index(r)) = confidence[k][r];
      mg(Eigen::Index(r)) = margin[k][r];
    }
    s.scores.push_back(sc);
    s.confidence.push_back(cf);
    s.margin.push_back(mg);
  }
  s.predicted = std::move(predicted);
  return s;
}

BasePredictionSet random_set(Rng& rng, std::size_t k, std::size_t rows, std::size_t c) {
  std::vector<ScoreMatrix> raw(k);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < c; ++j) raw[i].candidates.push_back(static_cast<ClassId>(j + 1));
    raw[i].values = test::random_matrix(rng, Eigen::Index(rows), Eigen::Index(c));
    // Coarse values so that ties actually occur.
    raw[i].values = (raw[i].values * 2.0).array().round().matrix();
    names.push_back("c" + std::to_string(i));
  }
  return build_prediction_set(names, raw);
}

std::vector<ClassId> random_labels(Rng& rng, std::size_t n, std::size_t c) {
  std::vector<ClassId> l(n);
  for (auto& v : l) v = static_cast<ClassId>(rng.index(c) + 1);
  return l;
}

ClassId oracle_vote(const BasePredictionSet& s, std::size_t r) {
  std::map<ClassId, std::pair<int, double>> tally;
  for (std::size_t k = 0; k < s.size(); ++k) {
    auto& t = tally[s.predicted[k][r]];
    t.first += 1;
    t.second += s.confidence[k](Eigen::Index(r));
  }
  ClassId best = 0;
  std::pair<int, double> bt{-1, 0.0};
  for (const auto& [label, t] : tally) {
    if (t.first > bt.first || (t.first == bt.first && t.second > bt.second)) {
      best = label;
      bt = t;
    }
  }
  return best;
}

ClassId oracle_bid(const BasePredictionSet& s, std::size_t r) {
  std::size_t win = 0;
  for (std::size_t k = 1; k < s.size(); ++k) {
    const double c = s.confidence[k](Eigen::Index(r)), cw = s.confidence[win](Eigen::Index(r));
    const double m = s.margin[k](Eigen::Index(r)), mw = s.margin[win](Eigen::Index(r));
    if (c > cw || (c == cw && m > mw)) win = k;
  }
  return s.predicted[win][r];
}

Eigen::RowVectorXd softmax(const Eigen::RowVectorXd& v) {
  Eigen::RowVectorXd e = (v.array() - v.maxCoeff()).exp();
  return e / e.sum();
}

}  // namespace

TEST_CASE("prediction set: normalization, confidence and margin ranges") {
  Rng rng(3);
  const auto s = random_set(rng, 4, 50, 6);
  for (std::size_t k = 0; k < s.size(); ++k) {
    CHECK(s.scores[k].minCoeff() >= 0.0);
    CHECK(s.scores[k].maxCoeff() <= 1.0);
    CHECK(s.confidence[k].minCoeff() >= 0.0);
    CHECK(s.confidence[k].maxCoeff() <= 1.0);
    CHECK(s.margin[k].minCoeff() >= 0.0);
  }
  std::vector<ScoreMatrix> bad(2);
  bad[0].candidates = {1, 2};
  bad[0].values = Eigen::MatrixXd::Zero(3, 2);
  bad[1].candidates = {1, 3};
  bad[1].values = Eigen::MatrixXd::Zero(3, 2);
  CHECK_THROWS_AS(build_prediction_set({"a", "b"}, bad), Error);
}

TEST_CASE("majority vote: plurality and the confidence tie rule") {
  const auto s = hand_set({1, 2, 3}, {{1, 1}, {1, 1}, {1, 2}, {2, 2}, {2, 3}},
                          {{0.5, 0.5}, {0.6, 0.6}, {0.2, 0.7}, {0.9, 0.7}, {0.5, 0.9}},
                          {{0, 0}, {0, 0}, {0, 0}, {0, 0}, {0, 0}});
  // Row 0: (a,a,a,b,b) -> a. Row 1: (a,a,b,b,c), a sums 1.1, b sums 1.4 -> b.
  const auto fused = fuse_majority(s);
  CHECK(fused[0] == 1);
  CHECK(fused[1] == 2);

  const auto tie = hand_set({1, 2}, {{2}, {1}}, {{0.5}, {0.5}}, {{0}, {0}});
  CHECK(fuse_majority(tie)[0] == 1);
}

TEST_CASE("majority vote with one classifier is the identity") {
  Rng rng(8);
  const auto s = random_set(rng, 1, 100, 5);
  CHECK(fuse_majority(s) == s.predicted[0]);
}

TEST_CASE("auction: highest bid, then margin, then lowest index") {
  const auto s = hand_set({1, 2, 3, 4, 5}, {{1, 1}, {2, 2}, {3, 3}, {4, 4}, {5, 5}},
                          {{0.9, 0.9}, {0.7, 0.9}, {0.5, 0.2}, {0.3, 0.3}, {0.2, 0.1}},
                          {{0.2, 0.1}, {0.1, 0.4}, {0, 0}, {0, 0}, {0, 0}});
  const auto fused = fuse_auction(s);
  CHECK(fused[0] == 1);
  CHECK(fused[1] == 2);
  const auto same = hand_set({1, 2}, {{2}, {1}}, {{0.5}, {0.5}}, {{0.1}, {0.1}});
  CHECK(fuse_auction(same)[0] == 2);
}

TEST_CASE("consensus: identical rows, opposite rows, arithmetic mean") {
  const auto opposite = hand_set({1, 2}, {{1}, {2}}, {{1}, {1}}, {{1}, {1}});
  const Eigen::MatrixXd d = consensus_distributions(opposite);
  CHECK(d(0, 0) == doctest::Approx(0.5));
  CHECK(d(0, 1) == doctest::Approx(0.5));
  CHECK(fuse_consensus(opposite)[0] == 1);

  Rng rng(4);
  const auto one = random_set(rng, 1, 10, 4);
  BasePredictionSet twin = one;
  twin.classifiers.push_back("twin");
  twin.scores.push_back(one.scores[0]);
  twin.predicted.push_back(one.predicted[0]);
  twin.confidence.push_back(one.confidence[0]);
  twin.margin.push_back(one.margin[0]);
  const Eigen::MatrixXd dt = consensus_distributions(twin);
  for (Eigen::Index r = 0; r < 10; ++r) CHECK((dt.row(r) - softmax(one.scores[0].row(r))).norm() < 1e-12);

  const auto s = random_set(rng, 5, 30, 6);
  const Eigen::MatrixXd dc = consensus_distributions(s);
  for (Eigen::Index r = 0; r < 30; ++r) {
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(6);
    for (std::size_t k = 0; k < 5; ++k) mean += softmax(s.scores[k].row(r)) / 5.0;
    CHECK((dc.row(r) - mean).cwiseAbs().maxCoeff() < 1e-12);
  }

  BasePredictionSet rev = s;
  std::reverse(rev.classifiers.begin(), rev.classifiers.end());
  std::reverse(rev.scores.begin(), rev.scores.end());
  std::reverse(rev.predicted.begin(), rev.predicted.end());
  std::reverse(rev.confidence.begin(), rev.confidence.end());
  std::reverse(rev.margin.begin(), rev.margin.end());
  CHECK(fuse_consensus(rev) == fuse_consensus(s));
}

TEST_CASE("consensus reports exhaustion") {
  Rng rng(4);
  const auto s = random_set(rng, 3, 5, 4);
  try {
    fuse_consensus(s, {1e-9, 0});
    FAIL("expected no consensus");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNoConsensus);
  }
}

TEST_CASE("MV, Auc, Con equal brute-force oracles on random sets") {
  Rng rng(1000);
  const auto s = random_set(rng, 5, 1000, 3);
  const auto mv = fuse_majority(s);
  const auto auc = fuse_auction(s);
  const auto con = fuse_consensus(s);
  const Eigen::MatrixXd dist = consensus_distributions(s);
  for (std::size_t r = 0; r < 1000; ++r) {
    CHECK(mv[r] == oracle_vote(s, r));
    CHECK(auc[r] == oracle_bid(s, r));
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(3);
    for (std::size_t k = 0; k < 5; ++k) mean += softmax(s.scores[k].row(Eigen::Index(r))) / 5.0;
    CHECK((dist.row(Eigen::Index(r)) - mean).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::Index best = 0;
    while (mean(best) < mean.maxCoeff() - 1e-12) ++best;
    CHECK(con[r] == s.candidates[std::size_t(best)]);
  }
}

TEST_CASE("MDT: a perfect classifier collapses the tree to one leaf") {
  Rng rng(12);
  auto s = random_set(rng, 3, 80, 4);
  const std::vector<ClassId> labels = s.predicted[2];
  const FusionModel m = train_mdt(s, labels);
  REQUIRE(m.tree.size() == 1);
  CHECK(m.tree[0].classifier == 2);
  CHECK(fuse_mdt(m, s) == labels);
}

TEST_CASE("MDT: depth-1 split recovers disjoint confidence ranges") {
  const std::size_t n = 64;
  std::vector<std::vector<ClassId>> pred(2, std::vector<ClassId>(n));
  std::vector<std::vector<double>> conf(2, std::vector<double>(n, 0.3)), marg(2, std::vector<double>(n, 0.1));
  std::vector<ClassId> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = 1 + ClassId(i % 2);
    const ClassId wrong = 3 - labels[i];
    conf[0][i] = (double(i) + 0.5) / double(n);
    const bool high = conf[0][i] > 0.5;
    pred[0][i] = high ? labels[i] : wrong;
    pred[1][i] = high ? wrong : labels[i];
  }
  const auto s = hand_set({1, 2}, pred, conf, marg);
  const FusionModel m = train_mdt(s, labels);
  REQUIRE(m.tree.size() == 3);
  const MdtNode& root = m.tree[0];
  CHECK(root.feature == 0);
  CHECK(root.threshold >= conf[0][n / 2 - 1]);
  CHECK(root.threshold < conf[0][n / 2]);
  CHECK(m.tree[std::size_t(root.left)].classifier == 1);
  CHECK(m.tree[std::size_t(root.right)].classifier == 0);
  CHECK(fuse_mdt(m, s) == labels);
}

TEST_CASE("MDT: constant meta-features give a root leaf with the best classifier") {
  const auto s = hand_set({1, 2}, {{1, 1, 2, 2}, {2, 1, 1, 1}}, {{0.5, 0.5, 0.5, 0.5}, {0.5, 0.5, 0.5, 0.5}},
                          {{0, 0, 0, 0}, {0, 0, 0, 0}});
  const FusionModel m = train_mdt(s, std::vector<ClassId>{1, 2, 2, 2}, {8, 1});
  REQUIRE(m.tree.size() == 1);
  CHECK(m.tree[0].classifier == 0);
  const auto single = hand_set({1, 2}, {{1}}, {{0.5}}, {{0}});
  CHECK(train_mdt(single, std::vector<ClassId>{2}).tree.size() == 1);
}

TEST_CASE("DNN fits a copy of a perfect classifier; lr = 0 keeps the seeded start") {
  Rng rng(21);
  const std::size_t n = 40;
  std::vector<ScoreMatrix> raw(2);
  std::vector<ClassId> labels = random_labels(rng, n, 2);
  for (auto& m : raw) {
    m.candidates = {1, 2};
    m.values = Eigen::MatrixXd::Zero(Eigen::Index(n), 2);
  }
  for (std::size_t i = 0; i < n; ++i) raw[0].values(Eigen::Index(i), labels[i] - 1) = 1.0;
  const auto s = build_prediction_set({"perfect", "zero"}, raw);

  DnnConfig cfg;
  cfg.seed = 5;
  cfg.epochs = 200;
  const FusionModel m = train_dnn(s, labels, cfg);
  CHECK(dnn_mse(m, s, labels) < 1e-3);
  CHECK(fuse_dnn(m, s) == labels);
  CHECK(fuse_dnn(train_dnn(s, labels, cfg), s) == fuse_dnn(m, s));
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    DnnConfig other = cfg;
    other.seed = seed;
    CHECK(dnn_mse(train_dnn(s, labels, other), s, labels) < 1e-3);
  }

  cfg.learning_rate = 0.0;
  const FusionModel frozen = train_dnn(s, labels, cfg);
  const DnnLayers init = dnn_initial_layers(2, cfg);
  CHECK(frozen.dnn.w1 == init.w1);
  CHECK(frozen.dnn.w2 == init.w2);
  CHECK(frozen.dnn.w3 == init.w3);
  CHECK(frozen.dnn.b1 == init.b1);
  CHECK(frozen.dnn.b3 == init.b3);
}

TEST_CASE("DNN reports divergence") {
  Rng rng(2);
  const auto s = random_set(rng, 3, 30, 3);
  DnnConfig cfg;
  cfg.learning_rate = 1e200;
  cfg.seed = 1;
  try {
    train_dnn(s, random_labels(rng, 30, 3), cfg);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDiverged);
  }
}

TEST_CASE("GT: the always-right player takes the weight") {
  const std::size_t n = 20;
  std::vector<ClassId> labels(n);
  std::vector<std::vector<ClassId>> pred(3, std::vector<ClassId>(n));
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = 1 + ClassId(i % 2);
    pred[0][i] = 3 - labels[i];
    pred[1][i] = labels[i];
    pred[2][i] = 3 - labels[i];
  }
  const std::vector<std::vector<double>> c(3, std::vector<double>(n, 0.5));
  const auto s = hand_set({1, 2}, pred, c, c);
  const FusionModel m = train_game(s, labels, {10, 0.5});
  CHECK(m.weights(1) > 0.9);
  CHECK(m.weights.sum() == doctest::Approx(1.0));
  CHECK(fuse_game(m, s) == labels);

  const auto same = hand_set({1, 2}, {pred[1], pred[1], pred[1]}, c, c);
  const FusionModel sym = train_game(same, labels, {10, 0.5});
  for (int k = 0; k < 3; ++k) CHECK(sym.weights(k) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(train_game(s, labels, {0, 0.5}), Error);
}

TEST_CASE("MV, MDT and DNN never beat the ceiling") {
  Rng rng(55);
  for (int trial = 0; trial < 5; ++trial) {
    const auto fit = random_set(rng, 5, 120, 4);
    const auto fit_labels = random_labels(rng, 120, 4);
    const auto test = random_set(rng, 5, 200, 4);
    const auto labels = random_labels(rng, 200, 4);
    for (Scheme sc : {Scheme::kMV, Scheme::kMDT, Scheme::kDNN}) {
      const FusionModel m = fit_fusion(sc, fit, fit_labels, {}, 7);
      const auto fused = apply_fusion(m, test);
      for (std::size_t r = 0; r < 200; ++r) {
        if (fused[r] != labels[r]) continue;
        bool any = false;
        for (std::size_t k = 0; k < 5; ++k) any = any || test.predicted[k][r] == labels[r];
        CHECK(any);
      }
    }
  }
}

TEST_CASE("ceiling is 100 minus level 0") {
  CHECK(ceiling(std::vector<double>{36.37, 25.76, 15.75, 11.75, 9.53, 0.85}) == doctest::Approx(63.63));
  CHECK(ceiling(std::vector<double>{0, 0, 0, 0, 0, 100}) == 100.0);
}

TEST_CASE("fusion files round-trip for every scheme") {
  test::TempDir dir("fusion");
  Rng rng(66);
  const auto fit = random_set(rng, 4, 150, 5);
  const auto labels = random_labels(rng, 150, 5);
  const auto test = random_set(rng, 4, 60, 5);
  for (Scheme sc : kAllSchemes) {
    const FusionModel m = fit_fusion(sc, fit, labels, {}, 9);
    const auto path = dir / (std::string(scheme_name(sc)) + ".fusion");
    save_fusion(m, path);
    const FusionModel back = load_fusion(path);
    CHECK(back.scheme == sc);
    CHECK(back.classifiers == m.classifiers);
    CHECK(back.seed == 9);
    CHECK(apply_fusion(back, test) == apply_fusion(m, test));
    if (sc == Scheme::kDNN) CHECK(back.dnn.w2 == m.dnn.w2);
    if (sc == Scheme::kGT) CHECK(back.weights == m.weights);
  }
  CHECK(parse_scheme("auc") == Scheme::kAuc);
  CHECK_FALSE(parse_scheme("stack").has_value());
}
