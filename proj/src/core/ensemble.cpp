#include "core/ensemble.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "core/binary_io.hpp"
#include "core/error.hpp"
#include "core/rng.hpp"

namespace zslb {

using nlohmann::json;

const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::kMV: return "MV";
    case Scheme::kMDT: return "MDT";
    case Scheme::kDNN: return "DNN";
    case Scheme::kGT: return "GT";
    case Scheme::kCon: return "Con";
    case Scheme::kAuc: return "Auc";
  }
  return "?";
}

std::optional<Scheme> parse_scheme(std::string_view name) {
  for (Scheme s : kAllSchemes) {
    std::string_view ref = scheme_name(s);
    if (ref.size() == name.size() &&
        std::equal(ref.begin(), ref.end(), name.begin(), [](char a, char b) {
          return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
        })) {
      return s;
    }
  }
  return std::nullopt;
}

bool is_parametric(Scheme s) { return s == Scheme::kMDT || s == Scheme::kDNN || s == Scheme::kGT; }

// ---------------------------------------------------------------- prediction set

BasePredictionSet build_prediction_set(std::vector<std::string> names, std::span<const ScoreMatrix> raw) {
  if (raw.empty()) throw Error(ErrorCode::kInvalidArgument, "prediction set needs at least one classifier");
  if (names.size() != raw.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "prediction set: " + std::to_string(names.size()) + " names for " +
                                                   std::to_string(raw.size()) + " score matrices");
  }
  BasePredictionSet set;
  set.classifiers = std::move(names);
  set.candidates = raw.front().candidates;
  if (set.candidates.empty()) throw Error(ErrorCode::kInvalidArgument, "prediction set: no candidates");
  const auto rows = raw.front().values.rows();
  const auto cols = static_cast<Eigen::Index>(set.candidates.size());
  for (const ScoreMatrix& m : raw) {
    if (m.candidates != set.candidates || m.values.rows() != rows || m.values.cols() != cols) {
      throw Error(ErrorCode::kDimensionMismatch, "prediction set: score matrices are not aligned");
    }
    if (!m.values.allFinite()) throw Error(ErrorCode::kInvalidArgument, "prediction set: non-finite scores");

    Eigen::MatrixXd norm(rows, cols);
    std::vector<ClassId> pred(static_cast<std::size_t>(rows));
    Eigen::VectorXd conf(rows), marg(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double lo = m.values.row(r).minCoeff();
      const double hi = m.values.row(r).maxCoeff();
      if (hi > lo) {
        norm.row(r) = (m.values.row(r).array() - lo) / (hi - lo);
      } else {
        norm.row(r).setZero();
      }
      const std::size_t best = argmax_lowest_id(m.values.row(r).transpose(), set.candidates);
      pred[static_cast<std::size_t>(r)] = set.candidates[best];
      const double top = norm(r, static_cast<Eigen::Index>(best));
      double second = 0.0;
      bool have_second = false;
      for (Eigen::Index c = 0; c < cols; ++c) {
        if (c == static_cast<Eigen::Index>(best)) continue;
        if (!have_second || norm(r, c) > second) second = norm(r, c);
        have_second = true;
      }
      const double mass = norm.row(r).sum();
      conf(r) = mass > 0.0 ? top / mass : 0.0;
      marg(r) = have_second ? top - second : 0.0;
    }
    set.scores.push_back(std::move(norm));
    set.predicted.push_back(std::move(pred));
    set.confidence.push_back(std::move(conf));
    set.margin.push_back(std::move(marg));
  }
  return set;
}

namespace {

void check_labels(const BasePredictionSet& preds, std::span<const ClassId> labels) {
  if (preds.rows() == 0) throw Error(ErrorCode::kInvalidArgument, "fusion fit set is empty");
  if (labels.size() != preds.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "fusion: " + std::to_string(labels.size()) + " labels for " +
                                                   std::to_string(preds.rows()) + " instances");
  }
}

void check_model_fits(const FusionModel& model, const BasePredictionSet& preds) {
  if (model.k() != preds.size()) {
    throw Error(ErrorCode::kDimensionMismatch, std::string(scheme_name(model.scheme)) + " model fitted on " +
                                                   std::to_string(model.k()) + " classifiers, got " +
                                                   std::to_string(preds.size()));
  }
}

}  // namespace

// ---------------------------------------------------------------- voting

ClassId weighted_plurality(const BasePredictionSet& preds, std::size_t row, std::span<const double> weights) {
  struct Tally {
    double votes = 0.0;
    double confidence = 0.0;
  };
  std::map<ClassId, Tally> tally;  // id order gives the final tie rule
  for (std::size_t k = 0; k < preds.size(); ++k) {
    Tally& t = tally[preds.predicted[k][row]];
    t.votes += weights[k];
    t.confidence += preds.confidence[k](static_cast<Eigen::Index>(row));
  }
  auto best = tally.begin();
  for (auto it = std::next(tally.begin()); it != tally.end(); ++it) {
    const Tally& a = it->second;
    const Tally& b = best->second;
    if (a.votes > b.votes || (a.votes == b.votes && a.confidence > b.confidence)) best = it;
  }
  return best->first;
}

std::vector<ClassId> fuse_majority(const BasePredictionSet& preds) {
  const std::vector<double> ones(preds.size(), 1.0);
  std::vector<ClassId> out(preds.rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = weighted_plurality(preds, i, ones);
  return out;
}

// ---------------------------------------------------------------- MDT

namespace {

double meta_feature(const BasePredictionSet& preds, std::size_t feature, std::size_t row) {
  const std::size_t k = preds.size();
  const auto r = static_cast<Eigen::Index>(row);
  return feature < k ? preds.confidence[feature](r) : preds.margin[feature - k](r);
}

struct MdtBuilder {
  const BasePredictionSet& preds;
  const std::vector<std::vector<char>>& correct;  // [k][row]
  const MdtConfig& cfg;
  std::vector<MdtNode> nodes;

  // Best classifier for a node: most correct instances, ties to the lowest index.
  std::pair<std::size_t, std::size_t> best_leaf(const std::vector<std::size_t>& counts) const {
    std::size_t best = 0;
    for (std::size_t k = 1; k < counts.size(); ++k) {
      if (counts[k] > counts[best]) best = k;
    }
    return {best, counts[best]};
  }

  int grow(std::vector<std::size_t> rows, std::size_t depth) {
    const std::size_t k = preds.size();
    std::vector<std::size_t> totals(k, 0);
    for (std::size_t r : rows) {
      for (std::size_t c = 0; c < k; ++c) totals[c] += correct[c][r] ? 1 : 0;
    }
    const auto [leaf_clf, leaf_hits] = best_leaf(totals);
    const int id = static_cast<int>(nodes.size());
    nodes.push_back(MdtNode{-1, 0.0, -1, -1, leaf_clf});
    if (depth >= cfg.max_depth || rows.size() < 2 * std::max<std::size_t>(cfg.min_leaf, 1)) return id;

    std::size_t best_gain = 0;
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::size_t> order = rows;
    std::vector<std::size_t> left(k);
    for (std::size_t f = 0; f < 2 * k; ++f) {
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return meta_feature(preds, f, a) < meta_feature(preds, f, b);
      });
      std::fill(left.begin(), left.end(), 0);
      for (std::size_t p = 0; p + 1 < order.size(); ++p) {
        for (std::size_t c = 0; c < k; ++c) left[c] += correct[c][order[p]] ? 1 : 0;
        const double v = meta_feature(preds, f, order[p]);
        const double next = meta_feature(preds, f, order[p + 1]);
        if (!(v < next)) continue;
        const std::size_t n_left = p + 1, n_right = order.size() - n_left;
        if (n_left < cfg.min_leaf || n_right < cfg.min_leaf) continue;
        std::size_t lb = 0, rb = 0;
        for (std::size_t c = 0; c < k; ++c) {
          lb = std::max(lb, left[c]);
          rb = std::max(rb, totals[c] - left[c]);
        }
        const std::size_t hits = lb + rb;
        if (hits > leaf_hits && hits - leaf_hits > best_gain) {
          best_gain = hits - leaf_hits;
          best_feature = static_cast<int>(f);
          double mid = v + (next - v) / 2.0;
          if (!(mid < next)) mid = v;
          best_threshold = mid;
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> lrows, rrows;
    for (std::size_t r : rows) {
      (meta_feature(preds, static_cast<std::size_t>(best_feature), r) <= best_threshold ? lrows : rrows).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(std::move(lrows), depth + 1);
    const int r = grow(std::move(rrows), depth + 1);
    nodes[static_cast<std::size_t>(id)].feature = best_feature;
    nodes[static_cast<std::size_t>(id)].threshold = best_threshold;
    nodes[static_cast<std::size_t>(id)].left = l;
    nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  }
};

std::vector<std::vector<char>> correctness(const BasePredictionSet& preds, std::span<const ClassId> labels) {
  std::vector<std::vector<char>> out(preds.size(), std::vector<char>(labels.size()));
  for (std::size_t k = 0; k < preds.size(); ++k) {
    for (std::size_t i = 0; i < labels.size(); ++i) out[k][i] = preds.predicted[k][i] == labels[i];
  }
  return out;
}

FusionModel model_shell(Scheme scheme, const BasePredictionSet& fit) {
  FusionModel m;
  m.scheme = scheme;
  m.classifiers = fit.classifiers;
  m.candidates = fit.candidates;
  return m;
}

}  // namespace

FusionModel train_mdt(const BasePredictionSet& fit, std::span<const ClassId> labels, const MdtConfig& cfg) {
  check_labels(fit, labels);
  const auto correct = correctness(fit, labels);
  MdtBuilder builder{fit, correct, cfg, {}};
  std::vector<std::size_t> rows(fit.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  builder.grow(std::move(rows), 0);
  FusionModel m = model_shell(Scheme::kMDT, fit);
  m.config.mdt = cfg;
  m.tree = std::move(builder.nodes);
  return m;
}

std::vector<ClassId> fuse_mdt(const FusionModel& model, const BasePredictionSet& preds) {
  check_model_fits(model, preds);
  if (model.tree.empty()) throw Error(ErrorCode::kInvalidArgument, "MDT model has no tree");
  std::vector<ClassId> out(preds.rows());
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::size_t n = 0;
    while (model.tree[n].feature >= 0) {
      const MdtNode& node = model.tree[n];
      n = static_cast<std::size_t>(meta_feature(preds, static_cast<std::size_t>(node.feature), i) <= node.threshold
                                       ? node.left
                                       : node.right);
    }
    out[i] = preds.predicted[model.tree[n].classifier][i];
  }
  return out;
}

// ---------------------------------------------------------------- DNN

namespace {

struct Forward {
  Eigen::VectorXd z1, h1, z2, h2;
  double z3 = 0.0, out = 0.0;
};

Forward forward(const DnnLayers& net, const Eigen::VectorXd& u) {
  Forward f;
  f.z1 = net.w1 * u + net.b1;
  f.h1 = f.z1.cwiseMax(0.0);
  f.z2 = net.w2 * f.h1 + net.b2;
  f.h2 = f.z2.cwiseMax(0.0);
  f.z3 = net.w3.dot(f.h2) + net.b3;
  f.out = std::max(f.z3, 0.0);
  return f;
}

Eigen::VectorXd class_input(const BasePredictionSet& preds, std::size_t row, std::size_t col) {
  Eigen::VectorXd u(static_cast<Eigen::Index>(preds.size()));
  for (std::size_t k = 0; k < preds.size(); ++k) {
    u(static_cast<Eigen::Index>(k)) = preds.scores[k](static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
  }
  return u;
}

Eigen::MatrixXd uniform_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double bound) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
  }
  return m;
}

}  // namespace

DnnLayers dnn_initial_layers(std::size_t k, const DnnConfig& cfg) {
  if (k == 0 || cfg.hidden1 == 0 || cfg.hidden2 == 0) {
    throw Error(ErrorCode::kInvalidArgument, "DNN: layer sizes must be >= 1");
  }
  Rng rng = Rng::derive(cfg.seed, 0x444E4E);
  const auto h1 = static_cast<Eigen::Index>(cfg.hidden1), h2 = static_cast<Eigen::Index>(cfg.hidden2);
  DnnLayers net;
  net.w1 = uniform_matrix(rng, h1, static_cast<Eigen::Index>(k), std::sqrt(6.0 / static_cast<double>(k)));
  net.b1 = Eigen::VectorXd::Constant(h1, 0.01);
  net.w2 = uniform_matrix(rng, h2, h1, std::sqrt(6.0 / static_cast<double>(h1)));
  net.b2 = Eigen::VectorXd::Constant(h2, 0.01);
  // h2 >= 0, so nonnegative output weights with b3 > 0 start the output unit live on every input.
  net.w3 = uniform_matrix(rng, 1, h2, std::sqrt(6.0 / static_cast<double>(h2))).cwiseAbs();
  net.b3 = 0.1;
  return net;
}

FusionModel train_dnn(const BasePredictionSet& fit, std::span<const ClassId> labels, const DnnConfig& cfg) {
  check_labels(fit, labels);
  if (!std::isfinite(cfg.learning_rate) || cfg.learning_rate < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "DNN: learning rate must be finite and >= 0");
  }
  if (cfg.epochs == 0) throw Error(ErrorCode::kInvalidArgument, "DNN: epochs must be >= 1");
  FusionModel m = model_shell(Scheme::kDNN, fit);
  m.seed = cfg.seed;
  m.config.dnn = cfg;
  DnnLayers& net = m.dnn;
  net = dnn_initial_layers(fit.size(), cfg);

  const std::size_t c = fit.candidates.size();
  std::vector<std::size_t> target(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = std::find(fit.candidates.begin(), fit.candidates.end(), labels[i]);
    if (it == fit.candidates.end()) {
      throw Error(ErrorCode::kInvalidArgument, "DNN: label " + std::to_string(labels[i]) + " is not a candidate");
    }
    target[i] = static_cast<std::size_t>(it - fit.candidates.begin());
  }

  Rng order_rng = Rng::derive(cfg.seed, 0x4F52);
  std::vector<std::size_t> order(fit.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});

  DnnLayers grad = net;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order_rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t i : order) {
      grad.w1.setZero();
      grad.b1.setZero();
      grad.w2.setZero();
      grad.b2.setZero();
      grad.w3.setZero();
      grad.b3 = 0.0;
      for (std::size_t col = 0; col < c; ++col) {
        const Eigen::VectorXd u = class_input(fit, i, col);
        const Forward f = forward(net, u);
        const double t = col == target[i] ? 1.0 : 0.0;
        const double err = f.out - t;
        epoch_loss += err * err;
        // d(mean over classes of err^2) / d out
        const double d3 = f.z3 > 0.0 ? 2.0 * err / static_cast<double>(c) : 0.0;
        if (d3 == 0.0) continue;
        grad.w3 += d3 * f.h2.transpose();
        grad.b3 += d3;
        const Eigen::VectorXd d2 = (net.w3.transpose() * d3).cwiseProduct((f.z2.array() > 0.0).cast<double>().matrix());
        grad.w2 += d2 * f.h1.transpose();
        grad.b2 += d2;
        const Eigen::VectorXd d1 = (net.w2.transpose() * d2).cwiseProduct((f.z1.array() > 0.0).cast<double>().matrix());
        grad.w1 += d1 * u.transpose();
        grad.b1 += d1;
      }
      if (cfg.learning_rate > 0.0) {
        net.w1 -= cfg.learning_rate * grad.w1;
        net.b1 -= cfg.learning_rate * grad.b1;
        net.w2 -= cfg.learning_rate * grad.w2;
        net.b2 -= cfg.learning_rate * grad.b2;
        net.w3 -= cfg.learning_rate * grad.w3;
        net.b3 -= cfg.learning_rate * grad.b3;
      }
    }
    if (!std::isfinite(epoch_loss) || !net.w1.allFinite() || !net.w2.allFinite() || !net.w3.allFinite() ||
        !std::isfinite(net.b3)) {
      throw Error(ErrorCode::kDiverged, "DNN: non-finite loss in epoch " + std::to_string(epoch));
    }
  }
  return m;
}

Eigen::MatrixXd dnn_outputs(const FusionModel& model, const BasePredictionSet& preds) {
  check_model_fits(model, preds);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(preds.rows()), static_cast<Eigen::Index>(preds.candidates.size()));
  for (std::size_t i = 0; i < preds.rows(); ++i) {
    for (std::size_t c = 0; c < preds.candidates.size(); ++c) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = forward(model.dnn, class_input(preds, i, c)).out;
    }
  }
  return out;
}

double dnn_mse(const FusionModel& model, const BasePredictionSet& preds, std::span<const ClassId> labels) {
  check_labels(preds, labels);
  const Eigen::MatrixXd out = dnn_outputs(model, preds);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      const double t = preds.candidates[static_cast<std::size_t>(c)] == labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
      sum += (out(i, c) - t) * (out(i, c) - t);
    }
  }
  return sum / static_cast<double>(out.size());
}

std::vector<ClassId> fuse_dnn(const FusionModel& model, const BasePredictionSet& preds) {
  const Eigen::MatrixXd out = dnn_outputs(model, preds);
  std::vector<ClassId> labels(preds.rows());
  for (std::size_t i = 0; i < preds.rows(); ++i) {
    // Only labels some base classifier proposed are eligible.
    int best = -1;
    for (std::size_t c = 0; c < preds.candidates.size(); ++c) {
      const ClassId id = preds.candidates[c];
      bool proposed = false;
      for (std::size_t k = 0; k < preds.size() && !proposed; ++k) proposed = preds.predicted[k][i] == id;
      if (!proposed) continue;
      const double v = out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
      if (best < 0) {
        best = static_cast<int>(c);
        continue;
      }
      const double b = out(static_cast<Eigen::Index>(i), best);
      if (v > b || (v == b && id < preds.candidates[static_cast<std::size_t>(best)])) best = static_cast<int>(c);
    }
    labels[i] = preds.candidates[static_cast<std::size_t>(best)];
  }
  return labels;
}

// ---------------------------------------------------------------- GT

FusionModel train_game(const BasePredictionSet& fit, std::span<const ClassId> labels, const GtConfig& cfg) {
  check_labels(fit, labels);
  if (cfg.rounds < 1) throw Error(ErrorCode::kInvalidArgument, "GT: rounds must be >= 1");
  const std::size_t k = fit.size();
  const auto correct = correctness(fit, labels);
  Eigen::VectorXd payoff(static_cast<Eigen::Index>(k));
  for (std::size_t p = 0; p < k; ++p) {
    const double agree = static_cast<double>(std::count(correct[p].begin(), correct[p].end(), 1)) /
                         static_cast<double>(labels.size());
    payoff(static_cast<Eigen::Index>(p)) = agree - (1.0 - agree);
  }
  FusionModel m = model_shell(Scheme::kGT, fit);
  m.config.gt = cfg;
  m.weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(k), 1.0 / static_cast<double>(k));
  for (std::size_t round = 0; round < cfg.rounds; ++round) {
    m.weights = m.weights.cwiseProduct((1.0 + cfg.eta * payoff.array()).matrix());
    const double total = m.weights.sum();
    if (!(total > 0.0)) break;
    m.weights /= total;
  }
  return m;
}

std::vector<ClassId> fuse_game(const FusionModel& model, const BasePredictionSet& preds) {
  check_model_fits(model, preds);
  std::vector<double> w(model.weights.data(), model.weights.data() + model.weights.size());
  std::vector<ClassId> out(preds.rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = weighted_plurality(preds, i, w);
  return out;
}

// ---------------------------------------------------------------- Auc, Con

std::vector<ClassId> fuse_auction(const BasePredictionSet& preds) {
  std::vector<ClassId> out(preds.rows());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    std::size_t winner = 0;
    for (std::size_t k = 1; k < preds.size(); ++k) {
      const double bid = preds.confidence[k](r), top = preds.confidence[winner](r);
      if (bid > top || (bid == top && preds.margin[k](r) > preds.margin[winner](r))) winner = k;
    }
    out[i] = preds.predicted[winner][i];
  }
  return out;
}

Eigen::MatrixXd consensus_distributions(const BasePredictionSet& preds, const ConsensusConfig& cfg) {
  if (!(cfg.tolerance > 0.0)) throw Error(ErrorCode::kInvalidArgument, "Con: tolerance must be > 0");
  const std::size_t k = preds.size();
  const auto c = static_cast<Eigen::Index>(preds.candidates.size());
  Eigen::MatrixXd out(static_cast<Eigen::Index>(preds.rows()), c);
  std::vector<Eigen::RowVectorXd> dist(k);
  for (std::size_t i = 0; i < preds.rows(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (std::size_t p = 0; p < k; ++p) {
      const Eigen::RowVectorXd row = preds.scores[p].row(r);
      const Eigen::RowVectorXd e = (row.array() - row.maxCoeff()).exp();
      dist[p] = e / e.sum();
    }
    bool converged = false;
    for (std::size_t it = 0; it < cfg.max_iters && !converged; ++it) {
      Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(c);
      for (std::size_t p = 0; p < k; ++p) mean += dist[p];
      mean /= static_cast<double>(k);
      double change = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        change = std::max(change, (mean - dist[p]).cwiseAbs().sum());
        dist[p] = mean;
      }
      converged = change < cfg.tolerance;
    }
    if (!converged) {
      std::ostringstream last;
      for (Eigen::Index j = 0; j < c; ++j) last << (j ? " " : "") << dist[0](j);
      throw Error(ErrorCode::kNoConsensus, "instance " + std::to_string(i) + " after " +
                                               std::to_string(cfg.max_iters) + " iterations; last [" + last.str() + "]");
    }
    out.row(r) = dist[0];
  }
  return out;
}

constexpr double kConsensusTie = 1e-12;

std::vector<ClassId> fuse_consensus(const BasePredictionSet& preds, const ConsensusConfig& cfg) {
  const Eigen::MatrixXd dist = consensus_distributions(preds, cfg);
  std::vector<ClassId> out(preds.rows());
  for (std::size_t i = 0; i < out.size(); ++i) {
    // Averaged distributions that agree to rounding count as tied.
    const auto row = dist.row(static_cast<Eigen::Index>(i));
    const double top = row.maxCoeff();
    std::size_t best = preds.candidates.size();
    for (std::size_t j = 0; j < preds.candidates.size(); ++j) {
      if (row(static_cast<Eigen::Index>(j)) < top - kConsensusTie) continue;
      if (best == preds.candidates.size() || preds.candidates[j] < preds.candidates[best]) best = j;
    }
    out[i] = preds.candidates[best];
  }
  return out;
}

// ---------------------------------------------------------------- dispatch

FusionModel fit_fusion(Scheme scheme, const BasePredictionSet& fit, std::span<const ClassId> labels,
                       const FusionConfig& cfg, std::uint64_t seed) {
  FusionModel m;
  switch (scheme) {
    case Scheme::kMDT: m = train_mdt(fit, labels, cfg.mdt); break;
    case Scheme::kDNN: {
      DnnConfig d = cfg.dnn;
      d.seed = seed;
      m = train_dnn(fit, labels, d);
      break;
    }
    case Scheme::kGT: m = train_game(fit, labels, cfg.gt); break;
    default: m = model_shell(scheme, fit); break;
  }
  m.config = cfg;
  m.config.dnn.seed = seed;
  m.seed = seed;
  return m;
}

std::vector<ClassId> apply_fusion(const FusionModel& model, const BasePredictionSet& preds) {
  check_model_fits(model, preds);
  switch (model.scheme) {
    case Scheme::kMV: return fuse_majority(preds);
    case Scheme::kMDT: return fuse_mdt(model, preds);
    case Scheme::kDNN: return fuse_dnn(model, preds);
    case Scheme::kGT: return fuse_game(model, preds);
    case Scheme::kCon: return fuse_consensus(preds, model.config.con);
    case Scheme::kAuc: return fuse_auction(preds);
  }
  return {};
}

double ceiling(std::span<const double> levels) {
  if (levels.empty()) throw Error(ErrorCode::kInvalidArgument, "ceiling: no difficulty levels");
  return 100.0 - levels[0];
}

// ---------------------------------------------------------------- artifacts

namespace {

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_tree(const std::vector<MdtNode>& tree, std::size_t n, std::string& out) {
  const MdtNode& node = tree[n];
  if (node.feature < 0) {
    out += "(leaf " + std::to_string(node.classifier) + ")";
    return;
  }
  out += "(split " + std::to_string(node.feature) + " " + exact(node.threshold) + " " +
         std::to_string(node.classifier) + " ";
  write_tree(tree, static_cast<std::size_t>(node.left), out);
  out += " ";
  write_tree(tree, static_cast<std::size_t>(node.right), out);
  out += ")";
}

struct TreeParser {
  std::istringstream in;
  std::vector<MdtNode> nodes;

  [[noreturn]] void fail() { throw Error(ErrorCode::kMalformedBundle, "MDT payload is not a valid tree"); }

  void expect(char c) {
    char got = 0;
    if (!(in >> got) || got != c) fail();
  }

  int parse() {
    expect('(');
    std::string tag;
    if (!(in >> tag)) fail();
    const int id = static_cast<int>(nodes.size());
    nodes.emplace_back();
    if (tag == "leaf") {
      std::string rest;
      if (!std::getline(in, rest, ')')) fail();
      nodes[static_cast<std::size_t>(id)].classifier = std::stoul(rest);
      return id;
    }
    if (tag != "split") fail();
    MdtNode node;
    std::string thr;
    if (!(in >> node.feature >> thr >> node.classifier)) fail();
    node.threshold = std::strtod(thr.c_str(), nullptr);
    node.left = parse();
    node.right = parse();
    expect(')');
    nodes[static_cast<std::size_t>(id)] = node;
    return id;
  }
};

json config_json(const FusionConfig& c) {
  return json{{"mdt", {{"max_depth", c.mdt.max_depth}, {"min_leaf", c.mdt.min_leaf}}},
              {"dnn",
               {{"hidden1", c.dnn.hidden1},
                {"hidden2", c.dnn.hidden2},
                {"learning_rate", c.dnn.learning_rate},
                {"epochs", c.dnn.epochs},
                {"seed", c.dnn.seed}}},
              {"gt", {{"rounds", c.gt.rounds}, {"eta", c.gt.eta}}},
              {"con", {{"tolerance", c.con.tolerance}, {"max_iters", c.con.max_iters}}}};
}

FusionConfig config_from(const json& j) {
  FusionConfig c;
  const json& mdt = j.at("mdt");
  c.mdt.max_depth = mdt.at("max_depth");
  c.mdt.min_leaf = mdt.at("min_leaf");
  const json& dnn = j.at("dnn");
  c.dnn.hidden1 = dnn.at("hidden1");
  c.dnn.hidden2 = dnn.at("hidden2");
  c.dnn.learning_rate = dnn.at("learning_rate");
  c.dnn.epochs = dnn.at("epochs");
  c.dnn.seed = dnn.at("seed");
  c.gt.rounds = j.at("gt").at("rounds");
  c.gt.eta = j.at("gt").at("eta");
  c.con.tolerance = j.at("con").at("tolerance");
  c.con.max_iters = j.at("con").at("max_iters");
  return c;
}

void push_matrix(std::vector<double>& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  }
}

Eigen::MatrixXd take_matrix(const std::vector<double>& v, std::size_t& pos, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = v[pos++];
  }
  return m;
}

}  // namespace

void save_fusion(const FusionModel& model, const std::filesystem::path& path) {
  json h{{"format", "zslb-fusion/1"},
         {"scheme", scheme_name(model.scheme)},
         {"k", model.k()},
         {"classifiers", model.classifiers},
         {"candidates", model.candidates},
         {"seed", model.seed},
         {"config", config_json(model.config)}};
  std::string payload;
  switch (model.scheme) {
    case Scheme::kMDT:
      write_tree(model.tree, 0, payload);
      payload += "\n";
      break;
    case Scheme::kGT:
      for (Eigen::Index i = 0; i < model.weights.size(); ++i) payload += exact(model.weights(i)) + "\n";
      break;
    case Scheme::kDNN: {
      h["layers"] = {model.dnn.w1.rows(), model.dnn.w2.rows()};
      std::vector<double> v;
      push_matrix(v, model.dnn.w1);
      push_matrix(v, model.dnn.b1);
      push_matrix(v, model.dnn.w2);
      push_matrix(v, model.dnn.b2);
      push_matrix(v, model.dnn.w3);
      v.push_back(model.dnn.b3);
      payload = io::encode_f64(v);
      break;
    }
    default: break;
  }
  io::write_file(path, h.dump() + "\n" + payload);
}

FusionModel load_fusion(const std::filesystem::path& path) {
  const std::string bytes = io::read_file(path, ErrorCode::kIo);
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw Error(ErrorCode::kMalformedBundle, path.string() + ": no fusion header");
  FusionModel m;
  std::string payload = bytes.substr(nl + 1);
  try {
    const json h = json::parse(bytes.substr(0, nl));
    if (h.value("format", "") != "zslb-fusion/1") {
      throw Error(ErrorCode::kMalformedBundle, path.string() + ": not a fusion artifact");
    }
    const auto scheme = parse_scheme(h.at("scheme").get<std::string>());
    if (!scheme) throw Error(ErrorCode::kMalformedBundle, path.string() + ": unknown scheme");
    m.scheme = *scheme;
    m.classifiers = h.at("classifiers").get<std::vector<std::string>>();
    m.candidates = h.at("candidates").get<std::vector<ClassId>>();
    m.seed = h.at("seed");
    m.config = config_from(h.at("config"));
    const auto k = static_cast<Eigen::Index>(m.classifiers.size());
    if (m.scheme == Scheme::kDNN) {
      const auto h1 = h.at("layers").at(0).get<Eigen::Index>();
      const auto h2 = h.at("layers").at(1).get<Eigen::Index>();
      const auto expected = static_cast<std::size_t>(h1 * k + h1 + h2 * h1 + h2 + h2 + 1);
      if (payload.size() != expected * 8) throw Error(ErrorCode::kCorruptPayload, path.string() + ": DNN payload size");
      const auto v = io::decode_f64(payload);
      std::size_t pos = 0;
      m.dnn.w1 = take_matrix(v, pos, h1, k);
      m.dnn.b1 = take_matrix(v, pos, h1, 1);
      m.dnn.w2 = take_matrix(v, pos, h2, h1);
      m.dnn.b2 = take_matrix(v, pos, h2, 1);
      m.dnn.w3 = take_matrix(v, pos, 1, h2);
      m.dnn.b3 = v[pos];
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedBundle, path.string() + ": " + e.what());
  }
  if (m.scheme == Scheme::kMDT) {
    TreeParser p{std::istringstream(payload), {}};
    p.parse();
    m.tree = std::move(p.nodes);
    for (const MdtNode& n : m.tree) {
      if (n.classifier >= m.k()) throw Error(ErrorCode::kCorruptPayload, path.string() + ": leaf names classifier out of range");
    }
  } else if (m.scheme == Scheme::kGT) {
    std::istringstream in(payload);
    std::vector<double> w;
    std::string tok;
    while (in >> tok) w.push_back(std::strtod(tok.c_str(), nullptr));
    if (w.size() != m.k()) throw Error(ErrorCode::kCorruptPayload, path.string() + ": GT weight count");
    m.weights = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  }
  return m;
}

}  // namespace zslb
