#include "core/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_map>

#include <Eigen/Cholesky>
#include <json.hpp>

#include "core/binary_io.hpp"
#include "core/error.hpp"
#include "core/rng.hpp"
#include "core/sylvester.hpp"

namespace zslb {

using nlohmann::json;

// ---------------------------------------------------------------- names/config

const char* method_name(Method m) {
  switch (m) {
    case Method::kDeViSE: return "DeViSE";
    case Method::kALE: return "ALE";
    case Method::kSJE: return "SJE";
    case Method::kESZSL: return "ESZSL";
    case Method::kSAE: return "SAE";
  }
  return "?";
}

std::optional<Method> parse_method(std::string_view name) {
  for (Method m : kAllMethods) {
    std::string_view ref = method_name(m);
    if (ref.size() == name.size() &&
        std::equal(ref.begin(), ref.end(), name.begin(), [](char a, char b) {
          return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
        })) {
      return m;
    }
  }
  return std::nullopt;
}

bool is_ranking_method(Method m) {
  return m == Method::kDeViSE || m == Method::kALE || m == Method::kSJE;
}

void TrainConfig::check() const {
  auto finite_nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
  if (!finite_nonneg(learning_rate)) throw Error(ErrorCode::kInvalidArgument, "learning_rate must be finite and >= 0");
  if (!finite_nonneg(margin)) throw Error(ErrorCode::kInvalidArgument, "margin must be finite and >= 0");
  if (!finite_nonneg(gamma)) throw Error(ErrorCode::kInvalidArgument, "gamma must be finite and >= 0");
  if (!finite_nonneg(lambda)) throw Error(ErrorCode::kInvalidArgument, "lambda must be finite and >= 0");
  if (epochs < 1) throw Error(ErrorCode::kInvalidArgument, "epochs must be >= 1");
}

TrainConfig default_config(Method m) {
  TrainConfig cfg;
  switch (m) {
    case Method::kDeViSE:
    case Method::kALE:
    case Method::kSJE:
      cfg.learning_rate = 0.05;
      cfg.margin = 1.0;
      break;
    case Method::kESZSL:
      cfg.gamma = 1.0;
      cfg.lambda = 10.0;
      cfg.label_coding = LabelCoding::kZeroOne;
      break;
    case Method::kSAE:
      cfg.lambda = 1.0;
      break;
  }
  return cfg;
}

std::string config_to_json(const TrainConfig& c) {
  json j{{"learning_rate", c.learning_rate},
         {"margin", c.margin},
         {"epochs", c.epochs},
         {"patience", c.patience},
         {"gamma", c.gamma},
         {"lambda", c.lambda},
         {"normalize_inputs", c.normalize_inputs},
         {"seed", c.seed},
         {"label_coding", c.label_coding == LabelCoding::kZeroOne ? "zero_one" : "plus_minus_one"},
         {"sae_feature_space", c.sae_feature_space}};
  return j.dump();
}

namespace {

TrainConfig config_from(const json& j) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.margin = j.value("margin", c.margin);
  c.epochs = j.value("epochs", c.epochs);
  c.patience = j.value("patience", c.patience);
  c.gamma = j.value("gamma", c.gamma);
  c.lambda = j.value("lambda", c.lambda);
  c.normalize_inputs = j.value("normalize_inputs", c.normalize_inputs);
  c.seed = j.value("seed", c.seed);
  c.label_coding = j.value("label_coding", std::string("zero_one")) == "zero_one"
                       ? LabelCoding::kZeroOne
                       : LabelCoding::kPlusMinusOne;
  c.sae_feature_space = j.value("sae_feature_space", c.sae_feature_space);
  return c;
}

}  // namespace

TrainConfig config_from_json(const std::string& text) {
  try {
    return config_from(json::parse(text));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("train config: ") + e.what());
  }
}

// ---------------------------------------------------------------- scoring

std::size_t argmax_lowest_id(const Eigen::Ref<const Eigen::VectorXd>& scores,
                             std::span<const ClassId> candidates) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < candidates.size(); ++j) {
    const double s = scores(static_cast<Eigen::Index>(j));
    const double b = scores(static_cast<Eigen::Index>(best));
    if (s > b || (s == b && candidates[j] < candidates[best])) best = j;
  }
  return best;
}

namespace {

Eigen::VectorXd to_vector(std::span<const float> x, bool normalize) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) v(static_cast<Eigen::Index>(i)) = x[i];
  if (normalize) {
    const double n = v.norm();
    if (n > 0.0) v /= n;
  }
  return v;
}

// M x |classes|, columns in class order.
Eigen::MatrixXd prototype_matrix(const PrototypeTable& prototypes, std::span<const ClassId> classes,
                                 bool normalize) {
  Eigen::MatrixXd s(static_cast<Eigen::Index>(prototypes.dim), static_cast<Eigen::Index>(classes.size()));
  for (std::size_t j = 0; j < classes.size(); ++j) {
    s.col(static_cast<Eigen::Index>(j)) = to_vector(prototypes.vector(classes[j]), normalize);
  }
  return s;
}

void check_score_args(const CompatibilityModel& model, std::size_t x_dim,
                      const PrototypeTable& prototypes, std::span<const ClassId> candidates) {
  if (candidates.empty()) throw Error(ErrorCode::kInvalidArgument, "score: empty candidate list");
  if (x_dim != model.feature_dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "score: instance has dimension " + std::to_string(x_dim) +
                                                   ", model expects " + std::to_string(model.feature_dim()));
  }
  if (prototypes.dim != model.semantic_dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "score: prototypes have dimension " +
                                                   std::to_string(prototypes.dim) + ", model expects " +
                                                   std::to_string(model.semantic_dim()));
  }
}

// Rows of `x` are instances; returns rows x candidates.
Eigen::MatrixXd score_block(const CompatibilityModel& model, const Eigen::MatrixXd& x,
                            const Eigen::MatrixXd& protos) {
  const auto& w = model.weights;
  if (model.method != Method::kSAE) return x * w * protos;

  if (model.meta.config.sae_feature_space) {
    // Decode each prototype into feature space and score by negative distance.
    const Eigen::MatrixXd decoded = w * protos;  // D x C
    Eigen::MatrixXd out(x.rows(), protos.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      for (Eigen::Index c = 0; c < protos.cols(); ++c) {
        out(r, c) = -(x.row(r).transpose() - decoded.col(c)).norm();
      }
    }
    return out;
  }
  const Eigen::MatrixXd projected = x * w;  // rows x M
  Eigen::MatrixXd out = projected * protos;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double pn = projected.row(r).norm();
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      const double denom = pn * protos.col(c).norm();
      out(r, c) = denom > 0.0 ? out(r, c) / denom : 0.0;
    }
  }
  return out;
}

}  // namespace

Eigen::VectorXd score(const CompatibilityModel& model, std::span<const float> x,
                      const PrototypeTable& prototypes, std::span<const ClassId> candidates) {
  check_score_args(model, x.size(), prototypes, candidates);
  const bool norm = model.meta.config.normalize_inputs;
  const Eigen::MatrixXd xr = to_vector(x, norm).transpose();
  return score_block(model, xr, prototype_matrix(prototypes, candidates, norm)).row(0).transpose();
}

ClassId predict(const CompatibilityModel& model, std::span<const float> x,
                const PrototypeTable& prototypes, std::span<const ClassId> candidates) {
  const Eigen::VectorXd s = score(model, x, prototypes, candidates);
  return candidates[argmax_lowest_id(s, candidates)];
}

ScoreMatrix score_rows(const CompatibilityModel& model, const Dataset& dataset,
                       std::span<const std::size_t> rows, std::span<const ClassId> candidates) {
  check_score_args(model, dataset.feature_dim(), dataset.prototypes, candidates);
  const bool norm = model.meta.config.normalize_inputs;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dataset.feature_dim()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = to_vector(dataset.embeddings.row(rows[i]), norm).transpose();
  }
  ScoreMatrix out;
  out.candidates.assign(candidates.begin(), candidates.end());
  out.values = score_block(model, x, prototype_matrix(dataset.prototypes, candidates, norm));
  return out;
}

ScoreMatrix score_test(const CompatibilityModel& model, const Dataset& dataset) {
  return score_rows(model, dataset, dataset.split.test_rows, dataset.split.unseen);
}

// ---------------------------------------------------------------- ranking losses

namespace {

double harmonic(std::size_t r) {
  double h = 0.0;
  for (std::size_t k = 1; k <= r; ++k) h += 1.0 / static_cast<double>(k);
  return h;
}

struct Terms {
  double loss = 0.0;
  Eigen::VectorXd coeff;  // gradient = x * (S * coeff)^T
};

// Loss terms given compatibilities f over the candidates and the index of the
// true class.
Terms ranking_terms(Method variant, const Eigen::VectorXd& f, std::size_t truth, double margin) {
  const Eigen::Index c = f.size();
  const auto t = static_cast<Eigen::Index>(truth);
  Terms out{0.0, Eigen::VectorXd::Zero(c)};
  switch (variant) {
    case Method::kDeViSE:
    case Method::kALE: {
      std::size_t violators = 0;
      for (Eigen::Index y = 0; y < c; ++y) {
        if (y == t) continue;
        const double h = margin - f(t) + f(y);
        if (h > 0.0) {
          out.loss += h;
          out.coeff(y) += 1.0;
          out.coeff(t) -= 1.0;
          ++violators;
        }
      }
      if (variant == Method::kALE && violators > 0) {
        const double w = harmonic(violators) / static_cast<double>(violators);
        out.loss *= w;
        out.coeff *= w;
      }
      break;
    }
    case Method::kSJE: {
      Eigen::Index best = t;
      double best_val = f(t);
      for (Eigen::Index y = 0; y < c; ++y) {
        if (y == t) continue;
        const double v = margin + f(y);
        if (v > best_val) {
          best_val = v;
          best = y;
        }
      }
      out.loss = best_val - f(t);
      if (best != t && out.loss > 0.0) {
        out.coeff(best) = 1.0;
        out.coeff(t) = -1.0;
      } else {
        out.loss = 0.0;
      }
      break;
    }
    default:
      throw Error(ErrorCode::kInvalidArgument, std::string(method_name(variant)) + " is not a ranking method");
  }
  return out;
}

}  // namespace

RankingLoss ranking_loss_and_gradient(Method variant, const Eigen::MatrixXd& weights,
                                      const Eigen::VectorXd& x, ClassId y_true,
                                      const PrototypeTable& prototypes,
                                      std::span<const ClassId> candidates, double margin) {
  if (!is_ranking_method(variant)) {
    throw Error(ErrorCode::kInvalidArgument, std::string(method_name(variant)) + " is not a ranking method");
  }
  if (x.size() != weights.rows() || static_cast<Eigen::Index>(prototypes.dim) != weights.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "ranking loss: W is " + std::to_string(weights.rows()) + "x" +
                                                   std::to_string(weights.cols()) + ", x has " +
                                                   std::to_string(x.size()) + ", prototypes " +
                                                   std::to_string(prototypes.dim));
  }
  auto it = std::find(candidates.begin(), candidates.end(), y_true);
  if (it == candidates.end()) throw Error(ErrorCode::kInvalidArgument, "ranking loss: y_true not among candidates");
  const Eigen::MatrixXd s = prototype_matrix(prototypes, candidates, false);
  const Eigen::VectorXd f = s.transpose() * (weights.transpose() * x);
  Terms terms = ranking_terms(variant, f, static_cast<std::size_t>(it - candidates.begin()), margin);
  return {terms.loss, x * (s * terms.coeff).transpose()};
}

// ---------------------------------------------------------------- training

TrainingMatrices training_matrices(const Dataset& train, bool normalize) {
  TrainingMatrices tm;
  tm.classes = train.split.seen;
  std::unordered_map<ClassId, std::size_t> index;
  for (std::size_t j = 0; j < tm.classes.size(); ++j) index.emplace(tm.classes[j], j);
  const auto& rows = train.split.train_rows;
  tm.features.resize(static_cast<Eigen::Index>(train.feature_dim()), static_cast<Eigen::Index>(rows.size()));
  tm.class_index.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    tm.features.col(static_cast<Eigen::Index>(i)) = to_vector(train.embeddings.row(rows[i]), normalize);
    auto it = index.find(train.labels[rows[i]]);
    if (it == index.end()) {
      throw Error(ErrorCode::kInvalidDataset, "train row " + std::to_string(rows[i]) + " is not a seen class");
    }
    tm.class_index.push_back(it->second);
  }
  tm.class_prototypes = prototype_matrix(train.prototypes, tm.classes, normalize);
  return tm;
}

Eigen::MatrixXd initial_weights(std::size_t d, std::size_t m, std::uint64_t seed) {
  Rng rng = Rng::derive(seed, 0x57);
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  Eigen::MatrixXd w(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(m));
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-bound, bound);
  }
  return w;
}

namespace {

void require_trainable(const Dataset& train) {
  if (train.split.train_rows.empty()) throw Error(ErrorCode::kInvalidArgument, "no training rows");
  if (train.split.seen.empty()) throw Error(ErrorCode::kInvalidArgument, "no seen classes");
}

// Stratified hold-out: round(10%) of each class's rows, keeping at least one
// row of every class for fitting.
void split_validation(const TrainingMatrices& tm, std::uint64_t seed, std::vector<std::size_t>& fit,
                      std::vector<std::size_t>& held) {
  std::vector<std::vector<std::size_t>> by_class(tm.classes.size());
  for (std::size_t i = 0; i < tm.class_index.size(); ++i) by_class[tm.class_index[i]].push_back(i);
  Rng rng = Rng::derive(seed, 0x56);
  for (auto& cols : by_class) {
    rng.shuffle(std::span<std::size_t>(cols));
    std::size_t h = static_cast<std::size_t>(std::lround(0.1 * static_cast<double>(cols.size())));
    if (h >= cols.size()) h = cols.size() - 1;
    held.insert(held.end(), cols.begin(), cols.begin() + static_cast<std::ptrdiff_t>(h));
    fit.insert(fit.end(), cols.begin() + static_cast<std::ptrdiff_t>(h), cols.end());
  }
  std::sort(fit.begin(), fit.end());
  std::sort(held.begin(), held.end());
}

struct Validation {
  double top1 = -1.0;
  double loss = std::numeric_limits<double>::infinity();

  // Higher top-1 wins; equal top-1 falls back to lower mean loss.
  bool better_than(const Validation& o) const { return top1 > o.top1 || (top1 == o.top1 && loss < o.loss); }
};

Validation validate_on(Method variant, const TrainingMatrices& tm, const Eigen::MatrixXd& w,
                       const std::vector<std::size_t>& cols, double margin) {
  Validation v{0.0, 0.0};
  if (cols.empty()) return v;
  const Eigen::MatrixXd ws = w * tm.class_prototypes;  // D x N0
  std::size_t hits = 0;
  for (std::size_t i : cols) {
    const Eigen::VectorXd f = ws.transpose() * tm.features.col(static_cast<Eigen::Index>(i));
    if (argmax_lowest_id(f, tm.classes) == tm.class_index[i]) ++hits;
    v.loss += ranking_terms(variant, f, tm.class_index[i], margin).loss;
  }
  v.top1 = 100.0 * static_cast<double>(hits) / static_cast<double>(cols.size());
  v.loss /= static_cast<double>(cols.size());
  return v;
}

// Sampled-violation step for ALE: draw wrong classes in random order until
// one violates the margin; the trial count k estimates the rank as
// floor((C - 1) / k), which sets the l(r) weight of that single term.
Terms ale_sampled_terms(const Eigen::VectorXd& f, std::size_t truth, double margin, Rng& rng,
                        std::vector<std::size_t>& scratch) {
  const auto c = static_cast<std::size_t>(f.size());
  Terms out{0.0, Eigen::VectorXd::Zero(f.size())};
  scratch.clear();
  for (std::size_t y = 0; y < c; ++y) {
    if (y != truth) scratch.push_back(y);
  }
  const auto t = static_cast<Eigen::Index>(truth);
  for (std::size_t trial = 0; trial < scratch.size(); ++trial) {
    const std::size_t pick = trial + static_cast<std::size_t>(rng.index(scratch.size() - trial));
    std::swap(scratch[trial], scratch[pick]);
    const auto y = static_cast<Eigen::Index>(scratch[trial]);
    const double h = margin - f(t) + f(y);
    if (h > 0.0) {
      const std::size_t rank = (c - 1) / (trial + 1);
      const double w = harmonic(rank);
      out.loss = w * h;
      out.coeff(y) = w;
      out.coeff(t) = -w;
      break;
    }
  }
  return out;
}

}  // namespace

CompatibilityModel train_ranking(Method variant, const Dataset& train, const TrainConfig& cfg) {
  if (!is_ranking_method(variant)) {
    throw Error(ErrorCode::kInvalidArgument, std::string(method_name(variant)) + " is not an SGD ranking method");
  }
  cfg.check();
  require_trainable(train);
  const TrainingMatrices tm = training_matrices(train, cfg.normalize_inputs);
  std::vector<std::size_t> fit, held;
  split_validation(tm, cfg.seed, fit, held);
  const std::vector<std::size_t>& monitor = held.empty() ? fit : held;

  CompatibilityModel model;
  model.method = variant;
  model.meta.seed = cfg.seed;
  model.meta.config = cfg;
  Eigen::MatrixXd w = initial_weights(train.feature_dim(), train.semantic_dim(), cfg.seed);
  Eigen::MatrixXd best = w;
  Validation best_val;
  std::size_t stale = 0;

  Rng order_rng = Rng::derive(cfg.seed, 0x4F);
  Rng sample_rng = Rng::derive(cfg.seed, 0x41);
  std::vector<std::size_t> order = fit;
  std::vector<std::size_t> scratch;
  const Eigen::MatrixXd& s = tm.class_prototypes;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order_rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t i : order) {
      const auto col = static_cast<Eigen::Index>(i);
      const Eigen::VectorXd f = s.transpose() * (w.transpose() * tm.features.col(col));
      Terms terms = variant == Method::kALE
                        ? ale_sampled_terms(f, tm.class_index[i], cfg.margin, sample_rng, scratch)
                        : ranking_terms(variant, f, tm.class_index[i], cfg.margin);
      if (!std::isfinite(terms.loss)) {
        throw Error(ErrorCode::kDiverged, std::string(method_name(variant)) + ": non-finite loss in epoch " +
                                              std::to_string(epoch));
      }
      if (terms.loss > 0.0 && cfg.learning_rate > 0.0) {
        w.noalias() -= cfg.learning_rate * tm.features.col(col) * (s * terms.coeff).transpose();
      }
    }
    if (!w.allFinite()) {
      throw Error(ErrorCode::kDiverged, std::string(method_name(variant)) + ": non-finite weights after epoch " +
                                            std::to_string(epoch));
    }
    model.meta.epochs_run = epoch;
    const Validation val = validate_on(variant, tm, w, monitor, cfg.margin);
    if (val.better_than(best_val)) {
      best_val = val;
      best = w;
      stale = 0;
    } else if (++stale >= cfg.patience && cfg.patience > 0) {
      model.meta.stopped_early = true;
      break;
    }
  }
  model.weights = std::move(best);
  model.meta.best_validation_top1 = best_val.top1;
  return model;
}

CompatibilityModel train_eszsl(const Dataset& train, const TrainConfig& cfg) {
  cfg.check();
  require_trainable(train);
  const TrainingMatrices tm = training_matrices(train, cfg.normalize_inputs);
  const Eigen::MatrixXd& x = tm.features;          // D x N
  const Eigen::MatrixXd& s = tm.class_prototypes;  // M x N0
  const Eigen::Index n = x.cols(), z = s.cols();

  Eigen::MatrixXd y = Eigen::MatrixXd::Constant(n, z, cfg.label_coding == LabelCoding::kZeroOne ? 0.0 : -1.0);
  for (Eigen::Index i = 0; i < n; ++i) y(i, static_cast<Eigen::Index>(tm.class_index[static_cast<std::size_t>(i)])) = 1.0;

  const Eigen::MatrixXd feat_gram =
      x * x.transpose() + cfg.gamma * Eigen::MatrixXd::Identity(x.rows(), x.rows());
  const Eigen::MatrixXd sem_gram =
      s * s.transpose() + cfg.lambda * Eigen::MatrixXd::Identity(s.rows(), s.rows());

  auto factor = [](const Eigen::MatrixXd& g, const char* which) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(g);
    if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-13)) {
      throw Error(ErrorCode::kSingularSystem,
                  std::string("ESZSL: ") + which + " Gram matrix is singular; use gamma, lambda > 0");
    }
    return ldlt;
  };
  const auto feat = factor(feat_gram, "feature");
  const auto sem = factor(sem_gram, "prototype");

  // W = (X X^T + gI)^-1 X Y S^T (S S^T + lI)^-1
  const Eigen::MatrixXd left = feat.solve(x * y * s.transpose());  // D x M
  CompatibilityModel model;
  model.method = Method::kESZSL;
  model.weights = sem.solve(left.transpose()).transpose();
  model.meta.seed = cfg.seed;
  model.meta.config = cfg;
  model.meta.epochs_run = 0;
  if (!model.weights.allFinite()) throw Error(ErrorCode::kSingularSystem, "ESZSL: non-finite solution");
  return model;
}

CompatibilityModel train_sae(const Dataset& train, const TrainConfig& cfg) {
  cfg.check();
  require_trainable(train);
  const TrainingMatrices tm = training_matrices(train, cfg.normalize_inputs);
  const Eigen::MatrixXd& x = tm.features;  // D x N
  Eigen::MatrixXd s(tm.class_prototypes.rows(), x.cols());  // per-instance prototypes, M x N
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    s.col(i) = tm.class_prototypes.col(static_cast<Eigen::Index>(tm.class_index[static_cast<std::size_t>(i)]));
  }

  // S S^T W + W (l X X^T) = (1 + l) S X^T, W: M x D
  const Eigen::MatrixXd a = s * s.transpose();
  const Eigen::MatrixXd b = cfg.lambda * (x * x.transpose());
  const Eigen::MatrixXd c = (1.0 + cfg.lambda) * (s * x.transpose());
  Eigen::MatrixXd encoder;
  if (cfg.lambda == 0.0) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-13)) {
      throw Error(ErrorCode::kSpectralConflict, "SAE: lambda = 0 needs a nonsingular prototype Gram matrix");
    }
    encoder = ldlt.solve(c);
  } else {
    encoder = solve_sylvester_symmetric(a, b, c);
  }
  CompatibilityModel model;
  model.method = Method::kSAE;
  model.weights = encoder.transpose();
  model.meta.seed = cfg.seed;
  model.meta.config = cfg;
  return model;
}

CompatibilityModel train(Method method, const Dataset& train_set, const TrainConfig& cfg) {
  switch (method) {
    case Method::kESZSL: return train_eszsl(train_set, cfg);
    case Method::kSAE: return train_sae(train_set, cfg);
    default: return train_ranking(method, train_set, cfg);
  }
}

// ---------------------------------------------------------------- artifacts

void save_model(const CompatibilityModel& model, const std::filesystem::path& path) {
  json h{{"format", "zslb-model/1"},
         {"method", method_name(model.method)},
         {"d", model.weights.rows()},
         {"m", model.weights.cols()},
         {"seed", model.meta.seed},
         {"epochs_run", model.meta.epochs_run},
         {"stopped_early", model.meta.stopped_early},
         {"best_validation_top1", model.meta.best_validation_top1},
         {"config", json::parse(config_to_json(model.meta.config))}};
  std::vector<double> payload(static_cast<std::size_t>(model.weights.size()));
  for (Eigen::Index i = 0; i < model.weights.rows(); ++i) {
    for (Eigen::Index j = 0; j < model.weights.cols(); ++j) {
      payload[static_cast<std::size_t>(i * model.weights.cols() + j)] = model.weights(i, j);
    }
  }
  io::write_file(path, h.dump() + "\n" + io::encode_f64(payload));
}

CompatibilityModel load_model(const std::filesystem::path& path) {
  const std::string bytes = io::read_file(path, ErrorCode::kIo);
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw Error(ErrorCode::kMalformedBundle, path.string() + ": no model header");
  json h;
  try {
    h = json::parse(bytes.substr(0, nl));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedBundle, path.string() + ": " + e.what());
  }
  if (h.value("format", "") != "zslb-model/1") {
    throw Error(ErrorCode::kMalformedBundle, path.string() + ": not a model artifact");
  }
  CompatibilityModel model;
  auto method = parse_method(h.value("method", ""));
  if (!method) throw Error(ErrorCode::kMalformedBundle, path.string() + ": unknown method");
  model.method = *method;
  const auto d = h.at("d").get<Eigen::Index>();
  const auto m = h.at("m").get<Eigen::Index>();
  const std::string payload = bytes.substr(nl + 1);
  if (payload.size() != static_cast<std::size_t>(d * m) * 8) {
    throw Error(ErrorCode::kCorruptPayload, path.string() + ": payload does not match " + std::to_string(d) +
                                                "x" + std::to_string(m));
  }
  const auto values = io::decode_f64(payload);
  model.weights.resize(d, m);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) model.weights(i, j) = values[static_cast<std::size_t>(i * m + j)];
  }
  model.meta.seed = h.value("seed", std::uint64_t{0});
  model.meta.epochs_run = h.value("epochs_run", std::size_t{0});
  model.meta.stopped_early = h.value("stopped_early", false);
  model.meta.best_validation_top1 = h.value("best_validation_top1", 0.0);
  model.meta.config = config_from(h.at("config"));
  return model;
}

}  // namespace zslb
