#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "core/dataset.hpp"
#include "core/score_matrix.hpp"

namespace zslb {

enum class Method { kDeViSE, kALE, kSJE, kESZSL, kSAE };

inline constexpr Method kAllMethods[] = {Method::kDeViSE, Method::kALE, Method::kSJE,
                                         Method::kESZSL, Method::kSAE};

const char* method_name(Method m);
std::optional<Method> parse_method(std::string_view name);
bool is_ranking_method(Method m);

enum class LabelCoding { kPlusMinusOne, kZeroOne };

struct TrainConfig {
  double learning_rate = 0.05;
  double margin = 1.0;
  std::size_t epochs = 50;
  std::size_t patience = 5;
  double gamma = 1.0;
  double lambda = 1.0;
  bool normalize_inputs = true;
  std::uint64_t seed = 0;
  // ESZSL target matrix: +1 on the true class, and -1 or 0 elsewhere.
  LabelCoding label_coding = LabelCoding::kZeroOne;
  // SAE inference in feature space (decode prototypes, score by negative
  // distance) instead of cosine similarity in semantic space.
  bool sae_feature_space = false;

  void check() const;
};

// Starting hyperparameters per method. They are desk-scale defaults, not tuned
// for any public benchmark.
TrainConfig default_config(Method m);

struct ModelMeta {
  std::uint64_t seed = 0;
  std::size_t epochs_run = 0;
  bool stopped_early = false;
  double best_validation_top1 = 0.0;
  TrainConfig config;
};

struct CompatibilityModel {
  Method method = Method::kESZSL;
  Eigen::MatrixXd weights;  // D x M (for SAE: the transposed encoder)
  ModelMeta meta;

  std::size_t feature_dim() const { return static_cast<std::size_t>(weights.rows()); }
  std::size_t semantic_dim() const { return static_cast<std::size_t>(weights.cols()); }
};

// Scores of one instance against `candidates`, in candidate order.
Eigen::VectorXd score(const CompatibilityModel& model, std::span<const float> x,
                      const PrototypeTable& prototypes, std::span<const ClassId> candidates);

ClassId predict(const CompatibilityModel& model, std::span<const float> x,
                const PrototypeTable& prototypes, std::span<const ClassId> candidates);

// Score matrix for the given dataset rows.
ScoreMatrix score_rows(const CompatibilityModel& model, const Dataset& dataset,
                       std::span<const std::size_t> rows, std::span<const ClassId> candidates);

// Unseen-class test rows against the unseen classes.
ScoreMatrix score_test(const CompatibilityModel& model, const Dataset& dataset);

struct RankingLoss {
  double loss = 0.0;
  Eigen::MatrixXd gradient;  // D x M
};

// Per-instance ranking loss of the three bilinear SGD methods and its exact
// gradient with respect to W. The ALE form weights the violating hinge terms
// by l(r)/r with r the exact number of violators and l(r) = sum_{k<=r} 1/k.
RankingLoss ranking_loss_and_gradient(Method variant, const Eigen::MatrixXd& weights,
                                      const Eigen::VectorXd& x, ClassId y_true,
                                      const PrototypeTable& prototypes,
                                      std::span<const ClassId> candidates, double margin);

CompatibilityModel train_ranking(Method variant, const Dataset& train, const TrainConfig& cfg);
CompatibilityModel train_eszsl(const Dataset& train, const TrainConfig& cfg);
CompatibilityModel train_sae(const Dataset& train, const TrainConfig& cfg);
CompatibilityModel train(Method method, const Dataset& train, const TrainConfig& cfg);

// Seed-dependent W the SGD trainers start from: i.i.d. uniform on
// [-1/sqrt(D), 1/sqrt(D)].
Eigen::MatrixXd initial_weights(std::size_t d, std::size_t m, std::uint64_t seed);

// Training-set matrices exactly as the trainers see them.
struct TrainingMatrices {
  Eigen::MatrixXd features;             // D x N_tr, columns are instances
  std::vector<std::size_t> class_index;  // per column, index into classes
  std::vector<ClassId> classes;          // the seen classes
  Eigen::MatrixXd class_prototypes;     // M x N0
};
TrainingMatrices training_matrices(const Dataset& train, bool normalize);

void save_model(const CompatibilityModel& model, const std::filesystem::path& path);
CompatibilityModel load_model(const std::filesystem::path& path);

std::string config_to_json(const TrainConfig& cfg);
TrainConfig config_from_json(const std::string& text);

}  // namespace zslb
