#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "core/score_matrix.hpp"

namespace zslb {

enum class Scheme { kMV, kMDT, kDNN, kGT, kCon, kAuc };

inline constexpr Scheme kAllSchemes[] = {Scheme::kMV, Scheme::kMDT, Scheme::kDNN,
                                         Scheme::kGT, Scheme::kCon, Scheme::kAuc};

const char* scheme_name(Scheme s);
std::optional<Scheme> parse_scheme(std::string_view name);
// MDT, DNN and GT have fitted parameters.
bool is_parametric(Scheme s);

// K base classifiers aligned on the same instances and candidates.
struct BasePredictionSet {
  std::vector<std::string> classifiers;
  std::vector<ClassId> candidates;
  std::vector<Eigen::MatrixXd> scores;  // per classifier, rows min-max normalized to [0, 1]
  std::vector<std::vector<ClassId>> predicted;
  // Share of the normalized row mass on the top class, max / sum, in [0, 1].
  std::vector<Eigen::VectorXd> confidence;
  // Top normalized score minus the runner-up.
  std::vector<Eigen::VectorXd> margin;

  std::size_t size() const { return classifiers.size(); }
  std::size_t rows() const { return predicted.empty() ? 0 : predicted.front().size(); }
};

// Normalizes raw score rows and derives predictions, confidences and margins.
BasePredictionSet build_prediction_set(std::vector<std::string> names,
                                       std::span<const ScoreMatrix> raw);

struct MdtConfig {
  std::size_t max_depth = 8;
  std::size_t min_leaf = 16;
};

struct DnnConfig {
  std::size_t hidden1 = 32;
  std::size_t hidden2 = 16;
  double learning_rate = 0.05;
  std::size_t epochs = 60;
  std::uint64_t seed = 0;
};

struct GtConfig {
  std::size_t rounds = 10;
  double eta = 0.5;
};

struct ConsensusConfig {
  double tolerance = 1e-9;
  std::size_t max_iters = 100;
};

struct FusionConfig {
  MdtConfig mdt;
  DnnConfig dnn;
  GtConfig gt;
  ConsensusConfig con;
};

// Index -1 marks a leaf; a leaf emits classifiers[classifier]'s label.
struct MdtNode {
  int feature = -1;         // 0..K-1 confidence, K..2K-1 margin
  double threshold = 0.0;   // go left when value <= threshold
  int left = -1;
  int right = -1;
  std::size_t classifier = 0;
};

// Per-class scorer shared over classes: K normalized scores -> H1 -> H2 -> 1,
// rectified-linear throughout.
struct DnnLayers {
  Eigen::MatrixXd w1;  // H1 x K
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // H2 x H1
  Eigen::VectorXd b2;
  Eigen::RowVectorXd w3;  // 1 x H2
  double b3 = 0.0;
};

struct FusionModel {
  Scheme scheme = Scheme::kMV;
  std::vector<std::string> classifiers;
  std::vector<ClassId> candidates;  // the fit-set candidates (informational)
  std::uint64_t seed = 0;
  FusionConfig config;
  std::vector<MdtNode> tree;
  DnnLayers dnn;
  Eigen::VectorXd weights;  // GT player weights

  std::size_t k() const { return classifiers.size(); }
};

std::vector<ClassId> fuse_majority(const BasePredictionSet& preds);

FusionModel train_mdt(const BasePredictionSet& fit, std::span<const ClassId> labels, const MdtConfig& cfg = {});
std::vector<ClassId> fuse_mdt(const FusionModel& model, const BasePredictionSet& preds);

FusionModel train_dnn(const BasePredictionSet& fit, std::span<const ClassId> labels, const DnnConfig& cfg);
std::vector<ClassId> fuse_dnn(const FusionModel& model, const BasePredictionSet& preds);
// Network outputs, rows x candidates.
Eigen::MatrixXd dnn_outputs(const FusionModel& model, const BasePredictionSet& preds);
// Mean squared error against one-hot targets.
double dnn_mse(const FusionModel& model, const BasePredictionSet& preds, std::span<const ClassId> labels);
DnnLayers dnn_initial_layers(std::size_t k, const DnnConfig& cfg);

FusionModel train_game(const BasePredictionSet& fit, std::span<const ClassId> labels, const GtConfig& cfg = {});
std::vector<ClassId> fuse_game(const FusionModel& model, const BasePredictionSet& preds);

std::vector<ClassId> fuse_auction(const BasePredictionSet& preds);

// Throws "no consensus" when max_iters is exhausted.
std::vector<ClassId> fuse_consensus(const BasePredictionSet& preds, const ConsensusConfig& cfg = {});
// Per-instance consensus distributions (rows x candidates).
Eigen::MatrixXd consensus_distributions(const BasePredictionSet& preds, const ConsensusConfig& cfg = {});

// Weighted plurality; ties to the higher summed confidence, then lowest id.
ClassId weighted_plurality(const BasePredictionSet& preds, std::size_t row, std::span<const double> weights);

// Fits the scheme's parameters (no-op for MV, Con, Auc).
FusionModel fit_fusion(Scheme scheme, const BasePredictionSet& fit, std::span<const ClassId> labels,
                       const FusionConfig& cfg, std::uint64_t seed);
std::vector<ClassId> apply_fusion(const FusionModel& model, const BasePredictionSet& preds);

// Upper bound on selector-style fusion: 100 - share of instances no base
// classifier gets right.
double ceiling(std::span<const double> levels);

void save_fusion(const FusionModel& model, const std::filesystem::path& path);
FusionModel load_fusion(const std::filesystem::path& path);

}  // namespace zslb
