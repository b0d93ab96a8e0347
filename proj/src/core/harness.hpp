#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/analysis.hpp"
#include "core/classifiers.hpp"
#include "core/dataset.hpp"
#include "core/ensemble.hpp"
#include "core/error.hpp"
#include "core/metrics.hpp"

namespace zslb {

struct DatasetSource {
  std::string name;
  std::optional<SynthesisSpec> synth;  // set for generated datasets
  std::filesystem::path bundle;        // otherwise a bundle directory
};

struct ClassifierEntry {
  Method method = Method::kESZSL;
  TrainConfig config;
  // Optional grid: parameter name -> candidate values. Selection uses
  // pseudo-unseen top-1 on the carved meta split.
  std::map<std::string, std::vector<double>> grid;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out;
  std::size_t workers = 1;
  std::vector<DatasetSource> datasets;
  std::vector<ClassifierEntry> classifiers;
  std::vector<Scheme> schemes;
  double fusion_class_fraction = 0.3;
  FusionConfig fusion;

  // Stable text of every effective setting; the config hash is over this.
  std::string canonical() const;
  std::string hash() const;
};

// INI-style text: top-level `seed` (required), `out`, `workers`,
// `classifiers`, `fusion`, `fusion_class_fraction`; sections
// `[dataset NAME]`, `[classifier METHOD]`, `[fusion SCHEME]`.
ExperimentConfig parse_experiment_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

std::uint64_t fnv1a64(const std::string& bytes);

struct RunRecord {
  std::string id;  // dataset/kind/name
  std::string dataset;
  std::size_t dataset_index = 0;
  std::string kind;  // "base" or "fusion"
  std::string name;
  std::size_t index = 0;  // position in its roster
  bool ok = false;
  std::string error;
  MetricReport metrics;  // fusion records carry NaN top5/logloss
  std::vector<double> levels;
  double ceiling = 0.0;
  std::string easiest_attribute;
  std::string hardest_attribute;
  double elapsed_ms = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string chosen_config;  // effective TrainConfig for base records

  std::string to_json() const;
  static RunRecord from_json(const std::string& line);
};

using RecordSink = std::function<void(const RunRecord&)>;

// Runs the whole grid; each record is handed to `sink` as soon as it exists.
std::vector<RunRecord> run_experiment(const ExperimentConfig& config, const RecordSink& sink = {});

// run_experiment with records.ndtxt in `out` (truncated first, then
// append-only) followed by every report.
std::vector<RunRecord> run_experiment_to(const ExperimentConfig& config, const std::filesystem::path& out);

std::vector<RunRecord> read_records(const std::filesystem::path& path);

struct ReportOutput {
  std::vector<std::filesystem::path> files;
  std::size_t warnings = 0;
  std::vector<std::string> messages;
};

// kind: top1, top5, logloss, f1, combined_points, difficulty, ceiling, all.
ReportOutput emit_report(std::span<const RunRecord> records, const std::string& kind,
                         const std::filesystem::path& out_dir);

// Metric table over successful records of one kind ("base"/"fusion").
MetricTable records_table(std::span<const RunRecord> records, const std::string& kind, const std::string& measure);

// Per-scheme result of meta-classification on one dataset.
struct FusionOutcome {
  Scheme scheme = Scheme::kMV;
  bool ok = false;
  std::string error;
  ErrorCode error_code = ErrorCode::kInvalidArgument;
  std::vector<ClassId> predictions;
  double top1 = 0.0;
  double f1 = 0.0;
  FusionModel model;
};

// Fits parametric schemes on the carved pseudo-unseen split (base methods
// retrained on the inner split with `configs`) and applies every scheme to
// `test_scores`, the full-seen-trained scores on the real test rows.
std::vector<FusionOutcome> run_fusion(const Dataset& dataset, std::span<const Method> methods,
                                      std::span<const TrainConfig> configs, std::span<const ScoreMatrix> test_scores,
                                      std::span<const Scheme> schemes, double fusion_class_fraction,
                                      const FusionConfig& fusion, std::uint64_t seed);

Dataset materialize(const DatasetSource& source);

}  // namespace zslb
