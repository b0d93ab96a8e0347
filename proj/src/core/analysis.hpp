#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/dataset.hpp"

namespace zslb {

// rows = instances, cols = classifiers; 1 = correctly identified.
struct CorrectnessMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> values;  // row-major

  std::uint8_t at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

CorrectnessMatrix correctness_from_predictions(const std::vector<std::vector<ClassId>>& per_classifier,
                                               std::span<const ClassId> labels);

// Percent of instances with row sum 0, 1, ..., cols.
std::vector<double> difficulty_levels(const CorrectnessMatrix& correctness);

// 1 where at least one classifier is correct.
std::vector<std::uint8_t> correct_any(const CorrectnessMatrix& correctness);

struct AttributeScores {
  std::vector<std::string> names;
  std::vector<long> correct_tally;    // +1 per occurrence on a correct instance
  std::vector<long> incorrect_tally;  // -1 per occurrence on an incorrect instance
  std::optional<std::size_t> easiest;
  std::optional<std::size_t> hardest;

  std::string easiest_name() const { return easiest ? names[*easiest] : "undefined"; }
  std::string hardest_name() const { return hardest ? names[*hardest] : "undefined"; }
};

// `present` is rows x names.size(), row-major, entries 0/1.
AttributeScores attribute_scores(std::span<const std::uint8_t> present, const std::vector<std::string>& names,
                                 std::span<const std::uint8_t> correct_any);

// Per-instance attribute presence: the instance's class attribute vector
// binarized at `threshold` (>= threshold counts as present).
std::vector<std::uint8_t> instance_attributes(const Dataset& dataset, std::span<const std::size_t> rows,
                                              double threshold = 0.5);

enum class Direction { kHigherBetter, kLowerBetter };

// One measure: competitors x datasets, empty optional = missing cell.
struct MetricTable {
  std::string measure;
  std::vector<std::string> competitors;
  std::vector<std::string> datasets;
  std::vector<std::vector<std::optional<double>>> values;  // [competitor][dataset]
  Direction direction = Direction::kHigherBetter;
};

struct PointsTable {
  std::vector<std::string> competitors;
  std::vector<std::string> datasets;
  std::vector<std::string> measures;
  // [measure][dataset][competitor]
  std::vector<std::vector<std::vector<int>>> measure_points;
  // [competitor][dataset], summed over measures
  std::vector<std::vector<int>> points;
  std::vector<int> totals;
};

// Dense ranking per (dataset, measure): equal values share a rank, the next
// distinct value takes the next rank; points = (P + 1) - rank. Tables must
// share competitors and datasets (matched by name, order of the first table).
PointsTable combined_points(std::span<const MetricTable> tables);

// Rows: competitor, one column per dataset, then Total.
std::string points_csv(const PointsTable& table);

// Parses "name,<dataset>,...,<dataset>" tables; empty cells are missing.
MetricTable read_metric_table(const std::filesystem::path& path, Direction direction);
MetricTable parse_metric_table(const std::string& text, const std::string& measure, Direction direction);
std::string metric_table_csv(const MetricTable& table);

}  // namespace zslb
