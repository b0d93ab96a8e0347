#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace zslb {

using ClassId = int;

// N x D instance embeddings, row-major float32.
struct EmbeddingMatrix {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<float> values;

  std::span<const float> row(std::size_t r) const {
    return {values.data() + r * dim, dim};
  }
};

// Class id -> semantic vector of length `dim`. Entries are stored in `ids`
// order; `values` holds ids.size() x dim floats.
struct PrototypeTable {
  std::size_t dim = 0;
  std::vector<ClassId> ids;
  std::vector<float> values;

  std::optional<std::size_t> find(ClassId id) const;
  // Throws kInvalidArgument when the id is absent.
  std::span<const float> vector(ClassId id) const;
};

struct SplitSpec {
  std::vector<ClassId> seen;
  std::vector<ClassId> unseen;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
};

// Optional per-class attribute strengths, one row per prototype entry (same
// order as PrototypeTable::ids).
struct AttributeTable {
  std::vector<std::string> names;
  std::vector<float> values;
};

struct Dataset {
  std::string name;
  EmbeddingMatrix embeddings;
  std::vector<ClassId> labels;
  PrototypeTable prototypes;
  SplitSpec split;
  std::optional<AttributeTable> attributes;
  // Original bundle ids for contiguous ids 1..C; empty when the bundle was
  // already contiguous.
  std::vector<std::int64_t> class_map;

  std::size_t num_instances() const { return embeddings.rows; }
  std::size_t feature_dim() const { return embeddings.dim; }
  std::size_t semantic_dim() const { return prototypes.dim; }
};

struct Violation {
  std::string invariant;
  std::string detail;

  std::string to_string() const { return invariant + ": " + detail; }
};

// Empty iff every data-model invariant holds.
std::vector<Violation> validate(const Dataset& dataset);

// Throws InvalidDatasetError when validate() is non-empty.
void require_valid(const Dataset& dataset);

Dataset load_bundle(const std::filesystem::path& dir);
void save_bundle(const Dataset& dataset, const std::filesystem::path& dir);

struct SynthesisSpec {
  std::size_t n_seen = 10;
  std::size_t n_unseen = 10;
  std::size_t per_class = 50;
  std::size_t feature_dim = 64;
  std::size_t semantic_dim = 16;
  double noise_sigma = 0.05;
  std::uint64_t seed = 1;
};

struct SynthesisResult {
  Dataset dataset;
  // Ground-truth linear map G (feature_dim x semantic_dim, row-major) used to
  // place instances at G * prototype + noise.
  std::vector<double> generator_map;
};

SynthesisResult synthesize_with_map(const SynthesisSpec& spec);
Dataset synthesize(const SynthesisSpec& spec);

struct MetaSplit {
  Dataset inner;   // remaining seen classes train; pseudo-unseen classes test
  Dataset fusion;  // the original split, untouched
};

MetaSplit carve_meta_split(const Dataset& dataset, double fusion_class_fraction,
                           std::uint64_t seed);

// Number of seen classes carve_meta_split turns pseudo-unseen.
std::size_t meta_split_size(std::size_t n_seen, double fusion_class_fraction);

}  // namespace zslb
