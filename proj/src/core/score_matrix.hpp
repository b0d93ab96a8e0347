#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "core/dataset.hpp"

namespace zslb {

// Per-instance, per-candidate scores. Column j belongs to candidates[j].
struct ScoreMatrix {
  std::vector<ClassId> candidates;
  Eigen::MatrixXd values;  // rows x candidates.size()

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return candidates.size(); }
};

// Index of the highest entry; exact ties go to the lowest class id.
std::size_t argmax_lowest_id(const Eigen::Ref<const Eigen::VectorXd>& scores,
                             std::span<const ClassId> candidates);

}  // namespace zslb
