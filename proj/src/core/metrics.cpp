#include "core/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <unordered_map>

#include "core/error.hpp"

namespace zslb {

namespace {

std::unordered_map<ClassId, std::size_t> column_index(std::span<const ClassId> candidates) {
  std::unordered_map<ClassId, std::size_t> idx;
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    if (!idx.emplace(candidates[j], j).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate candidate class " + std::to_string(candidates[j]));
    }
  }
  return idx;
}

std::size_t column_of(const std::unordered_map<ClassId, std::size_t>& idx, ClassId label) {
  auto it = idx.find(label);
  if (it == idx.end()) throw Error(ErrorCode::kInvalidArgument, "label " + std::to_string(label) + " is not a candidate");
  return it->second;
}

void check_rows(std::size_t rows, std::size_t labels, const char* what) {
  if (rows == 0) throw Error(ErrorCode::kInvalidArgument, std::string(what) + ": empty input");
  if (rows != labels) {
    throw Error(ErrorCode::kDimensionMismatch, std::string(what) + ": " + std::to_string(rows) + " rows, " +
                                                   std::to_string(labels) + " labels");
  }
}

// Mean of hits, either over instances or over per-class hit rates. Classes
// are visited in id order so the summation order is fixed.
double average_hits(const std::vector<bool>& hits, std::span<const ClassId> labels, bool per_class) {
  if (!per_class) {
    const auto n = std::count(hits.begin(), hits.end(), true);
    return 100.0 * static_cast<double>(n) / static_cast<double>(hits.size());
  }
  std::map<ClassId, std::pair<std::size_t, std::size_t>> per;  // hits, total
  for (std::size_t i = 0; i < hits.size(); ++i) {
    auto& p = per[labels[i]];
    p.first += hits[i] ? 1 : 0;
    ++p.second;
  }
  double sum = 0.0;
  for (const auto& [cls, p] : per) sum += static_cast<double>(p.first) / static_cast<double>(p.second);
  return 100.0 * sum / static_cast<double>(per.size());
}

}  // namespace

double top_k_accuracy(const ScoreMatrix& scores, std::span<const ClassId> labels, std::size_t k,
                      bool per_class_average) {
  check_rows(scores.rows(), labels.size(), "top-k accuracy");
  if (k == 0 || k > scores.cols()) {
    throw Error(ErrorCode::kInvalidArgument, "top-k: k = " + std::to_string(k) + " with " +
                                                 std::to_string(scores.cols()) + " candidates");
  }
  const auto idx = column_index(scores.candidates);
  std::vector<bool> hits(scores.rows());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    const std::size_t t = column_of(idx, labels[i]);
    const double st = scores.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t));
    std::size_t ahead = 0;
    for (std::size_t j = 0; j < scores.cols(); ++j) {
      const double s = scores.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (s > st || (s == st && scores.candidates[j] < labels[i])) ++ahead;
    }
    hits[i] = ahead < k;
  }
  return average_hits(hits, labels, per_class_average);
}

Eigen::MatrixXd softmax_probabilities(const ScoreMatrix& scores) {
  Eigen::MatrixXd p(scores.values.rows(), scores.values.cols());
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const double top = scores.values.row(r).maxCoeff();
    double z = 0.0;
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
      p(r, c) = std::exp(scores.values(r, c) - top);
      z += p(r, c);
    }
    p.row(r) /= z;
  }
  return p;
}

double log_loss(const Eigen::MatrixXd& probs, std::span<const ClassId> candidates,
                std::span<const ClassId> labels) {
  check_rows(static_cast<std::size_t>(probs.rows()), labels.size(), "log loss");
  if (static_cast<std::size_t>(probs.cols()) != candidates.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "log loss: probability columns do not match candidates");
  }
  const auto idx = column_index(candidates);
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(column_of(idx, labels[i])));
    sum -= std::log(std::clamp(p, 1e-15, 1.0));
  }
  return sum / static_cast<double>(labels.size());
}

F1Result f1_macro(std::span<const ClassId> predictions, std::span<const ClassId> labels,
                  std::span<const ClassId> candidates) {
  check_rows(predictions.size(), labels.size(), "f1");
  if (candidates.empty()) throw Error(ErrorCode::kInvalidArgument, "f1: no candidate classes");
  const auto idx = column_index(candidates);
  std::vector<std::size_t> tp(candidates.size()), fp(candidates.size()), fn(candidates.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t p = column_of(idx, predictions[i]);
    const std::size_t t = column_of(idx, labels[i]);
    if (p == t) {
      ++tp[t];
    } else {
      ++fp[p];
      ++fn[t];
    }
  }
  F1Result out;
  double sum = 0.0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    if (tp[c] + fp[c] + fn[c] == 0) {
      ++out.absent_classes;
      continue;
    }
    const double precision = tp[c] + fp[c] ? static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fp[c]) : 0.0;
    const double recall = tp[c] + fn[c] ? static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fn[c]) : 0.0;
    if (precision + recall > 0.0) sum += 2.0 * precision * recall / (precision + recall);
  }
  out.value = sum / static_cast<double>(candidates.size());
  return out;
}

std::vector<ClassId> predictions_from_scores(const ScoreMatrix& scores) {
  std::vector<ClassId> out(scores.rows());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    out[i] = scores.candidates[argmax_lowest_id(scores.values.row(static_cast<Eigen::Index>(i)).transpose(),
                                                scores.candidates)];
  }
  return out;
}

double top1_from_predictions(std::span<const ClassId> predictions, std::span<const ClassId> labels,
                             bool per_class_average) {
  check_rows(predictions.size(), labels.size(), "top-1");
  std::vector<bool> hits(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) hits[i] = predictions[i] == labels[i];
  return average_hits(hits, labels, per_class_average);
}

MetricReport evaluate(const ScoreMatrix& scores, std::span<const ClassId> labels) {
  MetricReport r;
  r.top1 = top_k_accuracy(scores, labels, 1);
  r.top5 = top_k_accuracy(scores, labels, std::min<std::size_t>(5, scores.cols()));
  r.logloss = log_loss(softmax_probabilities(scores), scores.candidates, labels);
  const auto preds = predictions_from_scores(scores);
  const F1Result f1 = f1_macro(preds, labels, scores.candidates);
  r.f1 = f1.value;
  r.f1_absent_classes = f1.absent_classes;
  return r;
}

std::string format_g6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string csv_header() { return "classifier,dataset,top1,top5,logloss,f1"; }

std::string csv_row(const std::string& classifier, const std::string& dataset, const MetricReport& r) {
  return classifier + "," + dataset + "," + format_g6(r.top1) + "," + format_g6(r.top5) + "," +
         format_g6(r.logloss) + "," + format_g6(r.f1);
}

}  // namespace zslb
