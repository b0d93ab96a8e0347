#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "core/score_matrix.hpp"

namespace zslb {

struct MetricReport {
  double top1 = 0.0;     // percent
  double top5 = 0.0;     // percent
  double logloss = 0.0;  // nats
  double f1 = 0.0;       // macro, [0, 1]
  // Candidate classes with neither a label nor a prediction; they enter the
  // macro F1 average as 0.
  std::size_t f1_absent_classes = 0;
};

// Hit = true class among the k best candidates, ordered by score descending
// and then by class id ascending.
double top_k_accuracy(const ScoreMatrix& scores, std::span<const ClassId> labels, std::size_t k,
                      bool per_class_average = true);

// Row-wise max-shifted softmax.
Eigen::MatrixXd softmax_probabilities(const ScoreMatrix& scores);

// Mean negative natural log of the true-class probability, clipped to
// [1e-15, 1].
double log_loss(const Eigen::MatrixXd& probs, std::span<const ClassId> candidates,
                std::span<const ClassId> labels);

struct F1Result {
  double value = 0.0;
  std::size_t absent_classes = 0;
};

F1Result f1_macro(std::span<const ClassId> predictions, std::span<const ClassId> labels,
                  std::span<const ClassId> candidates);

// Per-row argmax, ties to the lowest class id.
std::vector<ClassId> predictions_from_scores(const ScoreMatrix& scores);

// Top-1 from hard predictions (used for fusion outputs, which carry no scores).
double top1_from_predictions(std::span<const ClassId> predictions, std::span<const ClassId> labels,
                             bool per_class_average = true);

// top-1, top-min(5, C), natural-log LogLoss and macro F1.
MetricReport evaluate(const ScoreMatrix& scores, std::span<const ClassId> labels);

// "classifier,dataset,top1,top5,logloss,f1" with 6 significant digits.
std::string csv_header();
std::string csv_row(const std::string& classifier, const std::string& dataset, const MetricReport& r);
std::string format_g6(double v);

}  // namespace zslb
