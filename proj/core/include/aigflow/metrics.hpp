#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace aigflow {

/// Step-wise average precision: sum over distinct score thresholds (high to
/// low) of (R_n - R_{n-1}) * P_n. Throws when there are no positives.
double average_precision(std::span<const double> scores, std::span<const int> labels);

/// Trapezoidal area under the precision-recall curve, starting at
/// (recall 0, precision of the top-ranked group).
double pr_auc(std::span<const double> scores, std::span<const int> labels);

/// Fraction of predictions that land on the label's side of 0.5.
double threshold_accuracy(std::span<const double> probs, std::span<const int> labels);

/// Normalized Hamming distance between a thresholded 64-bit prediction and the truth.
double tt_prediction_distance(std::span<const double> probs64, std::uint64_t truth);

}  // namespace aigflow
