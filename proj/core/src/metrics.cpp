#include "aigflow/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "aigflow/error.hpp"

namespace aigflow {

namespace {

struct PrPoint {
  double recall;
  double precision;
};

// One point per distinct score, highest first.
std::vector<PrPoint> pr_curve(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::kShapeMismatch, "pr curve: score/label size mismatch");
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (positives == 0) throw Error(ErrorCode::kInvalidArgument, "pr curve: no positive pairs");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  std::vector<PrPoint> curve;
  std::size_t tp = 0, seen = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    tp += labels[order[i]] == 1;
    ++seen;
    if (i + 1 < order.size() && scores[order[i + 1]] == scores[order[i]]) continue;
    curve.push_back({static_cast<double>(tp) / positives, static_cast<double>(tp) / seen});
  }
  return curve;
}

}  // namespace

double average_precision(std::span<const double> scores, std::span<const int> labels) {
  double ap = 0.0, prev = 0.0;
  for (const auto& p : pr_curve(scores, labels)) {
    ap += (p.recall - prev) * p.precision;
    prev = p.recall;
  }
  return ap;
}

double pr_auc(std::span<const double> scores, std::span<const int> labels) {
  const auto curve = pr_curve(scores, labels);
  double area = 0.0;
  PrPoint prev{0.0, curve.front().precision};
  for (const auto& p : curve) {
    area += (p.recall - prev.recall) * (p.precision + prev.precision) / 2.0;
    prev = p;
  }
  return area;
}

double threshold_accuracy(std::span<const double> probs, std::span<const int> labels) {
  if (probs.size() != labels.size()) throw Error(ErrorCode::kShapeMismatch, "accuracy: size mismatch");
  if (probs.empty()) throw Error(ErrorCode::kInvalidArgument, "accuracy: no samples");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) hit += (probs[i] >= 0.5 ? 1 : 0) == labels[i];
  return static_cast<double>(hit) / probs.size();
}

double tt_prediction_distance(std::span<const double> probs64, std::uint64_t truth) {
  if (probs64.size() != 64) throw Error(ErrorCode::kShapeMismatch, "tt distance: expected 64 probabilities");
  int diff = 0;
  for (std::size_t b = 0; b < 64; ++b) diff += (probs64[b] >= 0.5) != (((truth >> b) & 1U) != 0);
  return diff / 64.0;
}

}  // namespace aigflow
