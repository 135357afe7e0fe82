#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ctcv {

// Non-negative ratio of counts, kept exact for comparison; den == 0 encodes
// the zero-denominator convention value 0.
struct Fraction {
  std::uint64_t num = 0;
  std::uint64_t den = 0;

  double value() const {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  }
};

// Positive class is COVID.
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  void add(bool predicted_positive, bool actually_positive);
  std::uint64_t total() const { return tp + tn + fp + fn; }

  // (TP + TN) / (TP + FP + TN + FN)
  Fraction accuracy() const { return {tp + tn, total()}; }
  Fraction precision() const { return {tp, tp + fp}; }
  Fraction recall() const { return {tp, tp + fn}; }
  // 2PR / (P + R), which reduces to 2TP / (2TP + FP + FN); 0 when TP = 0.
  Fraction f1() const { return tp == 0 ? Fraction{0, 0} : Fraction{2 * tp, 2 * tp + fp + fn}; }

  bool operator==(const ConfusionMatrix&) const = default;
};

struct ScoredSample {
  double covid_probability = 0.0;
  bool positive = false;
};

// P(score of a random positive > score of a random negative), ties counted
// one half. Throws InvalidArgument unless both classes are present.
double compute_auc(std::span<const ScoredSample> scores);

struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<double> auc;  // absent when only one class was evaluated
  ConfusionMatrix confusion;
  double loss = 0.0;
};

inline constexpr double kDecisionThreshold = 0.5;

// COVID is predicted when covid_probability >= threshold.
MetricsReport compute_metrics(std::span<const ScoredSample> scores, double mean_loss,
                              double threshold = kDecisionThreshold);

// "key value" lines, six decimals for reals: accuracy, precision, recall, f1,
// auc (omitted when undefined), loss, then integer tp, tn, fp, fn.
std::string format_metrics(const MetricsReport& report);
MetricsReport parse_metrics(const std::string& text);

}  // namespace ctcv
