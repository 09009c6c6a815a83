#ifndef SWEC_METRICS_HPP
#define SWEC_METRICS_HPP

// Confusion matrix and one-vs-rest classification metrics with macro and micro
// aggregation. Undefined ratios (0/0) are carried as empty optionals.

#include "swec/types.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>

namespace swec {

/// counts(predicted, target), zero-based class indices.
struct ConfusionMatrix {
  Eigen::Matrix<std::int64_t, kNumClasses, kNumClasses> counts =
      Eigen::Matrix<std::int64_t, kNumClasses, kNumClasses>::Zero();

  std::int64_t total() const { return counts.sum(); }
  std::int64_t correct() const { return counts.trace(); }
  double accuracy() const;

  static ConfusionMatrix from_rows(const std::array<std::array<std::int64_t, kNumClasses>,
                                                    kNumClasses>& rows);
  friend bool operator==(const ConfusionMatrix& a, const ConfusionMatrix& b) {
    return a.counts == b.counts;
  }
};

ConfusionMatrix confusion(std::span<const EventClass> predicted,
                          std::span<const EventClass> target);

/// Integer-code variant; codes outside 1..4 raise ParameterError.
ConfusionMatrix confusion(std::span<const int> predicted, std::span<const int> target);

struct ClassMetrics {
  EventClass event_class = EventClass::CapacitorSwitching;
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::optional<double> precision, recall, f1, fpr;
};

/// Target class against all other classes merged.
ClassMetrics class_metrics(const ConfusionMatrix& cm, EventClass c);

/// Harmonic mean of precision and recall; undefined if either is undefined or both are 0.
std::optional<double> f1_score(std::optional<double> precision, std::optional<double> recall);

struct AggregateMetrics {
  std::optional<double> precision, recall, f1, fpr;
};

struct MetricsReport {
  ConfusionMatrix confusion;
  double accuracy = 0.0;
  std::array<ClassMetrics, kNumClasses> per_class;
  /// Unweighted mean over classes with a defined value; F1 from macro PRE and REC.
  AggregateMetrics macro;
  /// From pooled TP/FP/FN/TN over all classes.
  AggregateMetrics micro;
  /// Per-class PRE/REC/FPR values left out of the macro means because they were 0/0.
  int undefined_excluded = 0;
};

MetricsReport aggregate(const ConfusionMatrix& cm);

/// Percentage with two decimals, half-up; "NA" when undefined.
std::string format_percent(std::optional<double> fraction);

// Report CSV:
//   method,acc,pre_macro,rec_macro,f1_macro,fpr_macro
//   <name>,<five percentages>
//   class,pre,rec,f1,fpr
//   1..4,<four percentages>
//   confusion,t1,t2,t3,t4
//   p1..p4,<four counts>
void write_report_csv(std::ostream& os, const std::string& method, const MetricsReport& report);

/// Writes the 4x4 count block alone, rows = predicted class.
void write_confusion_csv(std::ostream& os, const ConfusionMatrix& cm);

struct ParsedReport {
  std::string method;
  MetricsReport report;
};

/// Reads write_report_csv output. The report is rebuilt from the confusion block and
/// every printed value must match it; mismatches and malformed lines raise FormatError.
ParsedReport read_report_csv(std::istream& is, const std::string& source = "report");

}  // namespace swec

#endif  // SWEC_METRICS_HPP
