#ifndef SWEC_EXPHARNESS_HPP
#define SWEC_EXPHARNESS_HPP

// Experiment orchestration: splits, single pipeline runs, the sampling-rate and
// placement sweeps, and the method comparison, plus their on-disk artifacts.

#include "swec/config.hpp"
#include "swec/featpipe.hpp"
#include "swec/metrics.hpp"
#include "swec/persist.hpp"
#include "swec/synthgrid.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace swec {

/// Feature matrices and labels of every record for one bus subset.
struct PreparedData {
  double fs = 0.0;
  BusSubset buses;
  std::vector<FeatureMatrix> features;
  std::vector<EventClass> labels;
};

PreparedData prepare_features(const Dataset& ds, const BusSubset& buses);

struct SplitIndex {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending
};

/// Largest-remainder apportionment of (1 - train_fraction) * count over the classes.
/// Ties in the remainder go to the lower class code.
std::array<int, kNumClasses> apportion_test_counts(const std::array<int, kNumClasses>& counts,
                                                   double train_fraction);

/// Per-class seeded shuffle; the first apportioned indices of each class form the test set.
SplitIndex split_stratified(std::span<const EventClass> labels, double train_fraction,
                            std::uint64_t seed);

/// FNV-1a over the train then test index sets.
std::uint64_t split_fingerprint(const SplitIndex& split);
std::string fingerprint_hex(std::uint64_t fingerprint);

struct MethodRun {
  Method method = Method::Cnn;
  std::uint64_t seed = 0;
  std::uint64_t fingerprint = 0;
  MetricsReport report;
  ModelArtifact model;
  std::vector<double> loss_trace;  // CNN only
};

EventClass predict_artifact(const ModelArtifact& model, const FeatureMatrix& x);

MetricsReport evaluate(const ModelArtifact& model, const PreparedData& data,
                       std::span<const std::size_t> indices);

/// Trains `method` on the train indices with every seed taken from `run_seed` and
/// evaluates it on the test indices.
MethodRun train_and_evaluate(const PreparedData& data, const SplitIndex& split, Method method,
                             const ExperimentConfig& config, std::uint64_t run_seed);

/// Dataset, windows, features, split, training and evaluation for the first repeat seed.
/// Stage failures are rethrown with the same category and the stage named.
MethodRun run_pipeline(const ExperimentConfig& config, double fs, const BusSubset& buses,
                       Method method);

struct SweepRow {
  double fs = 0.0;
  BusSubset buses;
  std::vector<double> accuracies;  // one per repeat
  double mean_accuracy = 0.0;
};

/// CNN on all monitored buses at each configured rate, ascending by rate.
std::vector<SweepRow> sweep_sampling_rate(const ExperimentConfig& config);

/// CNN at config.fs for each configured bus subset, in configuration order.
std::vector<SweepRow> sweep_placement(const ExperimentConfig& config);

struct MethodSummary {
  Method method = Method::Cnn;
  double accuracy = 0.0;
  AggregateMetrics macro;  // means over repeats with a defined value
};

struct Comparison {
  /// Repeat-major: runs[r * methods + m].
  std::vector<MethodRun> runs;
  std::vector<MethodSummary> summary;  // comparison-table row order
  int repeats = 0;
};

Comparison compare_methods(const ExperimentConfig& config);

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows, bool by_fs);
void write_compare_csv(std::ostream& os, const Comparison& cmp);
void write_compare_runs_csv(std::ostream& os, const Comparison& cmp, int num_methods);

/// Run directory layout: manifest.json, reports/*.csv, confusion/*.csv, models/*.bin.
void save_comparison(const std::filesystem::path& dir, const ExperimentConfig& config,
                     const Comparison& cmp);
void save_sweep(const std::filesystem::path& dir, const ExperimentConfig& config,
                const std::vector<SweepRow>& rows, bool by_fs);

/// One CSV row per per-run report file under `dir/reports`, sorted by file name.
void aggregate_reports(const std::filesystem::path& dir, std::ostream& os);

}  // namespace swec

#endif  // SWEC_EXPHARNESS_HPP
