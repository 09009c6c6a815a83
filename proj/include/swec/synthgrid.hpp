#ifndef SWEC_SYNTHGRID_HPP
#define SWEC_SYNTHGRID_HPP

// Analytic surrogate for feeder event data: balanced three-phase voltages at the
// monitored buses plus one parametric disturbance model per event class.

#include "swec/types.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <variant>
#include <vector>

namespace swec {

struct GeneratorOptions {
  double f0 = 60.0;
  double duration = 0.15;
  /// Events start at event_base_time plus the inception-angle offset within one cycle.
  double event_base_time = 0.05;
  /// Signal-to-noise ratio of the additive white Gaussian noise. +inf disables noise.
  double snr_db = 60.0;
  /// Detection latency is drawn uniformly in [0, jitter_max] seconds; 0 disables it.
  double jitter_max = 0.5e-3;
};

struct CapacitorParams {
  int size_index = 0;  // 0..7
  double amplitude_scale = 1.0;
};

struct TransformerParams {
  int tap_index = 0;  // 0..11
};

enum class FaultType { LG, LL, LLG, LLLG };

inline constexpr int kNumResistances = 5;
/// Resistance index past the grid that stands for an open circuit (R = infinity).
inline constexpr int kOpenCircuitResistance = kNumResistances;

struct FaultParams {
  FaultType type = FaultType::LG;
  int resistance_index = 0;  // 0..4, or kOpenCircuitResistance
};

struct HifParams {
  int draw_index = 0;  // 0..5
};

using ClassParams = std::variant<CapacitorParams, TransformerParams, FaultParams, HifParams>;

struct EventSpec {
  EventClass event_class = EventClass::CapacitorSwitching;
  double inception_angle_deg = 0.0;
  BusId location = BusId::Bus675;
  ClassParams params;
  double event_time = 0.0;
};

/// Builds a spec whose event_time places the onset at the requested phase-a angle in
/// the cycle that starts at options.event_base_time.
EventSpec make_event_spec(EventClass cls, double inception_angle_deg, BusId location,
                          ClassParams params, const GeneratorOptions& options = {});

void validate_spec(const EventSpec& spec, const GeneratorOptions& options = {});

struct WaveformRecord {
  std::optional<EventSpec> spec;  // empty for steady-state records
  double fs = 0.0;
  double duration = 0.0;
  /// One N x 3 block per monitored bus, in kMonitoredBuses order.
  std::vector<PhaseMatrix<>> samples;
  std::uint64_t seed = 0;

  Eigen::Index length() const { return samples.empty() ? 0 : samples.front().rows(); }
  const PhaseMatrix<>& bus(BusId b) const { return samples.at(monitored_index(b)); }
};

WaveformRecord synth_steady(double fs, double duration, std::uint64_t seed,
                            const GeneratorOptions& options = {});

WaveformRecord synth_event(const EventSpec& spec, double fs, std::uint64_t seed,
                           const GeneratorOptions& options = {});

/// Attenuation of a disturbance travelling from an event bus to a monitored bus, in (0, 1].
double attenuation(BusId location, BusId monitored);

/// Sag depth at the fault location before attenuation; 0 for the open-circuit index.
double fault_sag_depth(BusId location, int resistance_index);

// Parameter grids. Each class's record count is the product of its axis lengths.
struct CapacitorGrid {
  std::vector<double> angles;
  std::vector<int> sizes;
  BusId location = BusId::Bus675;
};

struct TransformerGrid {
  std::vector<double> angles;
  std::vector<int> taps;
  BusId location = BusId::Bus634;
};

struct FaultGrid {
  std::vector<FaultType> types;
  std::vector<BusId> locations;
  std::vector<int> resistances;
  std::vector<double> angles;
};

struct HifGrid {
  std::vector<BusId> locations;
  std::vector<double> angles;
  std::vector<int> draws;
};

struct GeneratorGrid {
  CapacitorGrid capacitor;
  TransformerGrid transformer;
  FaultGrid fault;
  HifGrid hif;
  std::array<int, kNumClasses> declared_counts{64, 144, 320, 72};

  static GeneratorGrid defaults();
  std::array<int, kNumClasses> product_counts() const;
  /// Every spec in enumeration order: class 1 first, then 2, 3, 4.
  std::vector<EventSpec> enumerate(const GeneratorOptions& options) const;
};

struct DatasetConfig {
  GeneratorGrid grid = GeneratorGrid::defaults();
  GeneratorOptions options;
  double fs = 20000.0;
  std::uint64_t global_seed = 1;
  unsigned threads = 0;  // 0 = implementation default
};

struct Dataset {
  std::vector<WaveformRecord> records;
  std::array<int, kNumClasses> counts{};
  double fs = 0.0;
  std::uint64_t global_seed = 0;
  GeneratorGrid grid;
  GeneratorOptions options;

  EventClass label(std::size_t i) const { return records.at(i).spec->event_class; }
};

/// Throws ConfigError when a grid product disagrees with its declared count.
Dataset build_dataset(const DatasetConfig& config);

/// Window length in samples: one nominal cycle rounded down to an even count.
Eigen::Index window_length(double fs, double f0 = 60.0);

/// First sample at or after the event onset.
Eigen::Index event_sample(const WaveformRecord& record);

/// Seeded detection latency for a record, in seconds.
double detection_jitter(const WaveformRecord& record, const GeneratorOptions& options);

struct BusWindow {
  BusId bus;
  PhaseMatrix<> samples;  // W x 3
};

using MultiBusWindow = std::vector<BusWindow>;

/// One-cycle window per monitored bus starting at event onset plus `jitter` seconds.
MultiBusWindow extract_window(const WaveformRecord& record, double jitter, double f0 = 60.0);

/// Same, with the record's seeded jitter.
MultiBusWindow extract_window(const WaveformRecord& record, const GeneratorOptions& options);

}  // namespace swec

#endif  // SWEC_SYNTHGRID_HPP
