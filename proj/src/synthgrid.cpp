#include "swec/synthgrid.hpp"

#include "swec/parallel.hpp"
#include "swec/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace swec {
namespace {

constexpr double kPi = std::numbers::pi;

// Steady-state amplitude (pu) and phase offset (deg) per monitored bus: the spatial
// signature of the feeder under load.
constexpr std::array<double, 3> kBusAmplitude = {1.000, 0.985, 0.975};
constexpr std::array<double, 3> kBusPhaseDeg = {0.0, -1.5, -2.5};

// Rows: event bus (632, 634, 671, 675, 680). Columns: monitored bus (632, 671, 675).
// Decreasing with electrical distance on the 13-bus feeder.
constexpr std::array<std::array<double, 3>, 5> kAttenuation = {{
    {1.00, 0.75, 0.60},
    {0.70, 0.50, 0.40},
    {0.75, 1.00, 0.85},
    {0.60, 0.85, 1.00},
    {0.65, 0.90, 0.75},
}};

// Rows: fault bus (632, 634, 675, 680). Columns: resistance index, low to high.
constexpr std::array<std::array<double, kNumResistances>, 4> kSagDepth = {{
    {0.70, 0.55, 0.40, 0.25, 0.12},
    {0.60, 0.45, 0.32, 0.20, 0.10},
    {0.68, 0.52, 0.38, 0.24, 0.11},
    {0.65, 0.50, 0.36, 0.22, 0.10},
}};

constexpr std::array<BusId, 4> kFaultBuses = {BusId::Bus632, BusId::Bus634, BusId::Bus675,
                                              BusId::Bus680};

// Travelling-wave ringing frequency of the inception transient, per fault bus.
constexpr std::array<double, 4> kFaultTransientHz = {7500.0, 6000.0, 7000.0, 6500.0};

constexpr double kFaultTransientPeak = 0.028;
constexpr double kFaultTransientLength = 1e-3;

constexpr int kCapacitorSizes = 8;
constexpr int kTransformerTaps = 12;
constexpr int kArcDraws = 6;

int fault_bus_index(BusId b) {
  for (std::size_t i = 0; i < kFaultBuses.size(); ++i)
    if (kFaultBuses[i] == b) return static_cast<int>(i);
  return -1;
}

int event_bus_index(BusId b) {
  for (std::size_t i = 0; i < kEventBuses.size(); ++i)
    if (kEventBuses[i] == b) return static_cast<int>(i);
  throw ParameterError("unknown event bus " + std::to_string(bus_number(b)));
}

double phase_offset(int phase) { return -2.0 * kPi * phase / 3.0; }

double bus_phase(int bus) { return kBusPhaseDeg[bus] * kPi / 180.0; }

void check_rate(double fs, double duration) {
  if (!(fs >= 1000.0)) throw ParameterError("sampling rate must be at least 1 kHz");
  if (!(duration >= 0.1)) throw ParameterError("record duration must be at least 0.1 s");
}

std::vector<PhaseMatrix<>> clean_base(double fs, Eigen::Index n, double f0) {
  const double omega = 2.0 * kPi * f0;
  std::vector<PhaseMatrix<>> out(kMonitoredBuses.size());
  for (std::size_t b = 0; b < out.size(); ++b) {
    out[b].resize(n, 3);
    for (int p = 0; p < 3; ++p)
      for (Eigen::Index k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) / fs;
        out[b](k, p) = kBusAmplitude[b] * std::cos(omega * t + phase_offset(p) + bus_phase(int(b)));
      }
  }
  return out;
}

void add_noise(std::vector<PhaseMatrix<>>& samples, std::uint64_t seed, double snr_db) {
  if (std::isinf(snr_db) && snr_db > 0) return;
  Rng rng(derive_seed(seed, SeedStream::Noise));
  const double ratio = std::pow(10.0, -snr_db / 20.0);
  for (std::size_t b = 0; b < samples.size(); ++b) {
    const double sigma = kBusAmplitude[b] / std::numbers::sqrt2 * ratio;
    for (int p = 0; p < 3; ++p)
      for (Eigen::Index k = 0; k < samples[b].rows(); ++k) samples[b](k, p) += sigma * rng.normal();
  }
}

struct ArcHalfCycle {
  double onset;  // |v| (per unit of bus amplitude) at which the arc conducts
  double step;   // voltage drop at ignition
  double slope;  // further drop per unit of |v| above onset
};

// Disturbance models. Each adds to `out` for samples at or after t0.

void add_capacitor(const EventSpec& spec, const CapacitorParams& cp, double fs,
                   std::vector<PhaseMatrix<>>& out) {
  const double i = cp.size_index;
  const double f_osc = 2000.0 - 1700.0 * i / (kCapacitorSizes - 1);
  const double tau = (2.0 + 8.0 * i / (kCapacitorSizes - 1)) * 1e-3;
  const double amp = (0.20 + 0.03 * i) * cp.amplitude_scale;
  if (amp == 0.0) return;
  const double angle = spec.inception_angle_deg * kPi / 180.0;
  const Eigen::Index k0 = static_cast<Eigen::Index>(std::ceil(spec.event_time * fs - 1e-9));
  for (std::size_t b = 0; b < out.size(); ++b) {
    const double att = attenuation(spec.location, kMonitoredBuses[b]);
    for (int p = 0; p < 3; ++p)
      for (Eigen::Index k = k0; k < out[b].rows(); ++k) {
        const double dt = static_cast<double>(k) / fs - spec.event_time;
        out[b](k, p) += att * amp * std::exp(-dt / tau) *
                        std::sin(2.0 * kPi * f_osc * dt + angle + phase_offset(p));
      }
  }
}

void add_transformer(const EventSpec& spec, const TransformerParams& tp, double fs, double f0,
                     std::vector<PhaseMatrix<>>& out) {
  const double j = static_cast<double>(tp.tap_index) / (kTransformerTaps - 1);
  const double scale = 0.5 + j;
  const std::array<int, 3> order = {2, 3, 5};
  const std::array<double, 3> harm = {0.050 * scale, 0.035 * scale, 0.020 * scale};
  const std::array<double, 3> harm_phase = {0.3, 1.1, -0.7};
  const double tau = (3.0 + 3.0 * j) / f0;
  const double sag = 0.01 + 0.03 * j;
  const double omega = 2.0 * kPi * f0;
  const double angle = spec.inception_angle_deg * kPi / 180.0;
  const Eigen::Index k0 = static_cast<Eigen::Index>(std::ceil(spec.event_time * fs - 1e-9));

  // Inrush flows only while the core is saturated: a per-phase portion of each cycle
  // whose width depends on the residual flux left by the switching instant.
  std::array<double, 3> knee{};
  for (int p = 0; p < 3; ++p)
    knee[p] = std::min(0.8, 0.1 + 0.6 * std::abs(std::sin(angle + phase_offset(p))));

  for (std::size_t b = 0; b < out.size(); ++b) {
    const double att = attenuation(spec.location, kMonitoredBuses[b]);
    for (int p = 0; p < 3; ++p)
      for (Eigen::Index k = k0; k < out[b].rows(); ++k) {
        const double t = static_cast<double>(k) / fs;
        const double env = std::exp(-(t - spec.event_time) / tau);
        const double x = omega * t + phase_offset(p) + bus_phase(int(b));
        double d = -sag * kBusAmplitude[b] * std::cos(x);
        if (std::sin(x) > knee[p]) {
          for (std::size_t h = 0; h < order.size(); ++h)
            d += harm[h] * std::cos(order[h] * x + harm_phase[h]);
        }
        out[b](k, p) += att * env * d;
      }
  }
}

void add_fault(const EventSpec& spec, const FaultParams& fp, double fs, double f0,
               std::vector<PhaseMatrix<>>& out) {
  const double depth = fault_sag_depth(spec.location, fp.resistance_index);
  if (depth == 0.0) return;
  std::array<bool, 3> faulted{};
  switch (fp.type) {
    case FaultType::LG: faulted = {true, false, false}; break;
    case FaultType::LL:
    case FaultType::LLG: faulted = {true, true, false}; break;
    case FaultType::LLLG: faulted = {true, true, true}; break;
  }
  const std::array<double, 3> ring_sign = {1.0, -1.0, 1.0};
  const double f_ring = kFaultTransientHz[fault_bus_index(spec.location)];
  const double omega = 2.0 * kPi * f0;
  const Eigen::Index k0 = static_cast<Eigen::Index>(std::ceil(spec.event_time * fs - 1e-9));

  for (std::size_t b = 0; b < out.size(); ++b) {
    const double sag = depth * attenuation(spec.location, kMonitoredBuses[b]);
    const double ring_amp =
        kFaultTransientPeak * (0.4 + 0.6 * std::sqrt(std::min(1.0, sag / 0.7)));
    for (Eigen::Index k = k0; k < out[b].rows(); ++k) {
      const double t = static_cast<double>(k) / fs;
      const double dt = t - spec.event_time;
      std::array<double, 3> v{};
      for (int p = 0; p < 3; ++p)
        v[p] = kBusAmplitude[b] * std::cos(omega * t + phase_offset(p) + bus_phase(int(b)));
      std::array<double, 3> d{};
      if (fp.type == FaultType::LL) {
        // Ungrounded: the two faulted phases collapse toward each other.
        d[0] = -sag * (v[0] - v[1]) / 2.0;
        d[1] = sag * (v[0] - v[1]) / 2.0;
      } else {
        for (int p = 0; p < 3; ++p)
          if (faulted[p]) d[p] = -sag * v[p];
      }
      if (dt < kFaultTransientLength) {
        // Linear taper to zero at the end of the transient.
        const double ring = ring_amp * (1.0 - dt / kFaultTransientLength) *
                            std::sin(2.0 * kPi * f_ring * dt);
        for (int p = 0; p < 3; ++p)
          if (faulted[p]) d[p] += ring_sign[p] * ring;
      }
      for (int p = 0; p < 3; ++p) out[b](k, p) += d[p];
    }
  }
}

void add_hif(const EventSpec& spec, const HifParams& hp, double fs, double f0, double duration,
             std::uint64_t seed, std::vector<PhaseMatrix<>>& out) {
  // Two-source arc: the arc conducts only while |v| exceeds a per-half-cycle onset
  // voltage, which differs between polarities. While conducting it drops the bus
  // voltage by an ignition step plus a term proportional to the excess; the total
  // drop stays below 2 % of nominal.
  const int phase = hp.draw_index % 3;
  const double onset_pos = 0.20 + 0.03 * hp.draw_index;
  const double onset_neg = onset_pos + 0.10;
  const double omega = 2.0 * kPi * f0;

  const auto half_index = [&](double x) {
    return static_cast<long>(std::floor((x + kPi / 2.0) / kPi));
  };
  const double x0 = omega * spec.event_time + phase_offset(phase);
  const long h0 = half_index(x0);
  const long n_half = static_cast<long>(std::ceil((duration - spec.event_time) * 2.0 * f0)) + 4;

  Rng rng(derive_seed(seed, SeedStream::Arc, static_cast<std::uint64_t>(hp.draw_index)));
  std::vector<ArcHalfCycle> halves(static_cast<std::size_t>(n_half));
  for (long h = 0; h < n_half; ++h) {
    const bool positive = ((h0 + h) % 2 + 2) % 2 == 0;
    const double onset = (positive ? onset_pos : onset_neg) + rng.uniform(0.0, 0.08);
    const double step = rng.uniform(0.010, 0.015);
    const double peak_drop = rng.uniform(0.015, 0.018);
    halves[static_cast<std::size_t>(h)] = {onset, step, (peak_drop - step) / (1.0 - onset)};
  }

  const Eigen::Index k0 = static_cast<Eigen::Index>(std::ceil(spec.event_time * fs - 1e-9));
  for (std::size_t b = 0; b < out.size(); ++b) {
    const double att = attenuation(spec.location, kMonitoredBuses[b]);
    for (Eigen::Index k = k0; k < out[b].rows(); ++k) {
      const double t = static_cast<double>(k) / fs;
      const double x = omega * t + phase_offset(phase) + bus_phase(int(b));
      const double v = std::cos(x);
      const long h = std::clamp(half_index(x) - h0, 0L, n_half - 1);
      const ArcHalfCycle& arc = halves[static_cast<std::size_t>(h)];
      const double excess = std::abs(v) - arc.onset;
      if (excess <= 0.0) continue;
      out[b](k, phase) -=
          att * kBusAmplitude[b] * std::copysign(arc.step + arc.slope * excess, v);
    }
  }
}

}  // namespace

double attenuation(BusId location, BusId monitored) {
  return kAttenuation[event_bus_index(location)][monitored_index(monitored)];
}

double fault_sag_depth(BusId location, int resistance_index) {
  const int row = fault_bus_index(location);
  if (row < 0) throw ParameterError("bus " + std::to_string(bus_number(location)) +
                                    " is not a fault location");
  if (resistance_index == kOpenCircuitResistance) return 0.0;
  if (resistance_index < 0 || resistance_index >= kNumResistances)
    throw ParameterError("fault resistance index out of range");
  return kSagDepth[row][resistance_index];
}

EventSpec make_event_spec(EventClass cls, double inception_angle_deg, BusId location,
                          ClassParams params, const GeneratorOptions& options) {
  EventSpec spec;
  spec.event_class = cls;
  spec.inception_angle_deg = inception_angle_deg;
  spec.location = location;
  spec.params = std::move(params);
  spec.event_time = options.event_base_time + inception_angle_deg / (360.0 * options.f0);
  return spec;
}

void validate_spec(const EventSpec& spec, const GeneratorOptions& options) {
  if (static_cast<int>(spec.params.index()) != class_index(spec.event_class))
    throw ParameterError("class parameters do not match event class");
  if (!(spec.inception_angle_deg >= 0.0 && spec.inception_angle_deg < 360.0))
    throw ParameterError("inception angle must lie in [0, 360)");
  event_bus_index(spec.location);
  const double cycle = 1.0 / options.f0;
  if (!(spec.event_time > cycle && spec.event_time < options.duration - 2.0 * cycle))
    throw ParameterError("event time must leave one cycle before and two after the event");

  if (const auto* cp = std::get_if<CapacitorParams>(&spec.params)) {
    if (cp->size_index < 0 || cp->size_index >= kCapacitorSizes)
      throw ParameterError("capacitor size index out of range");
    if (!(cp->amplitude_scale >= 0.0)) throw ParameterError("negative capacitor amplitude");
  } else if (const auto* tp = std::get_if<TransformerParams>(&spec.params)) {
    if (tp->tap_index < 0 || tp->tap_index >= kTransformerTaps)
      throw ParameterError("transformer tap index out of range");
  } else if (const auto* fp = std::get_if<FaultParams>(&spec.params)) {
    if (fault_bus_index(spec.location) < 0)
      throw ParameterError("faults are located at buses 632, 634, 675 or 680");
    if (fp->resistance_index < 0 || fp->resistance_index > kOpenCircuitResistance)
      throw ParameterError("fault resistance index out of range");
  } else if (const auto* hp = std::get_if<HifParams>(&spec.params)) {
    if (hp->draw_index < 0 || hp->draw_index >= kArcDraws)
      throw ParameterError("arc draw index out of range");
  }
}

WaveformRecord synth_steady(double fs, double duration, std::uint64_t seed,
                            const GeneratorOptions& options) {
  check_rate(fs, duration);
  WaveformRecord rec;
  rec.fs = fs;
  rec.duration = duration;
  rec.seed = seed;
  const auto n = static_cast<Eigen::Index>(std::llround(fs * duration));
  rec.samples = clean_base(fs, n, options.f0);
  add_noise(rec.samples, seed, options.snr_db);
  return rec;
}

WaveformRecord synth_event(const EventSpec& spec, double fs, std::uint64_t seed,
                           const GeneratorOptions& options) {
  check_rate(fs, options.duration);
  validate_spec(spec, options);
  WaveformRecord rec;
  rec.spec = spec;
  rec.fs = fs;
  rec.duration = options.duration;
  rec.seed = seed;
  const auto n = static_cast<Eigen::Index>(std::llround(fs * options.duration));
  rec.samples = clean_base(fs, n, options.f0);

  std::visit(
      [&](const auto& params) {
        using P = std::decay_t<decltype(params)>;
        if constexpr (std::is_same_v<P, CapacitorParams>)
          add_capacitor(spec, params, fs, rec.samples);
        else if constexpr (std::is_same_v<P, TransformerParams>)
          add_transformer(spec, params, fs, options.f0, rec.samples);
        else if constexpr (std::is_same_v<P, FaultParams>)
          add_fault(spec, params, fs, options.f0, rec.samples);
        else
          add_hif(spec, params, fs, options.f0, options.duration, seed, rec.samples);
      },
      spec.params);

  add_noise(rec.samples, seed, options.snr_db);
  return rec;
}

GeneratorGrid GeneratorGrid::defaults() {
  GeneratorGrid g;
  for (int i = 0; i < 8; ++i) g.capacitor.angles.push_back(45.0 * i);
  for (int i = 0; i < kCapacitorSizes; ++i) g.capacitor.sizes.push_back(i);
  for (int i = 0; i < 12; ++i) g.transformer.angles.push_back(30.0 * i);
  for (int i = 0; i < kTransformerTaps; ++i) g.transformer.taps.push_back(i);
  g.fault.types = {FaultType::LG, FaultType::LL, FaultType::LLG, FaultType::LLLG};
  g.fault.locations = {kFaultBuses.begin(), kFaultBuses.end()};
  for (int i = 0; i < kNumResistances; ++i) g.fault.resistances.push_back(i);
  g.fault.angles = {20.0, 110.0, 200.0, 290.0};
  g.hif.locations = {BusId::Bus634, BusId::Bus671, BusId::Bus680};
  g.hif.angles = {0.0, 90.0, 180.0, 270.0};
  for (int i = 0; i < kArcDraws; ++i) g.hif.draws.push_back(i);
  return g;
}

std::array<int, kNumClasses> GeneratorGrid::product_counts() const {
  auto n = [](const auto& v) { return static_cast<int>(v.size()); };
  return {n(capacitor.angles) * n(capacitor.sizes), n(transformer.angles) * n(transformer.taps),
          n(fault.types) * n(fault.locations) * n(fault.resistances) * n(fault.angles),
          n(hif.locations) * n(hif.angles) * n(hif.draws)};
}

std::vector<EventSpec> GeneratorGrid::enumerate(const GeneratorOptions& options) const {
  std::vector<EventSpec> specs;
  for (double a : capacitor.angles)
    for (int s : capacitor.sizes)
      specs.push_back(make_event_spec(EventClass::CapacitorSwitching, a, capacitor.location,
                                      CapacitorParams{s, 1.0}, options));
  for (double a : transformer.angles)
    for (int tap : transformer.taps)
      specs.push_back(make_event_spec(EventClass::TransformerEnergization, a, transformer.location,
                                      TransformerParams{tap}, options));
  for (FaultType type : fault.types)
    for (BusId loc : fault.locations)
      for (int r : fault.resistances)
        for (double a : fault.angles)
          specs.push_back(make_event_spec(EventClass::Fault, a, loc, FaultParams{type, r}, options));
  for (BusId loc : hif.locations)
    for (double a : hif.angles)
      for (int d : hif.draws)
        specs.push_back(
            make_event_spec(EventClass::HighImpedanceFault, a, loc, HifParams{d}, options));
  return specs;
}

Dataset build_dataset(const DatasetConfig& config) {
  const auto products = config.grid.product_counts();
  for (int c = 0; c < kNumClasses; ++c)
    if (products[c] != config.grid.declared_counts[c])
      throw ConfigError("grid for class " + std::to_string(c + 1) + " yields " +
                        std::to_string(products[c]) + " records but " +
                        std::to_string(config.grid.declared_counts[c]) + " are declared");

  const auto specs = config.grid.enumerate(config.options);
  for (const auto& s : specs) validate_spec(s, config.options);

  Dataset ds;
  ds.fs = config.fs;
  ds.global_seed = config.global_seed;
  ds.grid = config.grid;
  ds.options = config.options;
  ds.counts = products;
  ds.records.resize(specs.size());
  parallel_for(specs.size(), config.threads, [&](std::size_t i) {
    ds.records[i] = synth_event(specs[i], config.fs,
                                derive_seed(config.global_seed, SeedStream::Record, i),
                                config.options);
  });
  return ds;
}

Eigen::Index window_length(double fs, double f0) {
  return 2 * static_cast<Eigen::Index>(std::floor(fs / (2.0 * f0)));
}

Eigen::Index event_sample(const WaveformRecord& record) {
  if (!record.spec) throw ParameterError("steady-state record has no event");
  return static_cast<Eigen::Index>(std::ceil(record.spec->event_time * record.fs - 1e-9));
}

double detection_jitter(const WaveformRecord& record, const GeneratorOptions& options) {
  if (options.jitter_max <= 0.0) return 0.0;
  Rng rng(derive_seed(record.seed, SeedStream::Jitter));
  return rng.uniform() * options.jitter_max;
}

MultiBusWindow extract_window(const WaveformRecord& record, double jitter, double f0) {
  if (!record.spec) throw ParameterError("steady-state record has no event");
  if (jitter < 0.0) throw ParameterError("negative detection jitter");
  const Eigen::Index w = window_length(record.fs, f0);
  const auto start =
      static_cast<Eigen::Index>(std::ceil((record.spec->event_time + jitter) * record.fs - 1e-9));
  if (start + w > record.length())
    throw BoundsError("window [" + std::to_string(start) + ", " + std::to_string(start + w) +
                      ") exceeds record length " + std::to_string(record.length()));
  MultiBusWindow out;
  for (std::size_t b = 0; b < kMonitoredBuses.size(); ++b)
    out.push_back({kMonitoredBuses[b], record.samples[b].middleRows(start, w)});
  return out;
}

MultiBusWindow extract_window(const WaveformRecord& record, const GeneratorOptions& options) {
  return extract_window(record, detection_jitter(record, options), options.f0);
}

}  // namespace swec
