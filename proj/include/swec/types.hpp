#ifndef SWEC_TYPES_HPP
#define SWEC_TYPES_HPP

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace swec {

template <typename Scalar = double>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar = double>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// N x 3 block of phase voltages, columns (va, vb, vc).
template <typename Scalar = double>
using PhaseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, 3>;

// Error categories. Each maps to a one-line diagnostic category in the CLI.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
  virtual const char* category() const noexcept { return "error"; }
};

class ParameterError : public Error {
public:
  using Error::Error;
  const char* category() const noexcept override { return "parameter"; }
};

class ConfigError : public Error {
public:
  using Error::Error;
  const char* category() const noexcept override { return "config"; }
};

class BoundsError : public Error {
public:
  using Error::Error;
  const char* category() const noexcept override { return "bounds"; }
};

class FormatError : public Error {
public:
  using Error::Error;
  const char* category() const noexcept override { return "format"; }
};

class TrainingError : public Error {
public:
  using Error::Error;
  const char* category() const noexcept override { return "training"; }
};

/// Integer codes are stable across serialization.
enum class EventClass : int {
  CapacitorSwitching = 1,
  TransformerEnergization = 2,
  Fault = 3,
  HighImpedanceFault = 4,
};

inline constexpr int kNumClasses = 4;

inline constexpr std::array<EventClass, kNumClasses> kAllClasses = {
    EventClass::CapacitorSwitching, EventClass::TransformerEnergization,
    EventClass::Fault, EventClass::HighImpedanceFault};

constexpr int class_code(EventClass c) { return static_cast<int>(c); }
constexpr int class_index(EventClass c) { return static_cast<int>(c) - 1; }

inline EventClass class_from_code(int code) {
  if (code < 1 || code > kNumClasses)
    throw ParameterError("event class code out of range: " + std::to_string(code));
  return static_cast<EventClass>(code);
}

inline EventClass class_from_index(int index) { return class_from_code(index + 1); }

std::string_view class_name(EventClass c);

enum class BusId : int {
  Bus632 = 632,
  Bus634 = 634,
  Bus671 = 671,
  Bus675 = 675,
  Bus680 = 680,
};

/// Buses carrying a measurement unit, in stacking (ascending id) order.
inline constexpr std::array<BusId, 3> kMonitoredBuses = {BusId::Bus632, BusId::Bus671,
                                                         BusId::Bus675};

/// Every bus that can host an event, ascending.
inline constexpr std::array<BusId, 5> kEventBuses = {BusId::Bus632, BusId::Bus634, BusId::Bus671,
                                                     BusId::Bus675, BusId::Bus680};

constexpr int bus_number(BusId b) { return static_cast<int>(b); }

BusId bus_from_number(int id);

/// Position of a monitored bus in kMonitoredBuses; throws for unmonitored buses.
int monitored_index(BusId b);

}  // namespace swec

#endif  // SWEC_TYPES_HPP
