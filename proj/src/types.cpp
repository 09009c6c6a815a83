#include "swec/types.hpp"
#include "swec/parallel.hpp"

#include <cstdlib>
#include <string>

namespace swec {

std::string_view class_name(EventClass c) {
  switch (c) {
    case EventClass::CapacitorSwitching: return "capacitor_switching";
    case EventClass::TransformerEnergization: return "transformer_energization";
    case EventClass::Fault: return "fault";
    case EventClass::HighImpedanceFault: return "hif";
  }
  return "unknown";
}

BusId bus_from_number(int id) {
  for (BusId b : kEventBuses)
    if (bus_number(b) == id) return b;
  throw ParameterError("unknown bus id: " + std::to_string(id));
}

int monitored_index(BusId b) {
  for (std::size_t i = 0; i < kMonitoredBuses.size(); ++i)
    if (kMonitoredBuses[i] == b) return static_cast<int>(i);
  throw ParameterError("bus " + std::to_string(bus_number(b)) + " is not monitored");
}

unsigned default_thread_count() {
  if (const char* env = std::getenv("SWEC_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace swec
