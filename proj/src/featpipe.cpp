#include "swec/featpipe.hpp"

#include <algorithm>
#include <string>

namespace swec {

std::vector<BusId> canonical_buses(std::span<const BusId> buses) {
  if (buses.empty()) throw ParameterError("bus subset is empty");
  std::vector<BusId> out(buses.begin(), buses.end());
  for (BusId b : out) monitored_index(b);
  std::sort(out.begin(), out.end(),
            [](BusId a, BusId b) { return bus_number(a) < bus_number(b); });
  if (std::adjacent_find(out.begin(), out.end()) != out.end())
    throw ParameterError("bus subset contains a duplicate");
  return out;
}

FeatureMatrix featurize(const MultiBusWindow& window, std::span<const BusId> buses) {
  const auto order = canonical_buses(buses);
  FeatureMatrix fm;
  fm.buses = order;
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto it = std::find_if(window.begin(), window.end(),
                                 [&](const BusWindow& w) { return w.bus == order[r]; });
    if (it == window.end())
      throw ParameterError("bus " + std::to_string(bus_number(order[r])) + " missing from window");
    if (it->samples.rows() % 2 != 0) throw ParameterError("window width must be even");
    const auto level = dwt_db4_level1(clarke_mode1(it->samples));
    const VectorX<double> row = normalize_abs_peak(level.detail);
    if (r == 0) fm.values.resize(static_cast<Eigen::Index>(order.size()), row.size());
    if (row.size() != fm.values.cols()) throw ParameterError("bus windows differ in width");
    fm.values.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return fm;
}

double detail_energy(const PhaseMatrix<>& phases) {
  return dwt_db4_level1(clarke_mode1(phases)).detail.squaredNorm();
}

}  // namespace swec
