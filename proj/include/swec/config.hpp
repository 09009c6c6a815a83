#ifndef SWEC_CONFIG_HPP
#define SWEC_CONFIG_HPP

#include "swec/baselines.hpp"
#include "swec/synthgrid.hpp"
#include "swec/tinycnn.hpp"
#include "swec/types.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace swec {

enum class Method { Autoencoder, Svm, Tmlp, Cnn };

/// Comparison-table row order.
inline constexpr std::array<Method, 4> kAllMethods = {Method::Autoencoder, Method::Svm,
                                                      Method::Tmlp, Method::Cnn};

std::string_view method_name(Method m);
Method method_from_name(std::string_view name);

using BusSubset = std::vector<BusId>;

/// The three single-unit, three two-unit and one three-unit placements.
std::vector<BusSubset> default_bus_subsets();

std::string format_buses(const BusSubset& buses, char sep = ',');
/// Parses "632,671,675"; the result is in ascending bus order.
BusSubset parse_buses(std::string_view text);

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::vector<double> fs_list{1250.0, 2500.0, 5000.0, 10000.0, 20000.0};
  std::vector<BusSubset> bus_subsets = default_bus_subsets();
  double train_fraction = 0.8;
  int repeats = 3;
  std::vector<Method> methods{kAllMethods.begin(), kAllMethods.end()};
  /// Sampling rate and placement for single runs and the method comparison.
  double fs = 20000.0;
  BusSubset buses{BusId::Bus632, BusId::Bus671, BusId::Bus675};
  int num_intervals = 8;
  unsigned threads = 0;

  GeneratorOptions generator;
  GeneratorGrid grid = GeneratorGrid::defaults();

  TrainConfig cnn;
  SvmHyper svm;
  MlpHyper tmlp;
  AutoencoderHyper autoencoder;

  /// Throws ConfigError on any out-of-range field.
  void validate() const;

  /// Seed of repeat r: the base seed for r = 0, a derived one otherwise.
  std::uint64_t repeat_seed(int r) const;

  DatasetConfig dataset_config(double fs) const;
};

/// Every key is optional; unknown keys at any level raise ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);

ExperimentConfig load_config(const std::string& path);

nlohmann::json grid_to_json(const GeneratorGrid& g);
GeneratorGrid grid_from_json(const nlohmann::json& j);

std::string_view fault_type_name(FaultType t);
FaultType fault_type_from_name(std::string_view name);

}  // namespace swec

#endif  // SWEC_CONFIG_HPP
