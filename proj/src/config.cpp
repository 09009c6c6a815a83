#include "swec/config.hpp"

#include "swec/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace swec {
namespace {

using nlohmann::json;

/// Reads optional keys of one JSON object and rejects the ones nobody asked for.
class ObjectReader {
public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (const json* v = find(key)) {
      try {
        if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
          if (!v->is_number_unsigned()) throw ConfigError(where(key) + ": expected a non-negative integer");
        } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
          if (!v->is_number_integer()) throw ConfigError(where(key) + ": expected an integer");
        } else if constexpr (std::is_floating_point_v<T>) {
          if (!v->is_number()) throw ConfigError(where(key) + ": expected a number");
        }
        out = v->get<T>();
      } catch (const json::exception& e) {
        throw ConfigError(where(key) + ": " + e.what());
      }
    }
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string where(const std::string& key = {}) const {
    if (key.empty()) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) throw ConfigError("unknown key '" + where(item.key()) + "'");
  }

private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

BusId bus_from_json(const json& v, const std::string& where) {
  if (!v.is_number_integer()) throw ConfigError(where + ": bus ids are integers");
  try {
    return bus_from_number(v.get<int>());
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

std::vector<BusId> buses_from_json(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + ": expected an array of bus ids");
  std::vector<BusId> out;
  for (const auto& b : v) out.push_back(bus_from_json(b, where));
  return out;
}

json buses_to_json(const std::vector<BusId>& buses) {
  json a = json::array();
  for (BusId b : buses) a.push_back(bus_number(b));
  return a;
}

void read_trainer(ObjectReader& r, int& epochs, int& batch, double& lr, double& momentum) {
  r.get("epochs", epochs);
  r.get("batch_size", batch);
  r.get("learning_rate", lr);
  r.get("momentum", momentum);
}

}  // namespace

std::string_view method_name(Method m) {
  switch (m) {
    case Method::Autoencoder: return "autoencoder";
    case Method::Svm: return "svm";
    case Method::Tmlp: return "tmlp";
    case Method::Cnn: return "cnn";
  }
  return "?";
}

Method method_from_name(std::string_view name) {
  for (Method m : kAllMethods)
    if (method_name(m) == name) return m;
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

std::string_view fault_type_name(FaultType t) {
  switch (t) {
    case FaultType::LG: return "LG";
    case FaultType::LL: return "LL";
    case FaultType::LLG: return "LLG";
    case FaultType::LLLG: return "LLLG";
  }
  return "?";
}

FaultType fault_type_from_name(std::string_view name) {
  for (FaultType t : {FaultType::LG, FaultType::LL, FaultType::LLG, FaultType::LLLG})
    if (fault_type_name(t) == name) return t;
  throw ConfigError("unknown fault type '" + std::string(name) + "'");
}

std::vector<BusSubset> default_bus_subsets() {
  using enum BusId;
  return {{Bus675}, {Bus671}, {Bus632}, {Bus632, Bus671}, {Bus632, Bus675}, {Bus671, Bus675},
          {Bus632, Bus671, Bus675}};
}

std::string format_buses(const BusSubset& buses, char sep) {
  std::string out;
  for (BusId b : buses) {
    if (!out.empty()) out += sep;
    out += std::to_string(bus_number(b));
  }
  return out;
}

BusSubset parse_buses(std::string_view text) {
  BusSubset out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const std::string_view item = text.substr(0, comma);
    int number = 0;
    const auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), number);
    if (ec != std::errc() || end != item.data() + item.size())
      throw ConfigError("malformed bus list '" + std::string(text) + "'");
    out.push_back(bus_from_number(number));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  if (out.empty()) throw ConfigError("empty bus list");
  std::sort(out.begin(), out.end());
  return out;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) fail("train_fraction must lie in (0, 1)");
  if (fs_list.empty()) fail("fs_list must not be empty");
  for (double f : fs_list)
    if (!(f >= 1000.0) || !std::isfinite(f)) fail("sampling rates must be at least 1000 Hz");
  if (!(fs >= 1000.0) || !std::isfinite(fs)) fail("fs must be at least 1000 Hz");
  if (repeats < 1) fail("repeats must be at least 1");
  if (num_intervals < 1) fail("num_intervals must be at least 1");
  if (methods.empty()) fail("methods must not be empty");
  for (std::size_t i = 0; i < methods.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (methods[i] == methods[j]) fail("duplicate method '" + std::string(method_name(methods[i])) + "'");
  auto check_subset = [&](const BusSubset& s) {
    if (s.empty()) fail("bus subsets must not be empty");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (std::find(kMonitoredBuses.begin(), kMonitoredBuses.end(), s[i]) == kMonitoredBuses.end())
        fail("bus " + std::to_string(bus_number(s[i])) + " is not monitored");
      for (std::size_t j = 0; j < i; ++j)
        if (s[i] == s[j]) fail("duplicate bus in subset " + format_buses(s));
    }
  };
  check_subset(buses);
  std::set<BusSubset> distinct;
  for (auto s : bus_subsets) {
    check_subset(s);
    std::sort(s.begin(), s.end());
    if (!distinct.insert(s).second) fail("duplicate bus subset " + format_buses(s));
  }
  if (!(generator.jitter_max >= 0.0)) fail("jitter_max_ms must be non-negative");
  if (std::isnan(generator.snr_db)) fail("snr_db must be a number or null");
  try {
    cnn.validate();
  } catch (const Error& e) {
    fail(std::string("cnn: ") + e.what());
  }
  if (!(svm.c > 0) || svm.epochs < 1 || !(svm.step > 0)) fail("svm hyperparameters must be positive");
  if (tmlp.epochs < 1 || tmlp.batch_size < 1 || !(tmlp.learning_rate > 0) || !(tmlp.momentum >= 0))
    fail("tmlp hyperparameters out of range");
  if (autoencoder.code_width < 1 || autoencoder.epochs < 1 || autoencoder.head_epochs < 1 ||
      autoencoder.batch_size < 1 || !(autoencoder.learning_rate > 0) ||
      !(autoencoder.momentum >= 0))
    fail("autoencoder hyperparameters out of range");
  const auto products = grid.product_counts();
  if (products != grid.declared_counts)
    fail("grid products do not match the declared class counts");
}

std::uint64_t ExperimentConfig::repeat_seed(int r) const {
  return r == 0 ? seed : derive_seed(seed, SeedStream::Repeat, static_cast<std::uint64_t>(r));
}

DatasetConfig ExperimentConfig::dataset_config(double rate) const {
  DatasetConfig d;
  d.grid = grid;
  d.options = generator;
  d.fs = rate;
  d.global_seed = seed;
  d.threads = threads;
  return d;
}

json grid_to_json(const GeneratorGrid& g) {
  json types = json::array();
  for (FaultType t : g.fault.types) types.push_back(fault_type_name(t));
  return {
      {"capacitor",
       {{"angles", g.capacitor.angles},
        {"sizes", g.capacitor.sizes},
        {"location", bus_number(g.capacitor.location)}}},
      {"transformer",
       {{"angles", g.transformer.angles},
        {"taps", g.transformer.taps},
        {"location", bus_number(g.transformer.location)}}},
      {"fault",
       {{"types", types},
        {"locations", buses_to_json(g.fault.locations)},
        {"resistances", g.fault.resistances},
        {"angles", g.fault.angles}}},
      {"hif",
       {{"locations", buses_to_json(g.hif.locations)},
        {"angles", g.hif.angles},
        {"draws", g.hif.draws}}},
      {"counts", g.declared_counts},
  };
}

GeneratorGrid grid_from_json(const json& j) {
  GeneratorGrid g = GeneratorGrid::defaults();
  ObjectReader r(j, "grid");
  if (const json* v = r.find("capacitor")) {
    ObjectReader c(*v, "grid.capacitor");
    c.get("angles", g.capacitor.angles);
    c.get("sizes", g.capacitor.sizes);
    if (const json* b = c.find("location")) g.capacitor.location = bus_from_json(*b, c.where("location"));
    c.finish();
  }
  if (const json* v = r.find("transformer")) {
    ObjectReader c(*v, "grid.transformer");
    c.get("angles", g.transformer.angles);
    c.get("taps", g.transformer.taps);
    if (const json* b = c.find("location")) g.transformer.location = bus_from_json(*b, c.where("location"));
    c.finish();
  }
  if (const json* v = r.find("fault")) {
    ObjectReader c(*v, "grid.fault");
    if (const json* t = c.find("types")) {
      if (!t->is_array()) throw ConfigError("grid.fault.types: expected an array");
      g.fault.types.clear();
      for (const auto& name : *t) {
        if (!name.is_string()) throw ConfigError("grid.fault.types: expected names");
        g.fault.types.push_back(fault_type_from_name(name.get<std::string>()));
      }
    }
    if (const json* b = c.find("locations")) g.fault.locations = buses_from_json(*b, c.where("locations"));
    c.get("resistances", g.fault.resistances);
    c.get("angles", g.fault.angles);
    c.finish();
  }
  if (const json* v = r.find("hif")) {
    ObjectReader c(*v, "grid.hif");
    if (const json* b = c.find("locations")) g.hif.locations = buses_from_json(*b, c.where("locations"));
    c.get("angles", g.hif.angles);
    c.get("draws", g.hif.draws);
    c.finish();
  }
  r.get("counts", g.declared_counts);
  r.finish();
  return g;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  ObjectReader r(j, "");
  r.get("seed", c.seed);
  r.get("fs_list", c.fs_list);
  if (const json* v = r.find("bus_subsets")) {
    if (!v->is_array()) throw ConfigError("bus_subsets: expected an array of arrays");
    c.bus_subsets.clear();
    for (const auto& s : *v) c.bus_subsets.push_back(buses_from_json(s, "bus_subsets"));
  }
  r.get("train_fraction", c.train_fraction);
  if (const json* v = r.find("snr_db")) {
    if (v->is_null()) c.generator.snr_db = std::numeric_limits<double>::infinity();
    else if (v->is_number()) c.generator.snr_db = v->get<double>();
    else throw ConfigError("snr_db: expected a number or null");
  }
  double jitter_ms = c.generator.jitter_max * 1e3;
  r.get("jitter_max_ms", jitter_ms);
  c.generator.jitter_max = jitter_ms * 1e-3;
  r.get("repeats", c.repeats);
  if (const json* v = r.find("methods")) {
    if (!v->is_array()) throw ConfigError("methods: expected an array of names");
    c.methods.clear();
    for (const auto& m : *v) {
      if (!m.is_string()) throw ConfigError("methods: expected an array of names");
      c.methods.push_back(method_from_name(m.get<std::string>()));
    }
  }
  r.get("fs", c.fs);
  if (const json* v = r.find("buses")) c.buses = buses_from_json(*v, "buses");
  r.get("num_intervals", c.num_intervals);
  if (const json* v = r.find("grid")) c.grid = grid_from_json(*v);
  if (const json* v = r.find("cnn")) {
    ObjectReader s(*v, "cnn");
    read_trainer(s, c.cnn.epochs, c.cnn.batch_size, c.cnn.learning_rate, c.cnn.momentum);
    s.get("init_std", c.cnn.init_std);
    s.finish();
  }
  if (const json* v = r.find("svm")) {
    ObjectReader s(*v, "svm");
    s.get("c", c.svm.c);
    s.get("epochs", c.svm.epochs);
    s.get("step", c.svm.step);
    s.finish();
  }
  if (const json* v = r.find("tmlp")) {
    ObjectReader s(*v, "tmlp");
    s.get("hidden", c.tmlp.hidden);
    read_trainer(s, c.tmlp.epochs, c.tmlp.batch_size, c.tmlp.learning_rate, c.tmlp.momentum);
    s.finish();
  }
  if (const json* v = r.find("autoencoder")) {
    ObjectReader s(*v, "autoencoder");
    s.get("code_width", c.autoencoder.code_width);
    s.get("head_epochs", c.autoencoder.head_epochs);
    read_trainer(s, c.autoencoder.epochs, c.autoencoder.batch_size,
                 c.autoencoder.learning_rate, c.autoencoder.momentum);
    s.finish();
  }
  r.finish();
  for (auto& s : c.bus_subsets) std::sort(s.begin(), s.end());
  std::sort(c.buses.begin(), c.buses.end());
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json subsets = json::array();
  for (const auto& s : c.bus_subsets) subsets.push_back(buses_to_json(s));
  json methods = json::array();
  for (Method m : c.methods) methods.push_back(method_name(m));
  return {
      {"seed", c.seed},
      {"fs_list", c.fs_list},
      {"bus_subsets", subsets},
      {"train_fraction", c.train_fraction},
      {"snr_db", std::isinf(c.generator.snr_db) ? json(nullptr) : json(c.generator.snr_db)},
      {"jitter_max_ms", c.generator.jitter_max * 1e3},
      {"repeats", c.repeats},
      {"methods", methods},
      {"fs", c.fs},
      {"buses", buses_to_json(c.buses)},
      {"num_intervals", c.num_intervals},
      {"grid", grid_to_json(c.grid)},
      {"cnn",
       {{"epochs", c.cnn.epochs},
        {"batch_size", c.cnn.batch_size},
        {"learning_rate", c.cnn.learning_rate},
        {"momentum", c.cnn.momentum},
        {"init_std", c.cnn.init_std}}},
      {"svm", {{"c", c.svm.c}, {"epochs", c.svm.epochs}, {"step", c.svm.step}}},
      {"tmlp",
       {{"hidden", c.tmlp.hidden},
        {"epochs", c.tmlp.epochs},
        {"batch_size", c.tmlp.batch_size},
        {"learning_rate", c.tmlp.learning_rate},
        {"momentum", c.tmlp.momentum}}},
      {"autoencoder",
       {{"code_width", c.autoencoder.code_width},
        {"epochs", c.autoencoder.epochs},
        {"head_epochs", c.autoencoder.head_epochs},
        {"batch_size", c.autoencoder.batch_size},
        {"learning_rate", c.autoencoder.learning_rate},
        {"momentum", c.autoencoder.momentum}}},
  };
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": byte " + std::to_string(e.byte) + ": malformed JSON");
  }
  ExperimentConfig c = config_from_json(j);
  c.validate();
  return c;
}

}  // namespace swec
