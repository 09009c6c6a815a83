#include "swec/persist.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace swec {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string shortest(double v) {
  std::array<char, 32> buf;
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

json params_to_json(const ClassParams& p) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, CapacitorParams>)
          return {{"size_index", v.size_index}, {"amplitude_scale", v.amplitude_scale}};
        else if constexpr (std::is_same_v<T, TransformerParams>)
          return {{"tap_index", v.tap_index}};
        else if constexpr (std::is_same_v<T, FaultParams>)
          return {{"type", fault_type_name(v.type)}, {"resistance_index", v.resistance_index}};
        else
          return {{"draw_index", v.draw_index}};
      },
      p);
}

ClassParams params_from_json(EventClass cls, const json& j) {
  switch (cls) {
    case EventClass::CapacitorSwitching:
      return CapacitorParams{j.at("size_index").get<int>(), j.at("amplitude_scale").get<double>()};
    case EventClass::TransformerEnergization:
      return TransformerParams{j.at("tap_index").get<int>()};
    case EventClass::Fault:
      return FaultParams{fault_type_from_name(j.at("type").get<std::string>()),
                         j.at("resistance_index").get<int>()};
    case EventClass::HighImpedanceFault:
      return HifParams{j.at("draw_index").get<int>()};
  }
  throw FormatError("unknown event class");
}

std::string waveform_name(std::size_t index) { return "evt_" + std::to_string(index) + ".csv"; }

std::string csv_header() {
  std::string h = "t";
  for (BusId b : kMonitoredBuses)
    for (const char* ph : {"va", "vb", "vc"}) h += "," + std::to_string(bus_number(b)) + "_" + ph;
  return h;
}

// Binary helpers --------------------------------------------------------------------------

class BinWriter {
public:
  explicit BinWriter(std::ostream& os) : os_(os) {}

  void magic(std::string_view m) { os_.write(m.data(), static_cast<std::streamsize>(m.size())); }

  void u32(std::uint32_t v) {
    std::array<char, 4> b;
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
    os_.write(b.data(), 4);
  }

  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    std::array<char, 8> b;
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
    os_.write(b.data(), 8);
  }

  template <typename Derived>
  void tensor(const Eigen::DenseBase<Derived>& t) {
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) f64(t(r, c));
  }

private:
  std::ostream& os_;
};

class BinReader {
public:
  BinReader(std::istream& is, std::string source) : is_(is), source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& msg) const {
    throw FormatError(source_ + ": byte " + std::to_string(offset_) + ": " + msg);
  }

  void bytes(char* out, std::size_t n, const char* what) {
    is_.read(out, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) {
      offset_ += static_cast<std::size_t>(is_.gcount());
      fail(std::string("truncated while reading ") + what);
    }
    offset_ += n;
  }

  std::string magic() {
    std::array<char, 4> m;
    bytes(m.data(), 4, "magic");
    return std::string(m.data(), 4);
  }

  std::uint32_t u32(const char* what) {
    std::array<unsigned char, 4> b;
    bytes(reinterpret_cast<char*>(b.data()), 4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{b[i]} << (8 * i);
    return v;
  }

  double f64(const char* what) {
    std::array<unsigned char, 8> b;
    bytes(reinterpret_cast<char*>(b.data()), 8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{b[i]} << (8 * i);
    const double d = std::bit_cast<double>(v);
    if (!std::isfinite(d)) {
      offset_ -= 8;
      fail(std::string("non-finite value in ") + what);
    }
    return d;
  }

  MatrixX<double> matrix(std::uint32_t rows, std::uint32_t cols, const char* what) {
    MatrixX<double> m(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = f64(what);
    return m;
  }

  VectorX<double> vector(std::uint32_t n, const char* what) {
    VectorX<double> v(n);
    for (std::uint32_t i = 0; i < n; ++i) v(i) = f64(what);
    return v;
  }

  std::vector<std::uint32_t> dims(std::size_t expected) {
    const std::uint32_t n = u32("dimension count");
    if (n != expected) {
      offset_ -= 4;
      fail("expected " + std::to_string(expected) + " dimensions, found " + std::to_string(n));
    }
    std::vector<std::uint32_t> d(n);
    for (auto& x : d) {
      x = u32("dimensions");
      if (x == 0 || x > (1u << 24)) {
        offset_ -= 4;
        fail("implausible dimension " + std::to_string(x));
      }
    }
    return d;
  }

  void expect_end() {
    if (is_.peek() != std::char_traits<char>::eof()) fail("trailing bytes after model");
  }

  std::size_t offset() const { return offset_; }

private:
  std::istream& is_;
  std::string source_;
  std::size_t offset_ = 0;
};

std::uint32_t as_u32(Eigen::Index v) { return static_cast<std::uint32_t>(v); }

}  // namespace

json dataset_manifest(const Dataset& ds) {
  json records = json::array();
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const WaveformRecord& r = ds.records[i];
    const EventSpec& s = r.spec.value();
    records.push_back({{"index", i},
                       {"class", class_code(s.event_class)},
                       {"inception_angle", s.inception_angle_deg},
                       {"location", bus_number(s.location)},
                       {"event_time", s.event_time},
                       {"seed", r.seed},
                       {"params", params_to_json(s.params)}});
  }
  json buses = json::array();
  for (BusId b : kMonitoredBuses) buses.push_back(bus_number(b));
  const auto& o = ds.options;
  return {
      {"schema_version", kDatasetSchemaVersion},
      {"fs", ds.fs},
      {"f0", o.f0},
      {"global_seed", ds.global_seed},
      {"duration", o.duration},
      {"event_base_time", o.event_base_time},
      {"snr_db", std::isinf(o.snr_db) ? json(nullptr) : json(o.snr_db)},
      {"jitter_max", o.jitter_max},
      {"samples_per_record", ds.records.empty() ? 0 : ds.records.front().length()},
      {"counts", ds.counts},
      {"grid", grid_to_json(ds.grid)},
      {"buses", buses},
      {"records", records},
  };
}

void write_waveform_csv(std::ostream& os, const WaveformRecord& record) {
  std::string line;
  os << csv_header() << '\n';
  for (Eigen::Index n = 0; n < record.length(); ++n) {
    line = shortest(static_cast<double>(n) / record.fs);
    for (const auto& bus : record.samples)
      for (int p = 0; p < 3; ++p) {
        line += ',';
        line += shortest(bus(n, p));
      }
    line += '\n';
    os << line;
  }
}

void read_waveform_csv(std::istream& is, WaveformRecord& record, Eigen::Index expected_rows,
                       const std::string& source) {
  std::string line;
  std::size_t lineno = 1;
  auto fail = [&](const std::string& msg) {
    throw FormatError(source + ":" + std::to_string(lineno) + ": " + msg);
  };
  if (!std::getline(is, line) || line != csv_header()) fail("unexpected header");
  record.samples.assign(kMonitoredBuses.size(), PhaseMatrix<>(expected_rows, 3));
  Eigen::Index n = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (n >= expected_rows) fail("more than " + std::to_string(expected_rows) + " samples");
    const char* p = line.data();
    const char* end = line.data() + line.size();
    std::array<double, 1 + 3 * kMonitoredBuses.size()> v;
    for (std::size_t k = 0; k < v.size(); ++k) {
      const auto [next, ec] = std::from_chars(p, end, v[k]);
      if (ec != std::errc() || !std::isfinite(v[k]))
        fail("bad number in column " + std::to_string(k + 1));
      p = next;
      if (k + 1 < v.size()) {
        if (p == end || *p != ',') fail("expected " + std::to_string(v.size()) + " columns");
        ++p;
      }
    }
    if (p != end) fail("expected " + std::to_string(v.size()) + " columns");
    for (std::size_t b = 0; b < kMonitoredBuses.size(); ++b)
      for (int ph = 0; ph < 3; ++ph) record.samples[b](n, ph) = v[1 + 3 * b + ph];
    ++n;
  }
  if (n != expected_rows)
    fail("expected " + std::to_string(expected_rows) + " samples, found " + std::to_string(n));
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir / "waveforms");
  write_text_file(dir / "manifest.json", dataset_manifest(ds).dump(2) + "\n");
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    std::ofstream out(dir / "waveforms" / waveform_name(i), std::ios::binary);
    if (!out) throw FormatError("cannot write " + (dir / "waveforms" / waveform_name(i)).string());
    write_waveform_csv(out, ds.records[i]);
  }
}

Dataset load_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw FormatError("cannot open " + manifest_path.string());
  json m;
  try {
    m = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(manifest_path.string() + ": byte " + std::to_string(e.byte) +
                      ": malformed JSON");
  }
  Dataset ds;
  Eigen::Index rows = 0;
  try {
    if (m.at("schema_version").get<int>() != kDatasetSchemaVersion)
      throw FormatError("unsupported schema_version");
    ds.fs = m.at("fs").get<double>();
    ds.global_seed = m.at("global_seed").get<std::uint64_t>();
    ds.options.f0 = m.at("f0").get<double>();
    ds.options.duration = m.at("duration").get<double>();
    ds.options.event_base_time = m.at("event_base_time").get<double>();
    ds.options.snr_db = m.at("snr_db").is_null() ? std::numeric_limits<double>::infinity()
                                                 : m.at("snr_db").get<double>();
    ds.options.jitter_max = m.at("jitter_max").get<double>();
    ds.counts = m.at("counts").get<std::array<int, kNumClasses>>();
    ds.grid = grid_from_json(m.at("grid"));
    rows = m.at("samples_per_record").get<Eigen::Index>();
    for (const auto& r : m.at("records")) {
      WaveformRecord rec;
      EventSpec s;
      s.event_class = class_from_code(r.at("class").get<int>());
      s.inception_angle_deg = r.at("inception_angle").get<double>();
      s.location = bus_from_number(r.at("location").get<int>());
      s.event_time = r.at("event_time").get<double>();
      s.params = params_from_json(s.event_class, r.at("params"));
      if (r.at("index").get<std::size_t>() != ds.records.size())
        throw FormatError("record indices are not consecutive");
      rec.spec = s;
      rec.fs = ds.fs;
      rec.duration = ds.options.duration;
      rec.seed = r.at("seed").get<std::uint64_t>();
      ds.records.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  std::array<int, kNumClasses> counted{};
  for (const auto& r : ds.records) ++counted[class_index(r.spec->event_class)];
  if (counted != ds.counts)
    throw FormatError(manifest_path.string() + ": counts disagree with the record list");
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const fs::path p = dir / "waveforms" / waveform_name(i);
    std::ifstream w(p, std::ios::binary);
    if (!w) throw FormatError("cannot open " + p.string());
    read_waveform_csv(w, ds.records[i], rows, p.string());
  }
  return ds;
}

Method artifact_method(const ModelArtifact& model) {
  return std::visit(
      [](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, CnnModel<double>>) return Method::Cnn;
        else if constexpr (std::is_same_v<T, SvmArtifact>) return Method::Svm;
        else if constexpr (std::is_same_v<T, TaperedMlp>) return Method::Tmlp;
        else return Method::Autoencoder;
      },
      model);
}

void write_model(std::ostream& os, const ModelArtifact& model) {
  BinWriter w(os);
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, CnnModel<double>>) {
          const CnnArch& a = m.arch;
          w.magic("SWEC");
          w.u32(kModelFormatVersion);
          for (int d : {a.num_filters, a.filter_h, a.filter_w, a.input_h, a.input_w, a.num_classes})
            w.u32(static_cast<std::uint32_t>(d));
          w.tensor(m.params.conv_w);
          w.tensor(m.params.conv_b);
          w.tensor(m.params.fc_w);
          w.tensor(m.params.fc_b);
        } else if constexpr (std::is_same_v<T, SvmArtifact>) {
          w.magic("SWSV");
          w.u32(kModelFormatVersion);
          w.u32(3);
          w.u32(as_u32(m.svm.weights.rows()));
          w.u32(as_u32(m.svm.weights.cols()));
          w.u32(static_cast<std::uint32_t>(m.num_intervals));
          w.tensor(m.svm.weights);
          w.tensor(m.svm.bias);
        } else if constexpr (std::is_same_v<T, TaperedMlp>) {
          w.magic("SWMP");
          w.u32(kModelFormatVersion);
          w.u32(4);
          for (int d : m.widths) w.u32(static_cast<std::uint32_t>(d));
          for_each_tensor(m.params, [&](const auto& t) { w.tensor(t); });
        } else {
          const AutoencoderClassifier& c = m.classifier;
          w.magic("SWAE");
          w.u32(kModelFormatVersion);
          w.u32(4);
          w.u32(as_u32(c.input_mean.size()));
          w.u32(as_u32(c.ae.enc_w.rows()));
          w.u32(as_u32(c.head.w.rows()));
          w.u32(static_cast<std::uint32_t>(m.num_intervals));
          w.tensor(c.input_mean);
          w.tensor(c.input_scale);
          for_each_tensor(c.ae, [&](const auto& t) { w.tensor(t); });
          for_each_tensor(c.head, [&](const auto& t) { w.tensor(t); });
        }
      },
      model);
}

ModelArtifact read_model(std::istream& is, const std::string& source) {
  BinReader r(is, source);
  const std::string magic = r.magic();
  if (magic != "SWEC" && magic != "SWSV" && magic != "SWMP" && magic != "SWAE") {
    throw FormatError(source + ": byte 0: unknown magic");
  }
  if (const auto version = r.u32("version"); version != kModelFormatVersion)
    throw FormatError(source + ": byte 4: unsupported format version " + std::to_string(version));

  ModelArtifact out;
  if (magic == "SWEC") {
    std::array<std::uint32_t, 6> d;
    for (auto& x : d) x = r.u32("dimensions");
    CnnArch a;
    a.num_filters = static_cast<int>(d[0]);
    a.filter_h = static_cast<int>(d[1]);
    a.filter_w = static_cast<int>(d[2]);
    a.input_h = static_cast<int>(d[3]);
    a.input_w = static_cast<int>(d[4]);
    a.num_classes = static_cast<int>(d[5]);
    for (auto x : d)
      if (x == 0 || x > (1u << 20)) throw FormatError(source + ": byte 8: implausible dimensions");
    try {
      a.validate();
    } catch (const Error& e) {
      throw FormatError(source + ": byte 8: " + e.what());
    }
    CnnModel<double> m{a, {}};
    m.params.conv_w = r.matrix(d[0], d[1] * d[2], "conv filters");
    m.params.conv_b = r.vector(d[0], "conv biases");
    m.params.fc_w = r.matrix(d[5], static_cast<std::uint32_t>(a.flat_size()), "fc weights");
    m.params.fc_b = r.vector(d[5], "fc biases");
    out = std::move(m);
  } else if (magic == "SWSV") {
    const auto d = r.dims(3);
    SvmArtifact s;
    s.svm.weights = r.matrix(d[0], d[1], "svm weights");
    s.svm.bias = r.vector(d[0], "svm biases");
    s.num_intervals = static_cast<int>(d[2]);
    out = std::move(s);
  } else if (magic == "SWMP") {
    const auto d = r.dims(4);
    TaperedMlp m;
    for (int i = 0; i < 4; ++i) m.widths[i] = static_cast<int>(d[i]);
    m.params.w1 = r.matrix(d[1], d[0], "layer 1 weights");
    m.params.b1 = r.vector(d[1], "layer 1 biases");
    m.params.w2 = r.matrix(d[2], d[1], "layer 2 weights");
    m.params.b2 = r.vector(d[2], "layer 2 biases");
    m.params.w3 = r.matrix(d[3], d[2], "layer 3 weights");
    m.params.b3 = r.vector(d[3], "layer 3 biases");
    out = std::move(m);
  } else {
    const auto d = r.dims(4);
    AutoencoderArtifact a;
    AutoencoderClassifier& c = a.classifier;
    c.input_mean = r.vector(d[0], "input mean");
    c.input_scale = r.vector(d[0], "input scale");
    c.ae.enc_w = r.matrix(d[1], d[0], "encoder weights");
    c.ae.enc_b = r.vector(d[1], "encoder biases");
    c.ae.dec_w = r.matrix(d[0], d[1], "decoder weights");
    c.ae.dec_b = r.vector(d[0], "decoder biases");
    c.head.w = r.matrix(d[2], d[1], "head weights");
    c.head.b = r.vector(d[2], "head biases");
    a.num_intervals = static_cast<int>(d[3]);
    out = std::move(a);
  }
  r.expect_end();
  return out;
}

void save_model(const ModelArtifact& model, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  write_model(out, model);
}

ModelArtifact load_model(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_model(in, path.string());
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
}

}  // namespace swec
