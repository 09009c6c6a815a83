#include "swec/expharness.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

using namespace swec;
namespace fs = std::filesystem;

namespace {

std::vector<EventClass> default_labels() {
  std::vector<EventClass> y;
  const std::array<int, 4> counts{64, 144, 320, 72};
  for (int c = 0; c < 4; ++c) y.insert(y.end(), counts[c], class_from_index(c));
  return y;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("swec_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.fs = 1250.0;
  c.fs_list = {1250.0, 2500.0};
  c.repeats = 1;
  c.cnn.epochs = 5;
  c.tmlp.epochs = 5;
  c.svm.epochs = 20;
  c.autoencoder.epochs = 5;
  c.autoencoder.head_epochs = 5;
  return c;
}

}  // namespace

TEST_CASE("largest-remainder test counts") {
  CHECK(apportion_test_counts({64, 144, 320, 72}, 0.8) == std::array<int, 4>{13, 29, 64, 14});
  CHECK(apportion_test_counts({10, 10, 10, 10}, 0.5) == std::array<int, 4>{5, 5, 5, 5});
  // Total 2.0 with equal remainders: ties go to the lower classes.
  CHECK(apportion_test_counts({5, 5, 5, 5}, 0.9) == std::array<int, 4>{1, 1, 0, 0});
  const auto tiny = apportion_test_counts({64, 144, 320, 72}, 1.0 - 1e-12);
  for (int t : tiny) CHECK(t >= 0);
  CHECK(std::accumulate(tiny.begin(), tiny.end(), 0) == 0);
}

TEST_CASE("stratified split is disjoint, covering and seeded") {
  const auto y = default_labels();
  const auto s = split_stratified(y, 0.8, 42);
  CHECK(s.test.size() == 120);
  CHECK(s.train.size() == 480);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.test.begin(), s.test.end());
  CHECK(all.size() == 600);
  CHECK(std::is_sorted(s.train.begin(), s.train.end()));
  std::array<int, 4> per{};
  for (std::size_t i : s.test) ++per[class_index(y[i])];
  CHECK(per == std::array<int, 4>{13, 29, 64, 14});

  const auto again = split_stratified(y, 0.8, 42);
  CHECK(again.test == s.test);
  CHECK(split_fingerprint(again) == split_fingerprint(s));
  const auto other = split_stratified(y, 0.8, 43);
  CHECK(other.test != s.test);
  CHECK(split_fingerprint(other) != split_fingerprint(s));
  CHECK(fingerprint_hex(0x1234).size() == 16);

  const std::vector<EventClass> missing(10, EventClass::Fault);
  CHECK_THROWS_AS(split_stratified(missing, 0.8, 1), ConfigError);
}

TEST_CASE("fingerprint separates train from test") {
  SplitIndex a{{0, 1}, {2}};
  SplitIndex b{{0}, {1, 2}};
  CHECK(split_fingerprint(a) != split_fingerprint(b));
}

TEST_CASE("config validation and JSON") {
  ExperimentConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.repeat_seed(0) == c.seed);
  CHECK(c.repeat_seed(1) != c.seed);

  auto dup = c;
  dup.bus_subsets.push_back(parse_buses("675"));
  CHECK_THROWS_AS(dup.validate(), ConfigError);
  auto frac = c;
  frac.train_fraction = 1.0;
  CHECK_THROWS_AS(frac.validate(), ConfigError);
  auto rates = c;
  rates.fs_list.clear();
  CHECK_THROWS_AS(rates.validate(), ConfigError);

  CHECK(parse_buses("675,632") == BusSubset{BusId::Bus632, BusId::Bus675});
  auto stray = c;
  stray.bus_subsets = {parse_buses("634")};
  CHECK_THROWS_AS(stray.validate(), ConfigError);

  const auto j = config_to_json(c);
  const auto back = config_from_json(j);
  CHECK(config_to_json(back) == j);

  auto unknown = j;
  unknown["learning_rate"] = 0.1;
  CHECK_THROWS_AS(config_from_json(unknown), ConfigError);
  auto nested = j;
  nested["cnn"]["dropout"] = 0.5;
  CHECK_THROWS_AS(config_from_json(nested), ConfigError);
  auto dupj = j;
  dupj["bus_subsets"] = nlohmann::json::parse(R"([[632], [632]])");
  CHECK_THROWS_AS(config_from_json(dupj).validate(), ConfigError);
}

TEST_CASE("dataset directory round trip is bit exact") {
  DatasetConfig c;
  c.fs = 1250.0;
  c.global_seed = 3;
  const auto ds = build_dataset(c);
  const auto dir = fresh_dir("dataset");
  save_dataset(ds, dir);
  const auto back = load_dataset(dir);
  REQUIRE(back.records.size() == ds.records.size());
  CHECK(back.counts == ds.counts);
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    CHECK(back.records[i].samples == ds.records[i].samples);
    CHECK(back.label(i) == ds.label(i));
  }

  // A corrupted waveform file reports its line.
  const auto victim = dir / "waveforms" / "evt_5.csv";
  std::string text = slurp(victim);
  const auto second = text.find('\n', text.find('\n') + 1);
  text.insert(second + 1, "oops\n");
  std::ofstream(victim, std::ios::binary) << text;
  try {
    load_dataset(dir);
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("models round trip and reject truncation") {
  const auto d = [] {
    DatasetConfig c;
    c.fs = 1250.0;
    return prepare_features(build_dataset(c), parse_buses("632,671,675"));
  }();
  const auto split = split_stratified(d.labels, 0.8, 1);
  const auto cfg = small_config();
  for (Method m : kAllMethods) {
    const auto run = train_and_evaluate(d, split, m, cfg, 9);
    CHECK(artifact_method(run.model) == m);
    std::ostringstream os;
    write_model(os, run.model);
    const std::string bytes = os.str();
    std::istringstream is(bytes);
    const auto back = read_model(is);
    std::ostringstream again;
    write_model(again, back);
    CHECK(again.str() == bytes);
    const auto report = evaluate(back, d, split.test);
    CHECK(report.confusion == run.report.confusion);

    std::istringstream cut(bytes.substr(0, bytes.size() - 3));
    try {
      read_model(cut);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("byte") != std::string::npos);
    }
    std::istringstream extra(bytes + "x");
    CHECK_THROWS_AS(read_model(extra), FormatError);
    std::string badmagic = bytes;
    badmagic[0] = 'X';
    std::istringstream bm(badmagic);
    CHECK_THROWS_AS(read_model(bm), FormatError);
  }
}

TEST_CASE("pipeline stages name themselves in errors") {
  auto c = small_config();
  try {
    run_pipeline(c, 1250.0, BusSubset{BusId::Bus634}, Method::Cnn);
    FAIL("expected an error");
  } catch (const ParameterError& e) {
    CHECK(std::string(e.what()).find("stage 'features'") != std::string::npos);
  }
  c.train_fraction = 0.0;
  CHECK_THROWS_WITH_AS(run_pipeline(c, 1250.0, parse_buses("632"), Method::Cnn),
                       doctest::Contains("stage 'config'"), ConfigError);
}

TEST_CASE("single-bus pipeline clamps the filter height") {
  auto c = small_config();
  c.cnn.epochs = 10;
  const auto run = run_pipeline(c, 2500.0, parse_buses("632"), Method::Cnn);
  const auto& model = std::get<CnnModel<double>>(run.model);
  CHECK(model.arch.input_h == 1);
  CHECK(model.arch.filter_h == 1);
  CHECK(run.report.confusion.total() == 120);
  CHECK(run.loss_trace.size() == 10);
}

TEST_CASE("sweep rows are ascending and the first repeat does not depend on the count") {
  auto c = small_config();
  c.fs_list = {2500.0, 1250.0};
  const auto one = sweep_sampling_rate(c);
  REQUIRE(one.size() == 2);
  CHECK(one[0].fs == 1250.0);
  CHECK(one[1].fs == 2500.0);
  c.repeats = 2;
  const auto two = sweep_sampling_rate(c);
  for (std::size_t i = 0; i < 2; ++i) {
    REQUIRE(two[i].accuracies.size() == 2);
    CHECK(two[i].accuracies[0] == one[i].accuracies[0]);
  }
  c.fs_list = {1250.0};
  CHECK_THROWS(sweep_sampling_rate(c));
}

TEST_CASE("comparison shares one split per repeat and persists deterministically") {
  auto c = small_config();
  c.methods = {Method::Svm, Method::Tmlp, Method::Cnn};
  const auto cmp = compare_methods(c);
  REQUIRE(cmp.runs.size() == 3);
  CHECK(cmp.summary.size() == 3);
  CHECK(cmp.runs[0].fingerprint == cmp.runs[1].fingerprint);
  CHECK(cmp.runs[1].fingerprint == cmp.runs[2].fingerprint);

  const auto a = fresh_dir("cmp_a");
  const auto b = fresh_dir("cmp_b");
  save_comparison(a, c, cmp);
  save_comparison(b, c, compare_methods(c));
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a);
    CHECK(slurp(e.path()) == slurp(b / rel));
  }
  CHECK(fs::exists(a / "reports" / "compare.csv"));
  CHECK(fs::exists(a / "manifest.json"));

  std::ostringstream agg;
  aggregate_reports(a, agg);
  std::istringstream lines(agg.str());
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) ++count;
  CHECK(count == 4);  // header + one row per run

  c.methods = {Method::Cnn};
  CHECK_THROWS(compare_methods(c));
  fs::remove_all(a);
  fs::remove_all(b);
}
