// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "db4_oracle.hpp"
#include "swec/expharness.hpp"
#include "swec/featpipe.hpp"
#include "swec/metrics.hpp"
#include "swec/rng.hpp"
#include "swec/tinycnn.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

using namespace swec;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Verdict()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!v.pass) ++failures;
  std::printf("criterion %2d %s  %-28s %s (%.1f s)\n", id, v.pass ? "PASS" : "FAIL", name.c_str(),
              v.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

bool within(double value, double target, double tol) { return std::abs(value - target) <= tol; }

ConfusionMatrix reference_matrix() {
  return ConfusionMatrix::from_rows({{{13, 0, 0, 0}, {0, 29, 1, 0}, {0, 0, 60, 2}, {0, 0, 3, 12}}});
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Every regular file under a and b, compared byte for byte.
bool trees_identical(const fs::path& a, const fs::path& b, int& files) {
  files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const auto other = b / fs::relative(e.path(), a);
    if (!fs::exists(other) || slurp(e.path()) != slurp(other)) return false;
    ++files;
  }
  int count_b = 0;
  for (const auto& e : fs::recursive_directory_iterator(b)) count_b += e.is_regular_file();
  return count_b == files;
}

}  // namespace

int main() {
  const ExperimentConfig config;  // defaults throughout

  report(1, "metrics oracle", [] {
    const auto r = aggregate(reference_matrix());
    const double acc = r.accuracy * 100, pre = *r.macro.precision * 100,
                 rec = *r.macro.recall * 100, f1 = *r.macro.f1 * 100, fpr = *r.macro.fpr * 100;
    const bool ok = within(acc, 95.00, 0.01) && within(pre, 93.36, 0.01) &&
                    within(rec, 94.87, 0.01) && within(f1, 94.11, 0.01) &&
                    within(fpr, 1.875, 0.001) && within(fpr, 1.86, 0.05);
    return Verdict{ok, fmt("acc %.4f pre %.4f rec %.4f f1 %.4f fpr %.4f", acc, pre, rec, f1, fpr)};
  });

  report(2, "per-class margins", [] {
    const auto r = aggregate(reference_matrix());
    const double pre[] = {100.0, 96.7, 96.8, 80.0};
    const double rec[] = {100.0, 100.0, 93.8, 85.7};
    bool ok = true;
    std::string d = "pre";
    for (int c = 0; c < 4; ++c) {
      ok = ok && within(*r.per_class[c].precision * 100, pre[c], 0.05);
      d += fmt(" %.2f", *r.per_class[c].precision * 100);
    }
    d += " rec";
    for (int c = 0; c < 4; ++c) {
      ok = ok && within(*r.per_class[c].recall * 100, rec[c], 0.05);
      d += fmt(" %.2f", *r.per_class[c].recall * 100);
    }
    return Verdict{ok, d};
  });

  report(3, "gradient check", [] {
    double worst = 0.0;
    std::size_t params = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto gc = make_grad_check_case<double>(seed, 3, 166);
      const auto r = grad_check<double>(gc.model, gc.batch, 1e-5);
      worst = std::max(worst, r.max_rel_error);
      params = r.parameters_checked;
    }
    return Verdict{worst < 1e-4, fmt("10 cases x %zu params, max rel error %.3g", params, worst)};
  });

  report(4, "wavelet transform", [] {
    Rng rng(2024);
    double round_trip = 0.0, parseval = 0.0;
    for (int t = 0; t < 100; ++t) {
      const Eigen::Index n = 8 + 2 * static_cast<Eigen::Index>(rng.below(400));
      VectorX<double> x(n);
      for (Eigen::Index i = 0; i < n; ++i) x(i) = rng.normal();
      const auto lv = dwt_db4_level1(x);
      round_trip = std::max(round_trip, (idwt_db4_level1(lv.approx, lv.detail) - x).cwiseAbs().maxCoeff());
      parseval = std::max(parseval, std::abs(lv.approx.squaredNorm() + lv.detail.squaredNorm() -
                                             x.squaredNorm()));
    }
    const auto oracle = test::daubechies_scaling(4);
    double taps = 0.0;
    for (std::size_t i = 0; i < 8; ++i) taps = std::max(taps, std::abs(oracle[i] - kDb4Scaling[i]));
    const auto flat = dwt_db4_level1(VectorX<double>::Constant(64, 0.37));
    const double detail = flat.detail.cwiseAbs().maxCoeff();
    const bool ok = round_trip < 1e-9 && parseval < 1e-9 && taps < 1e-10 && detail < 1e-15;
    return Verdict{ok, fmt("round trip %.2g parseval %.2g taps %.2g constant detail %.2g",
                           round_trip, parseval, taps, detail)};
  });

  report(5, "stratified split", [&] {
    DatasetConfig dc = config.dataset_config(1250.0);
    const auto ds = build_dataset(dc);
    std::vector<EventClass> labels;
    for (std::size_t i = 0; i < ds.records.size(); ++i) labels.push_back(ds.label(i));
    const auto split = split_stratified(labels, config.train_fraction, config.seed);
    std::array<int, 4> per{};
    for (std::size_t i : split.test) ++per[class_index(labels[i])];
    const bool ok = ds.records.size() == 600 && ds.counts == std::array<int, 4>{64, 144, 320, 72} &&
                    per == std::array<int, 4>{13, 29, 64, 14} && split.test.size() == 120;
    return Verdict{ok, fmt("test counts (%d, %d, %d, %d)", per[0], per[1], per[2], per[3])};
  });

  report(6, "end-to-end CNN at 20 kHz", [&] {
    const auto start = std::chrono::steady_clock::now();
    const auto run = run_pipeline(config, 20000.0, parse_buses("632,671,675"), Method::Cnn);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const double acc = run.report.accuracy;
    return Verdict{acc >= 0.90 && secs <= 600.0, fmt("accuracy %.4f in %.1f s", acc, secs)};
  });

  report(7, "sampling-rate trend", [&] {
    const auto rows = sweep_sampling_rate(config);
    const double lo = rows.front().mean_accuracy, hi = rows.back().mean_accuracy;
    std::string d;
    for (const auto& r : rows) d += fmt("%g:%.2f ", r.fs, r.mean_accuracy * 100);
    const bool ok = rows.front().fs == 1250.0 && rows.back().fs == 20000.0 && hi - lo >= 0.10;
    return Verdict{ok, d + fmt("gap %.2f points", (hi - lo) * 100)};
  });

  Comparison first;
  report(8, "method ordering", [&] {
    first = compare_methods(config);
    double cnn = 0, tmlp = 0, svm = 0;
    std::string d;
    for (const auto& s : first.summary) {
      if (s.method == Method::Cnn) cnn = s.accuracy;
      if (s.method == Method::Tmlp) tmlp = s.accuracy;
      if (s.method == Method::Svm) svm = s.accuracy;
      d += fmt("%s %.2f ", std::string(method_name(s.method)).c_str(), s.accuracy * 100);
    }
    const bool ok = cnn >= tmlp - 0.02 && tmlp >= svm - 0.02;
    return Verdict{ok, d};
  });

  report(9, "placement trend", [&] {
    const auto rows = sweep_placement(config);
    double all = -1.0, best_single = 0.0;
    std::string d;
    for (const auto& r : rows) {
      if (r.buses.size() == 3) all = r.mean_accuracy;
      if (r.buses.size() == 1) best_single = std::max(best_single, r.mean_accuracy);
      d += fmt("%s:%.2f ", format_buses(r.buses, '+').c_str(), r.mean_accuracy * 100);
    }
    return Verdict{all >= 0 && all >= best_single - 0.02, d};
  });

  report(10, "determinism", [&] {
    const fs::path base = fs::temp_directory_path() / "swec_acceptance";
    fs::remove_all(base);
    if (first.runs.empty()) first = compare_methods(config);
    save_comparison(base / "a", config, first);
    save_comparison(base / "b", config, compare_methods(config));
    int files = 0;
    const bool same = trees_identical(base / "a", base / "b", files);
    fs::remove_all(base);
    return Verdict{same && files > 0, fmt("%d files compared", files)};
  });

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
