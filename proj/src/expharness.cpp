#include "swec/expharness.hpp"

#include "swec/parallel.hpp"
#include "swec/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cctype>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

namespace swec {
namespace {

namespace fs = std::filesystem;

std::string staged(std::string_view stage, const std::exception& e) {
  return "stage '" + std::string(stage) + "': " + e.what();
}

/// Runs f, rethrowing library errors with their category kept and the stage named.
template <typename F>
auto in_stage(std::string_view stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ParameterError& e) {
    throw ParameterError(staged(stage, e));
  } catch (const ConfigError& e) {
    throw ConfigError(staged(stage, e));
  } catch (const BoundsError& e) {
    throw BoundsError(staged(stage, e));
  } catch (const FormatError& e) {
    throw FormatError(staged(stage, e));
  } catch (const TrainingError& e) {
    throw TrainingError(staged(stage, e));
  } catch (const Error& e) {
    throw Error(staged(stage, e));
  }
}

std::vector<VectorX<double>> gather(const PreparedData& data, std::span<const std::size_t> idx,
                                    VectorX<double> (*fn)(const FeatureMatrix&, int), int k) {
  std::vector<VectorX<double>> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(fn(data.features[i], k));
  return out;
}

VectorX<double> flatten_adapter(const FeatureMatrix& fm, int) { return flatten_features(fm); }

std::string run_name(Method m, int repeat) {
  return std::string(method_name(m)) + "_r" + std::to_string(repeat + 1);
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::optional<double> mean_defined(const std::vector<std::optional<double>>& v) {
  double sum = 0.0;
  int n = 0;
  for (const auto& x : v)
    if (x) {
      sum += *x;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return sum / n;
}

std::string to_text(const std::function<void(std::ostream&)>& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

void write_manifest(const fs::path& dir, const std::string& command,
                    const ExperimentConfig& config, std::vector<std::string> outputs) {
  std::sort(outputs.begin(), outputs.end());
  const nlohmann::json m = {{"command", command},
                            {"config", config_to_json(config)},
                            {"outputs", outputs}};
  write_text_file(dir / "manifest.json", m.dump(2) + "\n");
}

std::vector<SweepRow> run_cnn_cells(const ExperimentConfig& config,
                                    const std::vector<PreparedData>& cells) {
  const auto repeats = static_cast<std::size_t>(config.repeats);
  std::vector<SplitIndex> splits(repeats);
  for (std::size_t r = 0; r < repeats; ++r)
    splits[r] = in_stage("split", [&] {
      return split_stratified(cells.front().labels, config.train_fraction,
                              config.repeat_seed(static_cast<int>(r)));
    });
  std::vector<double> acc(cells.size() * repeats);
  parallel_for(acc.size(), config.threads, [&](std::size_t k) {
    const std::size_t cell = k / repeats;
    const std::size_t r = k % repeats;
    acc[k] = train_and_evaluate(cells[cell], splits[r], Method::Cnn, config,
                                config.repeat_seed(static_cast<int>(r)))
                 .report.accuracy;
  });
  std::vector<SweepRow> rows;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    SweepRow row;
    row.fs = cells[c].fs;
    row.buses = cells[c].buses;
    row.accuracies.assign(acc.begin() + static_cast<std::ptrdiff_t>(c * repeats),
                          acc.begin() + static_cast<std::ptrdiff_t>((c + 1) * repeats));
    row.mean_accuracy = mean(row.accuracies);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

PreparedData prepare_features(const Dataset& ds, const BusSubset& buses) {
  PreparedData out;
  out.fs = ds.fs;
  out.buses = canonical_buses(buses);
  out.features.resize(ds.records.size());
  out.labels.resize(ds.records.size());
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    out.features[i] = featurize(extract_window(ds.records[i], ds.options), out.buses);
    out.labels[i] = ds.label(i);
    out.features[i].label = out.labels[i];
  }
  return out;
}

std::array<int, kNumClasses> apportion_test_counts(const std::array<int, kNumClasses>& counts,
                                                   double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train fraction must lie in (0, 1)");
  std::array<double, kNumClasses> quota{};
  std::array<int, kNumClasses> seats{};
  double total_quota = 0.0;
  for (int c = 0; c < kNumClasses; ++c) {
    double q = (1.0 - train_fraction) * counts[c];
    if (std::abs(q - std::round(q)) < 1e-9) q = std::round(q);
    quota[c] = q;
    seats[c] = static_cast<int>(std::floor(q));
    total_quota += q;
  }
  if (std::abs(total_quota - std::round(total_quota)) < 1e-9) total_quota = std::round(total_quota);
  int remaining = static_cast<int>(std::floor(total_quota + 0.5)) -
                  std::accumulate(seats.begin(), seats.end(), 0);
  std::array<int, kNumClasses> order{0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return quota[a] - seats[a] > quota[b] - seats[b];
  });
  for (int k = 0; remaining > 0 && k < kNumClasses; ++k, --remaining) ++seats[order[k]];
  return seats;
}

SplitIndex split_stratified(std::span<const EventClass> labels, double train_fraction,
                            std::uint64_t seed) {
  std::array<std::vector<std::size_t>, kNumClasses> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[class_index(labels[i])].push_back(i);
  std::array<int, kNumClasses> counts{};
  for (int c = 0; c < kNumClasses; ++c) {
    if (members[c].empty())
      throw ConfigError("class " + std::to_string(c + 1) + " has no records to split");
    counts[c] = static_cast<int>(members[c].size());
  }
  const auto test_counts = apportion_test_counts(counts, train_fraction);
  SplitIndex split;
  for (int c = 0; c < kNumClasses; ++c) {
    Rng rng(derive_seed(seed, SeedStream::Split, static_cast<std::uint64_t>(c)));
    rng.shuffle(std::span(members[c]));
    const auto cut = members[c].begin() + test_counts[c];
    split.test.insert(split.test.end(), members[c].begin(), cut);
    split.train.insert(split.train.end(), cut, members[c].end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::uint64_t split_fingerprint(const SplitIndex& split) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  };
  for (std::size_t i : split.train) mix(i);
  mix(~std::uint64_t{0});
  for (std::size_t i : split.test) mix(i);
  return h;
}

std::string fingerprint_hex(std::uint64_t fingerprint) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fingerprint));
  return buf;
}

EventClass predict_artifact(const ModelArtifact& model, const FeatureMatrix& x) {
  return std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, CnnModel<double>>) return predict(m, x.values);
        else if constexpr (std::is_same_v<T, SvmArtifact>)
          return m.svm.predict(energy_features(x, m.num_intervals));
        else if constexpr (std::is_same_v<T, TaperedMlp>) return m.predict(flatten_features(x));
        else return m.classifier.predict(energy_features(x, m.num_intervals));
      },
      model);
}

MetricsReport evaluate(const ModelArtifact& model, const PreparedData& data,
                       std::span<const std::size_t> indices) {
  if (indices.empty()) throw ParameterError("nothing to evaluate: empty test set");
  std::vector<EventClass> predicted, target;
  for (std::size_t i : indices) {
    predicted.push_back(predict_artifact(model, data.features[i]));
    target.push_back(data.labels[i]);
  }
  return aggregate(confusion(predicted, target));
}

MethodRun train_and_evaluate(const PreparedData& data, const SplitIndex& split, Method method,
                             const ExperimentConfig& config, std::uint64_t run_seed) {
  MethodRun run;
  run.method = method;
  run.seed = run_seed;
  run.fingerprint = split_fingerprint(split);
  std::vector<EventClass> labels;
  for (std::size_t i : split.train) labels.push_back(data.labels[i]);
  const int k = config.num_intervals;

  run.model = in_stage("train", [&]() -> ModelArtifact {
    switch (method) {
      case Method::Cnn: {
        std::vector<Sample<double>> samples;
        for (std::size_t i : split.train) samples.push_back({data.features[i].values, data.labels[i]});
        TrainConfig cfg = config.cnn;
        cfg.seed = run_seed;
        const auto& x0 = samples.at(0).x;
        const auto arch = CnnArch::for_input(static_cast<int>(x0.rows()), static_cast<int>(x0.cols()));
        auto result = train(init_model<double>(arch, run_seed, cfg.init_std),
                            std::span<const Sample<double>>(samples), cfg);
        run.loss_trace = std::move(result.epoch_loss);
        return std::move(result.model);
      }
      case Method::Svm: {
        SvmHyper h = config.svm;
        h.seed = run_seed;
        return SvmArtifact{train_svm_ovr(gather(data, split.train, energy_features, k), labels, h), k};
      }
      case Method::Tmlp: {
        MlpHyper h = config.tmlp;
        h.seed = run_seed;
        const auto xs = gather(data, split.train, flatten_adapter, 0);
        h.hidden = fit_tapered_widths(static_cast<int>(xs.at(0).size()), h.hidden);
        return train_tmlp(xs, labels, h);
      }
      case Method::Autoencoder: {
        AutoencoderHyper h = config.autoencoder;
        h.seed = run_seed;
        return AutoencoderArtifact{
            train_autoencoder_clf(gather(data, split.train, energy_features, k), labels, h), k};
      }
    }
    throw ParameterError("unknown method");
  });
  run.report = in_stage("evaluate", [&] { return evaluate(run.model, data, split.test); });
  return run;
}

MethodRun run_pipeline(const ExperimentConfig& config, double fs, const BusSubset& buses,
                       Method method) {
  in_stage("config", [&] { config.validate(); });
  const Dataset ds = in_stage("dataset", [&] { return build_dataset(config.dataset_config(fs)); });
  const PreparedData data = in_stage("features", [&] { return prepare_features(ds, buses); });
  const std::uint64_t seed = config.repeat_seed(0);
  const SplitIndex split = in_stage("split", [&] {
    return split_stratified(data.labels, config.train_fraction, seed);
  });
  return train_and_evaluate(data, split, method, config, seed);
}

std::vector<SweepRow> sweep_sampling_rate(const ExperimentConfig& config) {
  in_stage("config", [&] { config.validate(); });
  if (config.fs_list.size() < 2) throw ConfigError("the sampling-rate sweep needs at least 2 rates");
  std::vector<double> rates = config.fs_list;
  std::sort(rates.begin(), rates.end());
  if (std::adjacent_find(rates.begin(), rates.end()) != rates.end())
    throw ConfigError("duplicate sampling rate in fs_list");
  const BusSubset all(kMonitoredBuses.begin(), kMonitoredBuses.end());
  std::vector<PreparedData> cells;
  for (double f : rates) {
    const Dataset ds = in_stage("dataset", [&] { return build_dataset(config.dataset_config(f)); });
    cells.push_back(in_stage("features", [&] { return prepare_features(ds, all); }));
  }
  return run_cnn_cells(config, cells);
}

std::vector<SweepRow> sweep_placement(const ExperimentConfig& config) {
  in_stage("config", [&] { config.validate(); });
  const Dataset ds =
      in_stage("dataset", [&] { return build_dataset(config.dataset_config(config.fs)); });
  std::vector<PreparedData> cells;
  for (const auto& subset : config.bus_subsets)
    cells.push_back(in_stage("features", [&] { return prepare_features(ds, subset); }));
  return run_cnn_cells(config, cells);
}

Comparison compare_methods(const ExperimentConfig& config) {
  in_stage("config", [&] { config.validate(); });
  if (config.methods.size() < 2) throw ConfigError("a comparison needs at least 2 methods");
  std::vector<Method> methods;
  for (Method m : kAllMethods)
    if (std::find(config.methods.begin(), config.methods.end(), m) != config.methods.end())
      methods.push_back(m);

  const Dataset ds =
      in_stage("dataset", [&] { return build_dataset(config.dataset_config(config.fs)); });
  const PreparedData data = in_stage("features", [&] { return prepare_features(ds, config.buses); });
  const auto repeats = static_cast<std::size_t>(config.repeats);
  std::vector<SplitIndex> splits(repeats);
  for (std::size_t r = 0; r < repeats; ++r)
    splits[r] = in_stage("split", [&] {
      return split_stratified(data.labels, config.train_fraction,
                              config.repeat_seed(static_cast<int>(r)));
    });

  Comparison cmp;
  cmp.repeats = config.repeats;
  cmp.runs.resize(repeats * methods.size());
  parallel_for(cmp.runs.size(), config.threads, [&](std::size_t k) {
    const std::size_t r = k / methods.size();
    cmp.runs[k] = train_and_evaluate(data, splits[r], methods[k % methods.size()], config,
                                     config.repeat_seed(static_cast<int>(r)));
  });

  for (std::size_t m = 0; m < methods.size(); ++m) {
    MethodSummary s;
    s.method = methods[m];
    std::vector<double> acc;
    std::vector<std::optional<double>> pre, rec, f1, fpr;
    for (std::size_t r = 0; r < repeats; ++r) {
      const MetricsReport& rep = cmp.runs[r * methods.size() + m].report;
      acc.push_back(rep.accuracy);
      pre.push_back(rep.macro.precision);
      rec.push_back(rep.macro.recall);
      f1.push_back(rep.macro.f1);
      fpr.push_back(rep.macro.fpr);
    }
    s.accuracy = mean(acc);
    s.macro = {mean_defined(pre), mean_defined(rec), mean_defined(f1), mean_defined(fpr)};
    cmp.summary.push_back(s);
  }
  return cmp;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows, bool by_fs) {
  os << (by_fs ? "fs" : "buses") << ",acc_mean";
  const std::size_t repeats = rows.empty() ? 0 : rows.front().accuracies.size();
  for (std::size_t r = 0; r < repeats; ++r) os << ",acc_r" << r + 1;
  os << '\n';
  for (const auto& row : rows) {
    if (by_fs) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.0f", row.fs);
      os << buf;
    } else {
      os << format_buses(row.buses, '+');
    }
    os << ',' << format_percent(row.mean_accuracy);
    for (double a : row.accuracies) os << ',' << format_percent(a);
    os << '\n';
  }
}

void write_compare_csv(std::ostream& os, const Comparison& cmp) {
  os << "method,acc,pre_macro,rec_macro,f1_macro,fpr_macro,repeats\n";
  for (const auto& s : cmp.summary)
    os << method_name(s.method) << ',' << format_percent(s.accuracy) << ','
       << format_percent(s.macro.precision) << ',' << format_percent(s.macro.recall) << ','
       << format_percent(s.macro.f1) << ',' << format_percent(s.macro.fpr) << ',' << cmp.repeats
       << '\n';
}

void write_compare_runs_csv(std::ostream& os, const Comparison& cmp, int num_methods) {
  os << "method,repeat,seed,split_fingerprint,acc,pre_macro,rec_macro,f1_macro,fpr_macro,"
        "undefined_excluded\n";
  for (std::size_t k = 0; k < cmp.runs.size(); ++k) {
    const MethodRun& run = cmp.runs[k];
    const MetricsReport& r = run.report;
    os << method_name(run.method) << ',' << k / static_cast<std::size_t>(num_methods) + 1 << ','
       << run.seed << ',' << fingerprint_hex(run.fingerprint) << ',' << format_percent(r.accuracy)
       << ',' << format_percent(r.macro.precision) << ',' << format_percent(r.macro.recall) << ','
       << format_percent(r.macro.f1) << ',' << format_percent(r.macro.fpr) << ','
       << r.undefined_excluded << '\n';
  }
}

void save_comparison(const fs::path& dir, const ExperimentConfig& config, const Comparison& cmp) {
  const int num_methods = static_cast<int>(cmp.summary.size());
  std::vector<std::string> outputs;
  auto emit = [&](const std::string& rel, const std::string& text) {
    write_text_file(dir / rel, text);
    outputs.push_back(rel);
  };
  emit("reports/compare.csv", to_text([&](std::ostream& os) { write_compare_csv(os, cmp); }));
  emit("reports/compare_runs.csv",
       to_text([&](std::ostream& os) { write_compare_runs_csv(os, cmp, num_methods); }));
  for (std::size_t k = 0; k < cmp.runs.size(); ++k) {
    const MethodRun& run = cmp.runs[k];
    const std::string name = run_name(run.method, static_cast<int>(k) / num_methods);
    emit("reports/" + name + ".csv", to_text([&](std::ostream& os) {
           write_report_csv(os, std::string(method_name(run.method)), run.report);
         }));
    emit("confusion/" + name + ".csv",
         to_text([&](std::ostream& os) { write_confusion_csv(os, run.report.confusion); }));
    std::ostringstream model(std::ios::binary);
    write_model(model, run.model);
    emit("models/" + name + ".bin", model.str());
  }
  write_manifest(dir, "compare", config, outputs);
}

void save_sweep(const fs::path& dir, const ExperimentConfig& config,
                const std::vector<SweepRow>& rows, bool by_fs) {
  const std::string rel = by_fs ? "reports/sweep_fs.csv" : "reports/sweep_placement.csv";
  write_text_file(dir / rel, to_text([&](std::ostream& os) { write_sweep_csv(os, rows, by_fs); }));
  write_manifest(dir, by_fs ? "sweep-fs" : "sweep-placement", config, {rel});
}

void aggregate_reports(const fs::path& dir, std::ostream& os) {
  const fs::path reports = dir / "reports";
  if (!fs::is_directory(reports)) throw FormatError("no reports directory under " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(reports)) {
    const std::string stem = entry.path().stem().string();
    const auto pos = stem.rfind("_r");
    if (entry.path().extension() != ".csv" || pos == std::string::npos || pos + 2 >= stem.size())
      continue;
    if (!std::all_of(stem.begin() + static_cast<std::ptrdiff_t>(pos) + 2, stem.end(),
                     [](unsigned char c) { return std::isdigit(c); }))
      continue;
    files.push_back(entry.path());
  }
  if (files.empty()) throw FormatError("no per-run reports under " + reports.string());
  std::sort(files.begin(), files.end());
  os << "run,method,acc,pre_macro,rec_macro,f1_macro,fpr_macro,undefined_excluded\n";
  for (const auto& f : files) {
    std::ifstream in(f);
    const ParsedReport p = read_report_csv(in, f.string());
    const MetricsReport& r = p.report;
    os << f.stem().string() << ',' << p.method << ',' << format_percent(r.accuracy) << ','
       << format_percent(r.macro.precision) << ',' << format_percent(r.macro.recall) << ','
       << format_percent(r.macro.f1) << ',' << format_percent(r.macro.fpr) << ','
       << r.undefined_excluded << '\n';
  }
}

}  // namespace swec
