// swec: command-line front end for dataset generation, training, evaluation and the
// experiment sweeps.

#include "swec/config.hpp"
#include "swec/expharness.hpp"
#include "swec/persist.hpp"
#include "swec/tinycnn.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace swec;

/// Flags mirroring ExperimentConfig keys; any flag given overrides the config file.
struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> fs;
  std::vector<double> fs_list;
  std::vector<std::string> bus_subsets;
  std::optional<std::string> buses;
  std::optional<double> train_fraction;
  std::optional<std::string> snr_db;
  std::optional<double> jitter_max_ms;
  std::optional<int> repeats;
  std::optional<std::string> methods;
  std::optional<int> num_intervals;
  std::optional<unsigned> threads;
  std::optional<int> cnn_epochs, cnn_batch_size;
  std::optional<double> cnn_learning_rate, cnn_momentum, cnn_init_std;
  std::optional<double> svm_c, svm_step;
  std::optional<int> svm_epochs;
  std::optional<int> tmlp_epochs, tmlp_batch_size;
  std::optional<double> tmlp_learning_rate, tmlp_momentum;
  std::optional<int> ae_code_width, ae_epochs, ae_head_epochs, ae_batch_size;
  std::optional<double> ae_learning_rate, ae_momentum;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "Experiment config JSON")->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "Global seed");
    app->add_option("--fs", fs, "Sampling rate in Hz");
    app->add_option("--fs-list", fs_list, "Sweep sampling rates")->delimiter(',');
    app->add_option("--bus-subset", bus_subsets, "Placement subset, e.g. 632,671 (repeatable)");
    app->add_option("--buses", buses, "Monitored buses, e.g. 632,671,675");
    app->add_option("--train-fraction", train_fraction);
    app->add_option("--snr-db", snr_db, "Noise SNR in dB, or 'inf'");
    app->add_option("--jitter-max-ms", jitter_max_ms);
    app->add_option("--repeats", repeats);
    app->add_option("--methods", methods, "Comma list of autoencoder,svm,tmlp,cnn");
    app->add_option("--num-intervals", num_intervals);
    app->add_option("--threads", threads);
    app->add_option("--cnn-epochs", cnn_epochs);
    app->add_option("--cnn-batch-size", cnn_batch_size);
    app->add_option("--cnn-learning-rate", cnn_learning_rate);
    app->add_option("--cnn-momentum", cnn_momentum);
    app->add_option("--cnn-init-std", cnn_init_std);
    app->add_option("--svm-c", svm_c);
    app->add_option("--svm-epochs", svm_epochs);
    app->add_option("--svm-step", svm_step);
    app->add_option("--tmlp-epochs", tmlp_epochs);
    app->add_option("--tmlp-batch-size", tmlp_batch_size);
    app->add_option("--tmlp-learning-rate", tmlp_learning_rate);
    app->add_option("--tmlp-momentum", tmlp_momentum);
    app->add_option("--ae-code-width", ae_code_width);
    app->add_option("--ae-epochs", ae_epochs);
    app->add_option("--ae-head-epochs", ae_head_epochs);
    app->add_option("--ae-batch-size", ae_batch_size);
    app->add_option("--ae-learning-rate", ae_learning_rate);
    app->add_option("--ae-momentum", ae_momentum);
  }

  ExperimentConfig resolve() const {
    ExperimentConfig c = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    auto set = [](const auto& opt, auto& field) {
      if (opt) field = *opt;
    };
    set(seed, c.seed);
    set(fs, c.fs);
    if (!fs_list.empty()) c.fs_list = fs_list;
    if (!bus_subsets.empty()) {
      c.bus_subsets.clear();
      for (const auto& s : bus_subsets) c.bus_subsets.push_back(parse_buses(s));
    }
    if (buses) c.buses = parse_buses(*buses);
    set(train_fraction, c.train_fraction);
    if (snr_db) {
      if (*snr_db == "inf") {
        c.generator.snr_db = std::numeric_limits<double>::infinity();
      } else {
        try {
          std::size_t used = 0;
          c.generator.snr_db = std::stod(*snr_db, &used);
          if (used != snr_db->size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
          throw ConfigError("--snr-db expects a number or 'inf'");
        }
      }
    }
    if (jitter_max_ms) c.generator.jitter_max = *jitter_max_ms * 1e-3;
    set(repeats, c.repeats);
    if (methods) {
      c.methods.clear();
      std::stringstream ss(*methods);
      for (std::string m; std::getline(ss, m, ',');) c.methods.push_back(method_from_name(m));
    }
    set(num_intervals, c.num_intervals);
    set(threads, c.threads);
    set(cnn_epochs, c.cnn.epochs);
    set(cnn_batch_size, c.cnn.batch_size);
    set(cnn_learning_rate, c.cnn.learning_rate);
    set(cnn_momentum, c.cnn.momentum);
    set(cnn_init_std, c.cnn.init_std);
    set(svm_c, c.svm.c);
    set(svm_epochs, c.svm.epochs);
    set(svm_step, c.svm.step);
    set(tmlp_epochs, c.tmlp.epochs);
    set(tmlp_batch_size, c.tmlp.batch_size);
    set(tmlp_learning_rate, c.tmlp.learning_rate);
    set(tmlp_momentum, c.tmlp.momentum);
    set(ae_code_width, c.autoencoder.code_width);
    set(ae_epochs, c.autoencoder.epochs);
    set(ae_head_epochs, c.autoencoder.head_epochs);
    set(ae_batch_size, c.autoencoder.batch_size);
    set(ae_learning_rate, c.autoencoder.learning_rate);
    set(ae_momentum, c.autoencoder.momentum);
    c.validate();
    return c;
  }
};

/// Dataset and split shared by `train` and `eval`.
struct LoadedSplit {
  PreparedData data;
  SplitIndex split;
};

LoadedSplit load_split(const std::string& dir, const ExperimentConfig& config, bool fs_given) {
  const Dataset ds = load_dataset(dir);
  if (fs_given && ds.fs != config.fs)
    throw ConfigError("dataset in " + dir + " is sampled at " + std::to_string(ds.fs) +
                      " Hz, not the requested " + std::to_string(config.fs) + " Hz");
  LoadedSplit out;
  out.data = prepare_features(ds, config.buses);
  out.split = split_stratified(out.data.labels, config.train_fraction, config.seed);
  return out;
}

int cmd_generate(const Overrides& o, const std::string& out_dir) {
  const ExperimentConfig c = o.resolve();
  const Dataset ds = build_dataset(c.dataset_config(c.fs));
  save_dataset(ds, out_dir);
  std::cout << "class,count\n";
  for (int k = 0; k < kNumClasses; ++k) std::cout << k + 1 << ',' << ds.counts[k] << '\n';
  return 0;
}

int cmd_train(const Overrides& o, const std::string& data_dir, const std::string& model_path,
              const std::string& method_name_arg) {
  const ExperimentConfig c = o.resolve();
  const Method method = method_from_name(method_name_arg);
  const LoadedSplit ls = load_split(data_dir, c, o.fs.has_value());
  const MethodRun run = train_and_evaluate(ls.data, ls.split, method, c, c.seed);
  save_model(run.model, model_path);
  std::cout << "method,train_records,test_records,split_fingerprint\n"
            << method_name(method) << ',' << ls.split.train.size() << ',' << ls.split.test.size()
            << ',' << fingerprint_hex(run.fingerprint) << '\n';
  if (!run.loss_trace.empty()) {
    std::cout << "epoch,loss\n";
    for (std::size_t e = 0; e < run.loss_trace.size(); ++e) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%zu,%.6f\n", e + 1, run.loss_trace[e]);
      std::cout << buf;
    }
  }
  return 0;
}

int cmd_eval(const Overrides& o, const std::string& data_dir, const std::string& model_path) {
  const ExperimentConfig c = o.resolve();
  const ModelArtifact model = load_model(model_path);
  const LoadedSplit ls = load_split(data_dir, c, o.fs.has_value());
  const MetricsReport report = evaluate(model, ls.data, ls.split.test);
  write_report_csv(std::cout, std::string(method_name(artifact_method(model))), report);
  return 0;
}

int cmd_sweep(const Overrides& o, const std::string& out_dir, bool by_fs) {
  const ExperimentConfig c = o.resolve();
  const auto rows = by_fs ? sweep_sampling_rate(c) : sweep_placement(c);
  if (!out_dir.empty()) save_sweep(out_dir, c, rows, by_fs);
  write_sweep_csv(std::cout, rows, by_fs);
  return 0;
}

int cmd_compare(const Overrides& o, const std::string& out_dir) {
  const ExperimentConfig c = o.resolve();
  const Comparison cmp = compare_methods(c);
  if (!out_dir.empty()) save_comparison(out_dir, c, cmp);
  write_compare_csv(std::cout, cmp);
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, int height, int width, int batch, double h) {
  const auto gc = make_grad_check_case<double>(seed, height, width, batch);
  const GradCheckReport r = grad_check(gc.model, std::span<const Sample<double>>(gc.batch), h);
  char buf[128];
  std::snprintf(buf, sizeof buf, "seed,parameters,max_rel_error\n%llu,%zu,%.3e\n",
                static_cast<unsigned long long>(seed), r.parameters_checked, r.max_rel_error);
  std::cout << buf;
  if (!(r.max_rel_error < 1e-4)) {
    std::cerr << "swec: check error: max relative error exceeds 1e-4\n";
    return 1;
  }
  return 0;
}

int cmd_report(const std::string& in_dir, const std::string& out_path) {
  std::ostringstream os;
  aggregate_reports(in_dir, os);
  if (!out_path.empty()) write_text_file(out_path, os.str());
  std::cout << os.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synchro-waveform event cause analysis workbench", "swec"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Report wall time on stderr");

  Overrides o;
  std::string out_dir, data_dir, model_path, in_dir, report_out, method = "cnn";
  std::uint64_t gc_seed = 1;
  int gc_height = 3, gc_width = 166, gc_batch = 2;
  double gc_h = 1e-5;

  auto* generate = app.add_subcommand("generate", "Build a dataset directory");
  o.attach(generate);
  generate->add_option("--out", out_dir, "Dataset directory")->required();

  auto* train = app.add_subcommand("train", "Train a model on a dataset directory");
  o.attach(train);
  train->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--model", model_path, "Output model file")->required();
  train->add_option("--method", method, "cnn, svm, tmlp or autoencoder");

  auto* eval = app.add_subcommand("eval", "Evaluate a model on the test split");
  o.attach(eval);
  eval->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--model", model_path, "Model file")->required()->check(CLI::ExistingFile);

  auto* sweep_fs = app.add_subcommand("sweep-fs", "CNN accuracy against sampling rate");
  o.attach(sweep_fs);
  sweep_fs->add_option("--out", out_dir, "Run directory");

  auto* sweep_pl = app.add_subcommand("sweep-placement", "CNN accuracy against unit placement");
  o.attach(sweep_pl);
  sweep_pl->add_option("--out", out_dir, "Run directory");

  auto* compare = app.add_subcommand("compare", "Compare the CNN with the baselines");
  o.attach(compare);
  compare->add_option("--out", out_dir, "Run directory");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of CNN gradients");
  gradcheck->add_option("--seed", gc_seed);
  gradcheck->add_option("--height", gc_height, "Input rows (buses)");
  gradcheck->add_option("--width", gc_width, "Input columns (coefficients)");
  gradcheck->add_option("--batch", gc_batch);
  gradcheck->add_option("--step", gc_h, "Finite-difference step h");

  auto* report = app.add_subcommand("report", "Collect per-run reports into one CSV");
  report->add_option("--in", in_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
  report->add_option("--out", report_out, "Also write the CSV here");

  if (argc <= 1) {
    std::cerr << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "swec: usage error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  const auto start = std::chrono::steady_clock::now();
  int rc = 0;
  try {
    if (*generate) rc = cmd_generate(o, out_dir);
    else if (*train) rc = cmd_train(o, data_dir, model_path, method);
    else if (*eval) rc = cmd_eval(o, data_dir, model_path);
    else if (*sweep_fs) rc = cmd_sweep(o, out_dir, true);
    else if (*sweep_pl) rc = cmd_sweep(o, out_dir, false);
    else if (*compare) rc = cmd_compare(o, out_dir);
    else if (*gradcheck) rc = cmd_gradcheck(gc_seed, gc_height, gc_width, gc_batch, gc_h);
    else if (*report) rc = cmd_report(in_dir, report_out);
  } catch (const swec::Error& e) {
    std::cerr << "swec: " << e.category() << " error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "swec: io error: " << e.what() << '\n';
    return 1;
  }
  if (verbose)
    std::cerr << "swec: elapsed "
              << std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()
              << " s\n";
  return rc;
}
