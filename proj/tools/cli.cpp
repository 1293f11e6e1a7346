#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "iamseq/checkpoint.hpp"
#include "iamseq/data.hpp"
#include "iamseq/errors.hpp"
#include "iamseq/explain.hpp"
#include "iamseq/metrics.hpp"
#include "iamseq/run_config.hpp"
#include "iamseq/synth.hpp"
#include "iamseq/train.hpp"

namespace iamseq::cli {

namespace fs = std::filesystem;

namespace {

struct Flags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> epochs;
  std::string checkpoint;
  std::string data;
  std::optional<std::size_t> top_k;
  bool all_windows = false;
  bool quiet = false;

  // prep
  std::string input;
  std::string output;
  std::optional<int> label;
  std::optional<std::size_t> fault_start;
  std::size_t prep_features = 52;
  bool transpose = false;
  std::string validate_dir;
  std::string label_mode;
};

int exit_code_for(const std::string& category) {
  if (category == "config" || category == "parameter") return kExitConfig;
  if (category == "numeric") return kExitNumeric;
  if (category == "data" || category == "contract" || category == "dimension" ||
      category == "integrity" || category == "version" || category == "io") {
    return kExitData;
  }
  return kExitFailure;
}

std::string fmt(double v, const char* spec = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

RunConfig resolve_config(const Flags& f, bool required) {
  RunConfig config;
  if (!f.config_path.empty()) {
    config = load_run_config(f.config_path);
  } else if (required) {
    throw ConfigError("--config is required for this command");
  }
  if (f.seed) config.seed = f.seed;
  if (!f.out.empty()) config.output_dir = f.out;
  if (f.epochs) config.train.epochs = *f.epochs;
  if (f.top_k) config.top_k = *f.top_k;
  if (f.all_windows) config.correct_only = false;
  if (!f.label_mode.empty()) config.label_mode = label_mode_from_string(f.label_mode);
  config.validate();
  return config;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::string class_file(int cls) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "class_%02d.csv", cls);
  return buf;
}

std::vector<RawSeries> load_split(const fs::path& dir, std::size_t features,
                                  LabelMode mode, const char* what) {
  auto series = load_csv_dir(dir, std::nullopt, mode);
  for (const auto& s : series) {
    if (s.num_features != features) {
      throw ContractError(std::string(what) + " file " + s.source + " has " +
                          std::to_string(s.num_features) + " features, model expects " +
                          std::to_string(features));
    }
  }
  return series;
}

std::vector<Window> to_windows(const std::vector<RawSeries>& series,
                               const NormStats& norm, std::size_t seq_len,
                               std::size_t stride) {
  std::vector<Window> windows;
  for (const auto& s : series) {
    auto w = windowize(apply_normalizer(s, norm), seq_len, stride);
    windows.insert(windows.end(), std::make_move_iterator(w.begin()),
                   std::make_move_iterator(w.end()));
  }
  return windows;
}

// -- commands ---------------------------------------------------------------

int cmd_synth(const Flags& f, std::ostream& out) {
  RunConfig config = resolve_config(f, true);
  SynthConfig synth = config.synth;
  synth.seed = config.required_seed();
  synth.validate();
  const SynthDataset data = synth_generate(synth);
  const fs::path train_dir = config.resolved_train_dir();
  const fs::path test_dir = config.resolved_test_dir();
  fs::create_directories(train_dir);
  fs::create_directories(test_dir);
  for (const auto& s : data.train) write_csv(train_dir / class_file(s.labels.front()), s);
  for (const auto& s : data.test) write_csv(test_dir / class_file(s.labels.front()), s);

  nlohmann::json manifest{{"seed", synth.seed},
                          {"num_classes", synth.num_classes},
                          {"windows_per_class", synth.windows_per_class},
                          {"seq_len", synth.seq_len},
                          {"num_features", synth.num_features},
                          {"shift", synth.shift},
                          {"drift_amplitude", synth.drift_amplitude},
                          {"ar_coefficient", synth.ar_coefficient},
                          {"train_dir", train_dir.string()},
                          {"test_dir", test_dir.string()}};
  nlohmann::json signatures = nlohmann::json::object();
  for (std::size_t k = 1; k < synth.num_classes; ++k) {
    signatures[std::to_string(k)] = signature_channels(k, synth.num_features);
  }
  manifest["signature_channels"] = signatures;
  write_text(train_dir.parent_path() / "manifest.json", manifest.dump(2) + "\n");
  out << "wrote " << data.train.size() << " train and " << data.test.size()
      << " test files under " << train_dir.parent_path().string() << "\n";
  return kExitOk;
}

int cmd_train(const Flags& f, std::ostream& out) {
  RunConfig config = resolve_config(f, true);
  const std::uint64_t seed = config.required_seed();
  const ModelConfig& mc = config.model;

  auto train_series =
      load_split(config.resolved_train_dir(), mc.num_features, config.label_mode, "train");
  auto test_series =
      load_split(config.resolved_test_dir(), mc.num_features, config.label_mode, "test");
  const NormStats norm = fit_normalizer(train_series);
  const auto train_windows = to_windows(train_series, norm, mc.seq_len, config.stride);
  const auto test_windows = to_windows(test_series, norm, mc.seq_len, config.stride);
  for (const auto* set : {&train_windows, &test_windows}) {
    for (const auto& w : *set) {
      if (w.label < 0 || static_cast<std::size_t>(w.label) >= mc.num_classes) {
        throw ContractError("label " + std::to_string(w.label) +
                            " outside [0, model.num_classes)");
      }
    }
  }

  const fs::path run_dir = config.run_dir();
  fs::create_directories(run_dir);
  save_norm_stats(run_dir / "norm.json", norm);
  write_text(run_dir / "config.json", run_config_to_json(config).dump(2) + "\n");
  if (!norm.constant_features.empty()) {
    out << "note: " << norm.constant_features.size()
        << " constant feature(s) left unscaled\n";
  }

  IamBiLstmClassifier model(mc, seed);
  TrainOptions options = config.train;
  options.seed = seed;
  options.checkpoint_dir = run_dir;
  const bool quiet = f.quiet;
  options.on_epoch = [&out, quiet](const EpochRecord& r) {
    if (quiet) return;
    out << "epoch " << r.epoch << " train_loss " << fmt(r.train_loss) << " train_acc "
        << fmt(r.train_acc, "%.4f") << " test_loss " << fmt(r.test_loss) << " test_acc "
        << fmt(r.test_acc, "%.4f") << " lr " << fmt(r.lr, "%.2e") << "\n";
  };
  out << "training on " << train_windows.size() << " windows, testing on "
      << test_windows.size() << "\n";
  const TrainResult result = train(model, train_windows, test_windows, options);
  write_history_csv(run_dir / "history.csv", result.history);
  out << "best epoch " << result.best_epoch;
  if (result.best_selection_loss) out << " loss " << fmt(*result.best_selection_loss);
  out << "\ncheckpoint " << (run_dir / "best.ckpt").string() << "\n";
  return kExitOk;
}

struct LoadedModel {
  Checkpoint checkpoint;
  std::unique_ptr<IamBiLstmClassifier> model;
  fs::path dir;
};

LoadedModel load_model(const Flags& f, const RunConfig& config) {
  fs::path path = f.checkpoint.empty() ? config.run_dir() / "best.ckpt" : fs::path(f.checkpoint);
  LoadedModel lm{load_checkpoint(path), nullptr, path.parent_path()};
  lm.model = std::make_unique<IamBiLstmClassifier>(lm.checkpoint.config,
                                                   lm.checkpoint.metadata.seed);
  lm.model->load_parameters(lm.checkpoint.parameters);
  return lm;
}

std::vector<Window> load_eval_windows(const Flags& f, const RunConfig& config,
                                      const LoadedModel& lm) {
  const ModelConfig& mc = lm.checkpoint.config;
  const fs::path dir = f.data.empty() ? config.resolved_test_dir() : fs::path(f.data);
  const fs::path norm_path = lm.dir / "norm.json";
  if (!fs::exists(norm_path)) {
    throw LoadError("normalizer not found next to checkpoint: " + norm_path.string());
  }
  const NormStats norm = load_norm_stats(norm_path);
  if (norm.num_features() != mc.num_features) {
    throw ContractError("normalizer has " + std::to_string(norm.num_features()) +
                        " features, checkpoint expects " +
                        std::to_string(mc.num_features));
  }
  auto series = load_split(dir, mc.num_features, config.label_mode, "data");
  auto windows = to_windows(series, norm, mc.seq_len, config.stride);
  for (const auto& w : windows) {
    if (w.label < 0 || static_cast<std::size_t>(w.label) >= mc.num_classes) {
      throw ContractError("label " + std::to_string(w.label) +
                          " outside the checkpoint's class range");
    }
  }
  return windows;
}

int cmd_eval(const Flags& f, std::ostream& out) {
  const RunConfig config = resolve_config(f, f.checkpoint.empty());
  LoadedModel lm = load_model(f, config);
  const auto windows = load_eval_windows(f, config, lm);
  const EvalResult result = evaluate(*lm.model, windows);
  const fs::path dir = lm.dir / "eval";
  fs::create_directories(dir);
  write_metrics_json(dir / "metrics.json", result.report, result.mean_loss);
  write_confusion_csv(dir / "confusion.csv", result.report);
  out << "windows " << result.report.total << " loss " << fmt(result.mean_loss)
      << " accuracy " << fmt(result.report.accuracy, "%.4f") << " false_alarm_rate ";
  if (result.report.false_alarm_undefined) {
    out << "undefined";
  } else {
    out << fmt(result.report.false_alarm_rate, "%.4f");
  }
  out << "\nwrote " << dir.string() << "\n";
  return kExitOk;
}

int cmd_explain(const Flags& f, std::ostream& out) {
  const RunConfig config = resolve_config(f, f.checkpoint.empty());
  LoadedModel lm = load_model(f, config);
  const auto windows = load_eval_windows(f, config, lm);
  const CauseReport report = explain(*lm.model, windows, config.top_k, config.correct_only);
  const fs::path dir = lm.dir / "cause";
  write_cause_report(dir, report);
  for (const auto& c : report.classes) {
    out << "class " << c.cls << ": ";
    if (!c.importance) {
      out << "omitted (no qualifying windows)\n";
      continue;
    }
    for (std::size_t i = 0; i < c.top_features.size(); ++i) {
      out << (i ? " " : "") << feature_column_name(c.top_features[i]);
    }
    out << "\n";
  }
  out << "wrote " << dir.string() << "\n";
  return kExitOk;
}

// Whitespace-separated numeric rows, one sample per line.
std::vector<std::vector<double>> read_dat(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::vector<double> row;
    std::string tok;
    while (ss >> tok) {
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0' || !std::isfinite(v)) {
        throw LoadError(path.string() + ": line " + std::to_string(line_no) +
                        ": not a finite number: '" + tok + "'");
      }
      row.push_back(v);
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw LoadError(path.string() + ": no data rows");
  return rows;
}

int cmd_prep(const Flags& f, std::ostream& out) {
  if (!f.validate_dir.empty()) {
    const LabelMode mode =
        f.label_mode.empty() ? LabelMode::PerFile : label_mode_from_string(f.label_mode);
    const auto series = load_csv_dir(f.validate_dir, std::nullopt, mode);
    for (const auto& s : series) {
      out << s.source << ": " << s.rows() << " rows, " << s.num_features << " features\n";
    }
    out << "ok: " << series.size() << " file(s)\n";
    return kExitOk;
  }
  if (f.input.empty() || f.output.empty() || !f.label) {
    throw ConfigError("prep needs --input, --output and --label (or --validate DIR)");
  }
  auto rows = read_dat(f.input);
  if (f.transpose) {
    std::vector<std::vector<double>> t(rows.front().size(),
                                       std::vector<double>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != t.size()) {
        throw LoadError(f.input + ": ragged rows, cannot transpose");
      }
      for (std::size_t c = 0; c < t.size(); ++c) t[c][r] = rows[r][c];
    }
    rows = std::move(t);
  }
  RawSeries series;
  series.num_features = f.prep_features;
  series.source = f.output;
  series.label_mode = f.fault_start ? LabelMode::PerRow : LabelMode::PerFile;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() < f.prep_features) {
      throw LoadError(f.input + ": row " + std::to_string(r + 1) + " has " +
                      std::to_string(rows[r].size()) + " values, need " +
                      std::to_string(f.prep_features));
    }
    series.values.insert(series.values.end(), rows[r].begin(),
                         rows[r].begin() + static_cast<std::ptrdiff_t>(f.prep_features));
    const bool faulty = !f.fault_start || r >= *f.fault_start;
    series.labels.push_back(faulty ? *f.label : 0);
  }
  fs::path dst(f.output);
  if (dst.has_parent_path()) fs::create_directories(dst.parent_path());
  write_csv(dst, series);
  out << "wrote " << series.rows() << " rows to " << dst.string() << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Flags f;
  CLI::App app{"IAM-BiLSTM fault classifier", "iamseq"};
  app.fallthrough();
  app.require_subcommand(1);
  app.add_option("--config", f.config_path, "run config (JSON)");
  app.add_option("--seed", f.seed, "random seed (overrides the config)");
  app.add_option("--out", f.out, "output root (overrides output_dir)");
  app.add_flag("--quiet", f.quiet, "suppress per-epoch lines");

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  auto* train_cmd = app.add_subcommand("train", "train a model");
  train_cmd->add_option("--epochs", f.epochs, "override train.epochs");
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  auto* expl = app.add_subcommand("explain", "per-class feature importance");
  for (auto* sub : {eval, expl}) {
    sub->add_option("--checkpoint", f.checkpoint, "checkpoint (default <run>/best.ckpt)");
    sub->add_option("--data", f.data, "CSV directory (default: the config's test_dir)");
    sub->add_option("--label-mode", f.label_mode, "per_file or per_row");
  }
  expl->add_option("--top-k", f.top_k, "features listed per class");
  expl->add_flag("--all-windows", f.all_windows, "include misclassified windows");
  auto* prep = app.add_subcommand("prep", "convert whitespace .dat files to CSV");
  prep->add_option("--input", f.input, "source .dat file");
  prep->add_option("--output", f.output, "destination CSV");
  prep->add_option("--label", f.label, "fault id of the file");
  prep->add_option("--fault-start", f.fault_start,
                   "rows before this index are labelled 0 (writes per-row labels)");
  prep->add_option("--features", f.prep_features, "columns to keep")->check(CLI::PositiveNumber);
  prep->add_flag("--transpose", f.transpose, "input stores one variable per line");
  prep->add_option("--validate", f.validate_dir, "check every CSV in a directory");
  prep->add_option("--label-mode", f.label_mode, "per_file or per_row (with --validate)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "ERR:config: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (synth->parsed()) return cmd_synth(f, out);
    if (train_cmd->parsed()) return cmd_train(f, out);
    if (eval->parsed()) return cmd_eval(f, out);
    if (expl->parsed()) return cmd_explain(f, out);
    if (prep->parsed()) return cmd_prep(f, out);
  } catch (const Error& e) {
    err << "ERR:" << e.category() << ": " << e.what() << "\n";
    return exit_code_for(e.category());
  } catch (const fs::filesystem_error& e) {
    err << "ERR:io: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "ERR:internal: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace iamseq::cli
