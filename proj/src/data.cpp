#include "iamseq/data.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "iamseq/errors.hpp"

namespace iamseq {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string location(const std::filesystem::path& path, std::size_t row,
                     const std::string& column) {
  return path.string() + ": row " + std::to_string(row) + ", column '" +
         column + "'";
}

std::vector<std::string> read_header(std::ifstream& in,
                                     const std::filesystem::path& path) {
  std::string line;
  if (!std::getline(in, line)) {
    throw LoadError(path.string() + ": empty file (missing header row)");
  }
  return split_csv_line(line);
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  return in;
}

}  // namespace

const char* to_string(LabelMode mode) {
  return mode == LabelMode::PerFile ? "per_file" : "per_row";
}

LabelMode label_mode_from_string(const std::string& name) {
  if (name == "per_file") return LabelMode::PerFile;
  if (name == "per_row") return LabelMode::PerRow;
  throw ConfigError("unknown label mode '" + name +
                    "' (expected per_file or per_row)");
}

std::string feature_column_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "f%02zu", index);
  return buf;
}

std::size_t detect_feature_count(const std::filesystem::path& path) {
  auto in = open_input(path);
  const auto header = read_header(in, path);
  std::size_t n = 0;
  while (std::find(header.begin(), header.end(), feature_column_name(n)) !=
         header.end()) {
    ++n;
  }
  return n;
}

RawSeries load_csv(const std::filesystem::path& path,
                   std::optional<std::size_t> num_features, LabelMode mode) {
  auto in = open_input(path);
  const auto header = read_header(in, path);
  const std::size_t features =
      num_features ? *num_features : detect_feature_count(path);
  if (features == 0) {
    throw LoadError(path.string() + ": no feature columns (expected f00...)");
  }

  auto column_of = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw LoadError(path.string() + ": missing column " + name);
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  std::vector<std::size_t> feature_cols(features);
  for (std::size_t f = 0; f < features; ++f) {
    feature_cols[f] = column_of(feature_column_name(f));
  }
  const std::size_t label_col = column_of("label");

  RawSeries series;
  series.num_features = features;
  series.label_mode = mode;
  series.source = path.string();

  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_csv_line(line);
    if (cells.size() < header.size()) {
      throw LoadError(path.string() + ": row " + std::to_string(row) +
                      " has " + std::to_string(cells.size()) +
                      " cells, header has " + std::to_string(header.size()));
    }
    for (std::size_t f = 0; f < features; ++f) {
      const std::string& cell = cells[feature_cols[f]];
      char* end = nullptr;
      errno = 0;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || *end != '\0' || errno == ERANGE) {
        throw LoadError(location(path, row, feature_column_name(f)) +
                        ": not a number: '" + cell + "'");
      }
      if (!std::isfinite(v)) {
        throw LoadError(location(path, row, feature_column_name(f)) +
                        ": non-finite value '" + cell + "'");
      }
      series.values.push_back(v);
    }
    const std::string& label_cell = cells[label_col];
    char* end = nullptr;
    const long label = std::strtol(label_cell.c_str(), &end, 10);
    if (label_cell.empty() || *end != '\0' || label < 0) {
      throw LoadError(location(path, row, "label") +
                      ": label must be a non-negative integer, got '" +
                      label_cell + "'");
    }
    if (mode == LabelMode::PerFile && !series.labels.empty() &&
        series.labels.front() != label) {
      throw LoadError(location(path, row, "label") + ": label " +
                      std::to_string(label) + " differs from the file label " +
                      std::to_string(series.labels.front()));
    }
    series.labels.push_back(static_cast<int>(label));
  }
  if (row == 0) throw LoadError(path.string() + ": no data rows");
  return series;
}

std::vector<RawSeries> load_csv_dir(const std::filesystem::path& dir,
                                    std::optional<std::size_t> num_features,
                                    LabelMode mode) {
  if (!std::filesystem::is_directory(dir)) {
    throw LoadError("data directory not found: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") {
      files.push_back(entry.path());
    }
  }
  if (files.empty()) throw LoadError("no .csv files in " + dir.string());
  std::sort(files.begin(), files.end());
  std::vector<RawSeries> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(load_csv(f, num_features, mode));
  return out;
}

void write_csv(const std::filesystem::path& path, const RawSeries& series) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t f = 0; f < series.num_features; ++f) {
    out << feature_column_name(f) << ',';
  }
  out << "label\n";
  char buf[32];
  for (std::size_t r = 0; r < series.rows(); ++r) {
    for (double v : series.row(r)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << buf << ',';
    }
    out << series.labels[r] << '\n';
  }
  if (!out) throw IoError("failed while writing " + path.string());
}

// ---- Normalization ---------------------------------------------------------

NormStats fit_normalizer(std::span<const RawSeries> train) {
  if (train.empty()) throw ContractError("fit_normalizer: empty training set");
  const std::size_t features = train.front().num_features;
  std::size_t count = 0;
  NormStats stats;
  stats.mean.assign(features, 0.0);
  stats.stddev.assign(features, 0.0);
  for (const auto& s : train) {
    if (s.num_features != features) {
      throw ContractError("fit_normalizer: series disagree on feature count (" +
                          std::to_string(s.num_features) + " vs " +
                          std::to_string(features) + ")");
    }
    for (std::size_t r = 0; r < s.rows(); ++r) {
      auto row = s.row(r);
      for (std::size_t f = 0; f < features; ++f) stats.mean[f] += row[f];
    }
    count += s.rows();
  }
  if (count == 0) throw ContractError("fit_normalizer: training set has no rows");
  for (double& m : stats.mean) m /= static_cast<double>(count);
  for (const auto& s : train) {
    for (std::size_t r = 0; r < s.rows(); ++r) {
      auto row = s.row(r);
      for (std::size_t f = 0; f < features; ++f) {
        const double d = row[f] - stats.mean[f];
        stats.stddev[f] += d * d;
      }
    }
  }
  for (std::size_t f = 0; f < features; ++f) {
    stats.stddev[f] = std::sqrt(stats.stddev[f] / static_cast<double>(count));
    if (stats.stddev[f] <= 1e-12 * std::max(1.0, std::abs(stats.mean[f]))) {
      stats.stddev[f] = 1.0;
      stats.constant_features.push_back(f);
    }
  }
  return stats;
}

RawSeries apply_normalizer(const RawSeries& series, const NormStats& stats) {
  if (series.num_features != stats.num_features()) {
    throw ContractError("apply_normalizer: series has " +
                        std::to_string(series.num_features) +
                        " features, statistics have " +
                        std::to_string(stats.num_features()));
  }
  RawSeries out = series;
  const std::size_t f = series.num_features;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = (out.values[i] - stats.mean[i % f]) / stats.stddev[i % f];
  }
  return out;
}

RawSeries invert_normalizer(const RawSeries& series, const NormStats& stats) {
  if (series.num_features != stats.num_features()) {
    throw ContractError("invert_normalizer: feature count mismatch");
  }
  RawSeries out = series;
  const std::size_t f = series.num_features;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = out.values[i] * stats.stddev[i % f] + stats.mean[i % f];
  }
  return out;
}

void save_norm_stats(const std::filesystem::path& path, const NormStats& stats) {
  nlohmann::json j{{"format", "iamseq-norm-v1"},
                   {"num_features", stats.num_features()},
                   {"mean", stats.mean},
                   {"std", stats.stddev},
                   {"constant_features", stats.constant_features}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

NormStats load_norm_stats(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("normalizer sidecar not found: " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("format") != "iamseq-norm-v1") {
      throw LoadError(path.string() + ": unknown sidecar format");
    }
    NormStats stats;
    stats.mean = j.at("mean").get<std::vector<double>>();
    stats.stddev = j.at("std").get<std::vector<double>>();
    stats.constant_features =
        j.at("constant_features").get<std::vector<std::size_t>>();
    if (stats.mean.size() != j.at("num_features").get<std::size_t>() ||
        stats.stddev.size() != stats.mean.size()) {
      throw LoadError(path.string() + ": inconsistent feature counts");
    }
    for (double s : stats.stddev) {
      if (!(s > 0.0)) throw LoadError(path.string() + ": non-positive std");
    }
    return stats;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string() + ": malformed sidecar: " + e.what());
  }
}

// ---- Windowing and batching ------------------------------------------------

std::vector<Window> windowize(const RawSeries& series, std::size_t seq_len,
                              std::size_t stride) {
  if (seq_len == 0 || stride == 0) {
    throw ContractError("windowize: seq_len and stride must be positive");
  }
  const std::size_t n = series.rows();
  if (n < seq_len) {
    throw ContractError("windowize: " + series.source + " has " +
                        std::to_string(n) + " rows, fewer than seq_len " +
                        std::to_string(seq_len));
  }
  const std::size_t f = series.num_features;
  const std::size_t count = (n - seq_len) / stride + 1;
  std::vector<Window> windows;
  windows.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t start = w * stride;
    Window win;
    win.steps = seq_len;
    win.features = f;
    win.values.assign(series.values.begin() + static_cast<std::ptrdiff_t>(start * f),
                      series.values.begin() +
                          static_cast<std::ptrdiff_t>((start + seq_len) * f));
    win.label = series.label_mode == LabelMode::PerFile
                    ? series.labels.front()
                    : series.labels[start + seq_len - 1];
    windows.push_back(std::move(win));
  }
  return windows;
}

SequenceBatch gather_batch(std::span<const Window> windows,
                           std::span<const std::size_t> indices) {
  if (indices.empty()) throw ContractError("gather_batch: empty batch");
  const Window& first = windows[indices.front()];
  const std::size_t per = first.steps * first.features;
  std::vector<double> values;
  values.reserve(indices.size() * per);
  SequenceBatch batch;
  batch.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    const Window& w = windows[i];
    if (w.steps != first.steps || w.features != first.features) {
      throw DimensionError("gather_batch: windows of different shapes");
    }
    values.insert(values.end(), w.values.begin(), w.values.end());
    batch.labels.push_back(w.label);
  }
  batch.inputs =
      Tensor::from({indices.size(), first.steps, first.features}, std::move(values));
  return batch;
}

std::vector<SequenceBatch> make_batches(std::span<const Window> windows,
                                        std::size_t batch_size, bool shuffle,
                                        Rng& rng) {
  if (windows.empty()) throw ContractError("make_batches: no windows");
  if (batch_size == 0) throw ParameterError("make_batches: batch size must be positive");
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.below(i)]);
    }
  }
  std::vector<SequenceBatch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t len = std::min(batch_size, order.size() - start);
    batches.push_back(gather_batch(
        windows, std::span<const std::size_t>(order.data() + start, len)));
  }
  return batches;
}

}  // namespace iamseq
