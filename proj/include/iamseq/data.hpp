#ifndef IAMSEQ_DATA_HPP_
#define IAMSEQ_DATA_HPP_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "iamseq/tensor.hpp"

namespace iamseq {

// PerFile: the whole file is one operating condition and every row must
// carry the same label. PerRow: labels may change mid-file (converted test
// runs where the fault starts part way through).
enum class LabelMode { PerFile, PerRow };

const char* to_string(LabelMode mode);
LabelMode label_mode_from_string(const std::string& name);

// One recorded run: rows x features, row-major.
struct RawSeries {
  std::size_t num_features = 0;
  std::vector<double> values;
  std::vector<int> labels;  // one per row
  LabelMode label_mode = LabelMode::PerFile;
  std::string source;

  std::size_t rows() const {
    return num_features == 0 ? 0 : values.size() / num_features;
  }
  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * num_features, num_features};
  }
};

// Column name of feature i: f00, f01, ...
std::string feature_column_name(std::size_t index);

// Number of contiguous feature columns f00..f{n-1} in the header of `path`.
std::size_t detect_feature_count(const std::filesystem::path& path);

// Reads a CSV with a header row holding feature columns f00..f{n-1} (any
// order, extra columns ignored) and a `label` column. When `num_features` is
// empty the count is detected from the header. Malformed input raises
// LoadError citing the 1-based data row and the column.
RawSeries load_csv(const std::filesystem::path& path,
                   std::optional<std::size_t> num_features = 52,
                   LabelMode mode = LabelMode::PerFile);

// Every *.csv under `dir`, sorted by file name.
std::vector<RawSeries> load_csv_dir(const std::filesystem::path& dir,
                                    std::optional<std::size_t> num_features,
                                    LabelMode mode);

void write_csv(const std::filesystem::path& path, const RawSeries& series);

// Per-feature z-score statistics fitted on training data. Standard
// deviations are population values; a constant feature gets std 1 and is
// listed in `constant_features`.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<std::size_t> constant_features;

  std::size_t num_features() const { return mean.size(); }
};

NormStats fit_normalizer(std::span<const RawSeries> train);
RawSeries apply_normalizer(const RawSeries& series, const NormStats& stats);
RawSeries invert_normalizer(const RawSeries& series, const NormStats& stats);

// JSON sidecar: {"format", "num_features", "mean", "std", "constant_features"}.
void save_norm_stats(const std::filesystem::path& path, const NormStats& stats);
NormStats load_norm_stats(const std::filesystem::path& path);

struct Window {
  std::size_t steps = 0;
  std::size_t features = 0;
  std::vector<double> values;  // steps x features
  int label = 0;
};

// Windows of `seq_len` rows starting every `stride` rows:
// floor((N - seq_len) / stride) + 1 of them. The label is the file label, or
// the label of the window's last row in PerRow mode.
std::vector<Window> windowize(const RawSeries& series, std::size_t seq_len,
                              std::size_t stride = 1);

struct SequenceBatch {
  Tensor inputs;            // (batch, steps, features)
  std::vector<int> labels;  // one per window
};

SequenceBatch gather_batch(std::span<const Window> windows,
                           std::span<const std::size_t> indices);

// Partitions the windows into batches of `batch_size`; the last batch may be
// short. With `shuffle` the order is a Fisher-Yates permutation drawn from
// `rng`.
std::vector<SequenceBatch> make_batches(std::span<const Window> windows,
                                        std::size_t batch_size, bool shuffle,
                                        Rng& rng);

}  // namespace iamseq

#endif  // IAMSEQ_DATA_HPP_
