#ifndef IAMSEQ_EXPLAIN_HPP_
#define IAMSEQ_EXPLAIN_HPP_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "iamseq/data.hpp"
#include "iamseq/model.hpp"

namespace iamseq {

struct ClassCause {
  int cls = 0;
  std::size_t windows_used = 0;
  // Mean input-attention importance over the class's windows; empty when
  // no window qualified.
  std::optional<std::vector<double>> importance;
  std::vector<std::size_t> top_features;  // descending importance
};

struct CauseReport {
  std::size_t num_features = 0;
  std::size_t top_k = 0;
  bool correct_only = true;
  std::vector<ClassCause> classes;  // one per class id
};

// Feature ranking from the input attention: for each class, the
// importance profile (attention received per feature) averaged over the
// class's correctly classified windows, or over all its windows when
// `correct_only` is false.
CauseReport explain(IamBiLstmClassifier& model, std::span<const Window> windows,
                    std::size_t top_k, bool correct_only = true,
                    std::size_t batch_size = 64);

// Indices of the k largest entries, ties broken by lower index.
std::vector<std::size_t> top_k_indices(std::span<const double> values,
                                       std::size_t k);

// Heatmap of one importance vector: cells of 40x40 px laid out 13 per row
// (feature i at row i / 13, column i % 13), fill interpolated linearly from
// white at the profile minimum to #b40426 at its maximum.
std::string render_heatmap_svg(std::span<const double> importance,
                               const std::string& title);

// Writes class_XX.csv (feature,importance,rank), class_XX.svg and
// summary.csv (class,windows,top features) into `dir`.
void write_cause_report(const std::filesystem::path& dir,
                        const CauseReport& report);

}  // namespace iamseq

#endif  // IAMSEQ_EXPLAIN_HPP_
