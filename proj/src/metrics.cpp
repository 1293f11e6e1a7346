#include "iamseq/metrics.hpp"

#include <fstream>
#include <string>

#include "json.hpp"

#include "iamseq/errors.hpp"

namespace iamseq {

ConfusionMatrix build_confusion(std::span<const int> truth,
                                std::span<const int> predicted,
                                std::size_t num_classes) {
  if (truth.size() != predicted.size()) {
    throw ContractError("confusion: truth and prediction counts differ");
  }
  ConfusionMatrix m(num_classes, std::vector<std::size_t>(num_classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i];
    const int p = predicted[i];
    if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= num_classes ||
        static_cast<std::size_t>(p) >= num_classes) {
      throw ContractError("confusion: class id out of range at sample " +
                          std::to_string(i));
    }
    ++m[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  return m;
}

MetricsReport metrics_from_confusion(const ConfusionMatrix& confusion) {
  const std::size_t n = confusion.size();
  if (n == 0) throw ContractError("metrics: empty confusion matrix");
  for (const auto& row : confusion) {
    if (row.size() != n) throw ContractError("metrics: confusion matrix is not square");
  }
  MetricsReport r;
  r.confusion = confusion;
  std::size_t trace = 0;
  std::vector<std::size_t> row_sum(n, 0), col_sum(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      row_sum[i] += confusion[i][j];
      col_sum[j] += confusion[i][j];
      r.total += confusion[i][j];
    }
    trace += confusion[i][i];
  }
  if (r.total == 0) throw ContractError("metrics: no samples");

  r.accuracy = static_cast<double>(trace) / static_cast<double>(r.total);
  r.misclassification = 1.0 - r.accuracy;

  if (row_sum[0] == 0) {
    r.false_alarm_undefined = true;
  } else {
    r.false_alarm_rate = static_cast<double>(row_sum[0] - confusion[0][0]) /
                         static_cast<double>(row_sum[0]);
  }

  for (std::size_t c = 0; c < n; ++c) {
    const double tp = static_cast<double>(confusion[c][c]);
    const double fp = static_cast<double>(col_sum[c]) - tp;
    const double fn = static_cast<double>(row_sum[c]) - tp;
    const bool p_undef = col_sum[c] == 0;
    const bool r_undef = row_sum[c] == 0;
    const double precision = p_undef ? 0.0 : tp / (tp + fp);
    const double recall = r_undef ? 0.0 : tp / (tp + fn);
    r.precision.push_back(precision);
    r.recall.push_back(recall);
    r.precision_undefined.push_back(p_undef);
    r.recall_undefined.push_back(r_undef);
    r.f1.push_back(precision + recall > 0.0
                       ? 2.0 * precision * recall / (precision + recall)
                       : 0.0);
    r.false_discovery.push_back(p_undef ? 0.0 : fp / (fp + tp));
  }
  return r;
}

void write_metrics_json(const std::filesystem::path& path,
                        const MetricsReport& report, double mean_loss) {
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t c = 0; c < report.num_classes(); ++c) {
    std::size_t support = 0;
    for (std::size_t v : report.confusion[c]) support += v;
    classes.push_back({{"class", c},
                       {"support", support},
                       {"precision", report.precision[c]},
                       {"recall", report.recall[c]},
                       {"f1", report.f1[c]},
                       {"false_discovery_rate", report.false_discovery[c]},
                       {"precision_undefined", static_cast<bool>(report.precision_undefined[c])},
                       {"recall_undefined", static_cast<bool>(report.recall_undefined[c])}});
  }
  nlohmann::json j{{"samples", report.total},
                   {"loss", mean_loss},
                   {"accuracy", report.accuracy},
                   {"misclassification_rate", report.misclassification},
                   {"false_alarm_rate", report.false_alarm_rate},
                   {"false_alarm_undefined", report.false_alarm_undefined},
                   {"classes", classes}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_confusion_csv(const std::filesystem::path& path,
                         const MetricsReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "truth\\predicted";
  for (std::size_t c = 0; c < report.num_classes(); ++c) out << ',' << c;
  out << '\n';
  for (std::size_t r = 0; r < report.num_classes(); ++r) {
    out << r;
    for (std::size_t v : report.confusion[r]) out << ',' << v;
    out << '\n';
  }
}

}  // namespace iamseq
