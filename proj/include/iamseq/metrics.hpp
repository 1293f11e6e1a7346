#ifndef IAMSEQ_METRICS_HPP_
#define IAMSEQ_METRICS_HPP_

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace iamseq {

// Rows are true classes, columns predictions.
using ConfusionMatrix = std::vector<std::vector<std::size_t>>;

ConfusionMatrix build_confusion(std::span<const int> truth,
                                std::span<const int> predicted,
                                std::size_t num_classes);

// Class 0 is the normal operating condition.
//   precision_c = TP/(TP+FP)      recall_c = TP/(TP+FN)
//   f1_c = 2PR/(P+R)              fdr_c = FP/(FP+TP)
//   false_alarm_rate = normal samples predicted as any fault / normal samples
//   misclassification = 1 - accuracy
// Ratios with a zero denominator are reported as 0 and flagged.
struct MetricsReport {
  ConfusionMatrix confusion;
  std::size_t total = 0;
  double accuracy = 0.0;
  double misclassification = 0.0;
  double false_alarm_rate = 0.0;
  bool false_alarm_undefined = false;
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> f1;
  std::vector<double> false_discovery;
  std::vector<bool> precision_undefined;
  std::vector<bool> recall_undefined;

  std::size_t num_classes() const { return confusion.size(); }
};

// Throws ContractError for an empty or non-square matrix.
MetricsReport metrics_from_confusion(const ConfusionMatrix& confusion);

// Structured text (JSON) summary and a CSV of the confusion matrix.
void write_metrics_json(const std::filesystem::path& path,
                        const MetricsReport& report, double mean_loss);
void write_confusion_csv(const std::filesystem::path& path,
                         const MetricsReport& report);

}  // namespace iamseq

#endif  // IAMSEQ_METRICS_HPP_
