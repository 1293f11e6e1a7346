#ifndef IAMSEQ_TRAIN_HPP_
#define IAMSEQ_TRAIN_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "iamseq/data.hpp"
#include "iamseq/metrics.hpp"
#include "iamseq/model.hpp"
#include "iamseq/optim.hpp"

namespace iamseq {

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_loss = 0.0;
  double test_acc = 0.0;
  double lr = 0.0;  // rate used during this epoch

  bool operator==(const EpochRecord&) const = default;
};

struct EvalResult {
  MetricsReport report;
  double mean_loss = 0.0;
  std::vector<int> predictions;
};

// Eval-mode pass over `windows` (no dropout, no graph). Throws
// ContractError on an empty set.
EvalResult evaluate(IamBiLstmClassifier& model, std::span<const Window> windows,
                    std::size_t batch_size = 64);

struct TrainOptions {
  std::size_t epochs = 200;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  double lr_floor = 1e-4;
  double lr_factor = 0.1;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  bool shuffle = true;
  // 0 selects the best model (and drives the schedule) on test loss. A
  // positive fraction holds out that share of the training windows instead.
  double validation_fraction = 0.0;
  // When set, best.ckpt is written initially and at every new minimum of
  // the selection loss, and last.ckpt after the final epoch.
  std::optional<std::filesystem::path> checkpoint_dir;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 0 = initial parameters
  std::optional<double> best_selection_loss;
  ParameterSnapshot best_parameters;
};

// Minibatch Adam on cross-entropy with reduce-on-plateau scheduling.
// Deterministic given the model seed and options.seed. A non-finite value
// anywhere aborts with DivergenceError naming the epoch and step.
TrainResult train(IamBiLstmClassifier& model, std::span<const Window> train_set,
                  std::span<const Window> test_set, const TrainOptions& options);

// Columns: epoch,train_loss,train_acc,test_loss,test_acc,lr (%.17g).
void write_history_csv(const std::filesystem::path& path,
                       std::span<const EpochRecord> history);

}  // namespace iamseq

#endif  // IAMSEQ_TRAIN_HPP_
