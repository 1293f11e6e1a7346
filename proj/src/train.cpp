#include "iamseq/train.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "iamseq/checkpoint.hpp"
#include "iamseq/errors.hpp"
#include "iamseq/loss.hpp"

namespace iamseq {

namespace {

constexpr std::uint64_t kShuffleStream = 11;
constexpr std::uint64_t kValidationStream = 12;

void save(const std::filesystem::path& path, const IamBiLstmClassifier& model,
          const TrainOptions& options, std::size_t epoch,
          std::optional<double> best_selection, std::optional<double> best_train) {
  CheckpointMetadata meta;
  meta.seed = options.seed;
  meta.epoch = epoch;
  meta.best_test_loss = best_selection;
  meta.best_train_loss = best_train;
  save_checkpoint(path, model.parameters(), model.config(), meta);
}

}  // namespace

EvalResult evaluate(IamBiLstmClassifier& model, std::span<const Window> windows,
                    std::size_t batch_size) {
  if (windows.empty()) throw ContractError("evaluate: empty test set");
  if (batch_size == 0) throw ParameterError("evaluate: batch size must be positive");
  NoGradGuard no_grad;
  EvalResult result;
  std::vector<int> truth;
  double loss_sum = 0.0;
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t len = std::min(batch_size, order.size() - start);
    SequenceBatch batch =
        gather_batch(windows, std::span<const std::size_t>(order.data() + start, len));
    ForwardResult out = model.forward(batch.inputs, Mode::Eval);
    loss_sum += cross_entropy(out.logits, batch.labels).item() *
                static_cast<double>(len);
    auto pred = argmax_rows(out.logits);
    result.predictions.insert(result.predictions.end(), pred.begin(), pred.end());
    truth.insert(truth.end(), batch.labels.begin(), batch.labels.end());
  }
  result.mean_loss = loss_sum / static_cast<double>(windows.size());
  result.report = metrics_from_confusion(build_confusion(
      truth, result.predictions, model.config().num_classes));
  return result;
}

TrainResult train(IamBiLstmClassifier& model, std::span<const Window> train_set,
                  std::span<const Window> test_set, const TrainOptions& options) {
  if (train_set.empty()) throw ContractError("train: empty training set");
  if (test_set.empty()) throw ContractError("train: empty test set");
  const std::size_t features = model.config().num_features;
  for (const auto* set : {&train_set, &test_set}) {
    for (const Window& w : *set) {
      if (w.features != features || w.steps != model.config().seq_len) {
        throw ContractError("train: window shape (" + std::to_string(w.steps) +
                            ", " + std::to_string(w.features) +
                            ") does not match the model's (" +
                            std::to_string(model.config().seq_len) + ", " +
                            std::to_string(features) + ")");
      }
    }
  }
  if (!(options.validation_fraction >= 0.0 && options.validation_fraction < 1.0)) {
    throw ParameterError("train: validation_fraction must lie in [0, 1)");
  }

  // Optional held-out split for model selection.
  std::vector<Window> fit_windows(train_set.begin(), train_set.end());
  std::vector<Window> validation;
  if (options.validation_fraction > 0.0) {
    Rng split_rng(derive_seed(options.seed, kValidationStream));
    for (std::size_t i = fit_windows.size(); i > 1; --i) {
      std::swap(fit_windows[i - 1], fit_windows[split_rng.below(i)]);
    }
    const auto held = static_cast<std::size_t>(
        options.validation_fraction * static_cast<double>(fit_windows.size()));
    if (held == 0 || held == fit_windows.size()) {
      throw ParameterError("train: validation_fraction leaves an empty split");
    }
    validation.assign(fit_windows.end() - static_cast<std::ptrdiff_t>(held),
                      fit_windows.end());
    fit_windows.resize(fit_windows.size() - held);
  }

  LrSchedule schedule(options.lr, options.lr_floor, options.lr_factor,
                      options.patience);
  AdamState adam;
  Rng shuffle_rng(derive_seed(options.seed, kShuffleStream));
  TrainResult result;
  result.best_parameters = model.snapshot();
  std::optional<double> best_train;

  if (options.checkpoint_dir) {
    std::filesystem::create_directories(*options.checkpoint_dir);
    save(*options.checkpoint_dir / "best.ckpt", model, options, 0, std::nullopt,
         std::nullopt);
  }

  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = schedule.current();
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t step = 0;
    try {
      auto batches =
          make_batches(fit_windows, options.batch_size, options.shuffle, shuffle_rng);
      for (auto& batch : batches) {
        ++step;
        model.parameters().zero_grad();
        ForwardResult out = model.forward(batch.inputs, Mode::Train);
        Tensor loss = cross_entropy(out.logits, batch.labels);
        loss.backward();
        adam_step(model.parameters(), adam, schedule.current());
        loss_sum += loss.item() * static_cast<double>(batch.labels.size());
        auto pred = argmax_rows(out.logits);
        for (std::size_t i = 0; i < pred.size(); ++i) {
          correct += pred[i] == batch.labels[i] ? 1 : 0;
        }
      }
    } catch (const NumericError& e) {
      throw DivergenceError("training diverged at epoch " + std::to_string(epoch) +
                            ", step " + std::to_string(step) + ": " + e.what());
    }
    rec.train_loss = loss_sum / static_cast<double>(fit_windows.size());
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(fit_windows.size());

    EvalResult test = evaluate(model, test_set, options.batch_size);
    rec.test_loss = test.mean_loss;
    rec.test_acc = test.report.accuracy;
    const double selection_loss =
        validation.empty() ? test.mean_loss
                           : evaluate(model, validation, options.batch_size).mean_loss;

    if (!best_train || rec.train_loss < *best_train) best_train = rec.train_loss;
    if (!result.best_selection_loss || selection_loss < *result.best_selection_loss) {
      result.best_selection_loss = selection_loss;
      result.best_epoch = epoch;
      result.best_parameters = model.snapshot();
      if (options.checkpoint_dir) {
        save(*options.checkpoint_dir / "best.ckpt", model, options, epoch,
             selection_loss, best_train);
      }
    }
    schedule.observe(selection_loss);
    result.history.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
  }

  if (options.checkpoint_dir) {
    save(*options.checkpoint_dir / "last.ckpt", model, options, options.epochs,
         result.best_selection_loss, best_train);
  }
  return result;
}

void write_history_csv(const std::filesystem::path& path,
                       std::span<const EpochRecord> history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,train_loss,train_acc,test_loss,test_acc,lr\n";
  char buf[256];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.epoch,
                  r.train_loss, r.train_acc, r.test_loss, r.test_acc, r.lr);
    out << buf;
  }
}

}  // namespace iamseq
