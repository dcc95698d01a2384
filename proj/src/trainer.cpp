#include "csg/trainer.hpp"

#include <spdlog/spdlog.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "csg/metrics.hpp"

namespace csg {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw UsageError("learning rate must be non-negative");
  if (max_epochs < 0) throw UsageError("max_epochs must be non-negative");
  if (patience < 1) throw UsageError("patience must be at least 1");
  if (workers < 1) throw UsageError("workers must be at least 1");
}

std::string TrainLog::to_csv() const {
  std::string out = "epoch,loss,val_acc,val_dice,seconds\n";
  char line[256];
  for (const auto& e : epochs) {
    std::snprintf(line, sizeof(line), "%d,%.10g,%.10g,%.10g,%.3f\n", e.epoch, e.loss, e.val_accuracy, e.val_dice,
                  e.seconds);
    out += line;
  }
  return out;
}

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  for (int t = 0; t < std::min(workers, n); ++t) {
    threads.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  if (error) std::rethrow_exception(error);
}

VectorXi argmax_rows(const RowMatrixXd& values) {
  VectorXi out(values.rows());
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    Eigen::Index arg = 0;
    for (Eigen::Index c = 1; c < values.cols(); ++c) {
      if (values(i, c) > values(i, arg)) arg = c;
    }
    out[i] = static_cast<int>(arg);
  }
  return out;
}

Prediction predict(const NetworkParams& params, const ConvInput& input) {
  if (input.coords.cols() != params.config.embed_dim) {
    throw UsageError("checkpoint expects " + std::to_string(params.config.embed_dim) +
                     "-d kernel coordinates, got " + std::to_string(input.coords.cols()));
  }
  ForwardCache cache = forward(params, input);
  Prediction p;
  p.labels = argmax_rows(cache.logits);
  p.probabilities = std::move(cache.probabilities);
  return p;
}

BatchGradient batch_gradient(const NetworkParams& params, const std::vector<SubjectSample>& subjects,
                             bool freeze_kernels, int workers) {
  const int n = static_cast<int>(subjects.size());
  std::vector<NetworkGradients> per_subject(static_cast<std::size_t>(n));
  std::vector<double> losses(static_cast<std::size_t>(n), 0.0);
  std::vector<long> counts(static_cast<std::size_t>(n), 0);
  parallel_for(n, workers, [&](int s) {
    const SubjectSample& subject = subjects[s];
    const ForwardCache cache = forward(params, subject.input);
    losses[s] = cross_entropy(cache.probabilities, subject.labels);
    counts[s] = (subject.labels.array() != kUnlabeled).count();
    per_subject[s] = backward(params, subject.input, cache, cross_entropy_gradient(cache.probabilities, subject.labels),
                              freeze_kernels);
  });
  BatchGradient batch;
  batch.gradients = NetworkGradients::zeros_like(params);
  for (int s = 0; s < n; ++s) {
    batch.loss_sum += losses[s];
    batch.labelled += counts[s];
    batch.gradients += per_subject[s];
  }
  return batch;
}

void apply_gradient_step(NetworkParams& params, const NetworkGradients& gradients, double learning_rate,
                         bool freeze_kernels) {
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    LayerParams& p = params.layers[l];
    const LayerParams& g = gradients.layers[l];
    p.weights -= learning_rate * g.weights;
    p.bias -= learning_rate * g.bias;
    if (freeze_kernels) continue;
    p.mu -= learning_rate * g.mu;
    p.log_sigma -= learning_rate * g.log_sigma;
  }
}

namespace {

struct Validation {
  double accuracy = 0.0;
  double dice = 0.0;
};

Validation validate_subjects(const NetworkParams& params, const std::vector<SubjectSample>& subjects, int workers) {
  const int n = static_cast<int>(subjects.size());
  std::vector<double> acc(static_cast<std::size_t>(n)), dice(static_cast<std::size_t>(n));
  parallel_for(n, workers, [&](int s) {
    const Prediction p = predict(params, subjects[s].input);
    acc[s] = node_accuracy(p.labels, subjects[s].labels);
    dice[s] = mean_dice(p.labels, subjects[s].labels, params.config.num_classes);
  });
  Validation v;
  for (int s = 0; s < n; ++s) {
    v.accuracy += acc[s] / n;
    v.dice += dice[s] / n;
  }
  return v;
}

}  // namespace

TrainResult train(const std::vector<SubjectSample>& train_subjects, const std::vector<SubjectSample>& val_subjects,
                  const TrainConfig& config, const NetworkConfig& network) {
  config.validate();
  if (train_subjects.empty()) throw UsageError("training needs at least one subject");
  const bool freeze = config.mode == ExperimentMode::pointwise;
  // Early stopping falls back to the training subjects when no validation set is given.
  const auto& monitor = val_subjects.empty() ? train_subjects : val_subjects;

  NetworkParams params = init_network(network);
  TrainResult result;
  result.params = params;
  int since_best = 0;
  const std::string tag = to_string(config.mode);

  auto save_best = [&] {
    if (!config.checkpoint_dir.empty()) {
      save_checkpoint(config.checkpoint_dir / "checkpoint.bin", result.params, config.checkpoint_format);
    }
  };

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    BatchGradient batch = batch_gradient(params, train_subjects, freeze, config.workers);
    const double loss = batch.loss_sum / static_cast<double>(batch.labelled);
    if (!std::isfinite(loss)) {
      save_best();
      throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) + " (" + tag + ")", result);
    }
    batch.gradients *= 1.0 / static_cast<double>(batch.labelled);
    apply_gradient_step(params, batch.gradients, config.learning_rate, freeze);

    const Validation val = validate_subjects(params, monitor, config.workers);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss;
    rec.val_accuracy = val.accuracy;
    rec.val_dice = val.dice;
    rec.max_kernel_gradient = batch.gradients.max_abs_kernel();
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.epochs.push_back(rec);
    spdlog::debug("[{}] epoch {} loss {:.5f} val_acc {:.4f} val_dice {:.4f} ({:.2f}s)", tag, epoch, loss,
                  val.accuracy, val.dice, rec.seconds);

    if (val.dice > result.best_val_dice) {
      result.best_val_dice = val.dice;
      result.best_epoch = epoch;
      result.params = params;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      spdlog::info("[{}] early stop at epoch {} (best {} dice {:.4f})", tag, epoch, result.best_epoch,
                   result.best_val_dice);
      break;
    }
  }
  save_best();
  return result;
}

}  // namespace csg
