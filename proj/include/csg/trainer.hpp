#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "csg/checkpoint.hpp"
#include "csg/error.hpp"
#include "csg/features.hpp"
#include "csg/gconv.hpp"

namespace csg {

struct TrainConfig {
  double learning_rate = 0.01;
  int max_epochs = 300;
  int patience = 10;
  ExperimentMode mode = ExperimentMode::spectral;
  std::uint64_t seed = 0;
  /// When set, the best checkpoint is written here as checkpoint.bin.
  std::filesystem::path checkpoint_dir;
  CheckpointFormat checkpoint_format = CheckpointFormat::binary;
  int workers = 1;

  void validate() const;
};

/// One subject ready for the network.
struct SubjectSample {
  std::string id;
  ConvInput input;
  VectorXi labels;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;            // mean cross-entropy per labelled training node
  double val_accuracy = 0.0;
  double val_dice = 0.0;
  double seconds = 0.0;
  double max_kernel_gradient = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;

  /// `epoch,loss,val_acc,val_dice,seconds`
  std::string to_csv() const;
};

struct TrainResult {
  NetworkParams params;  // best validation checkpoint
  TrainLog log;
  int best_epoch = 0;
  double best_val_dice = -1.0;
};

/// Raised when the training loss stops being finite; carries the last good checkpoint.
class TrainingDiverged : public NumericalError {
 public:
  TrainingDiverged(const std::string& what, TrainResult partial)
      : NumericalError(what), partial_(std::move(partial)) {}
  const TrainResult& partial() const { return partial_; }

 private:
  TrainResult partial_;
};

/// Mean cross-entropy and its gradient summed over subjects in the given order.
struct BatchGradient {
  double loss_sum = 0.0;
  long labelled = 0;
  NetworkGradients gradients;
};

BatchGradient batch_gradient(const NetworkParams& params, const std::vector<SubjectSample>& subjects,
                             bool freeze_kernels, int workers = 1);

/// In-place gradient step; kernel parameters are left untouched when frozen.
void apply_gradient_step(NetworkParams& params, const NetworkGradients& gradients, double learning_rate,
                         bool freeze_kernels);

/// Full-batch gradient descent with early stopping on validation mean Dice.
TrainResult train(const std::vector<SubjectSample>& train_subjects, const std::vector<SubjectSample>& val_subjects,
                  const TrainConfig& config, const NetworkConfig& network);

struct Prediction {
  RowMatrixXd probabilities;
  VectorXi labels;  // argmax, lowest index on ties
};

Prediction predict(const NetworkParams& params, const ConvInput& input);

/// Row-wise argmax with lowest-index tie break.
VectorXi argmax_rows(const RowMatrixXd& values);

/// Runs `fn(i)` for i in [0, n) on up to `workers` threads.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

}  // namespace csg
