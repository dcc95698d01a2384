#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "csg/alignment.hpp"
#include "csg/checkpoint.hpp"
#include "csg/features.hpp"
#include "csg/metrics.hpp"
#include "csg/report.hpp"
#include "csg/split.hpp"
#include "csg/trainer.hpp"

namespace csg {

inline constexpr const char* kToolVersion = "0.1.0";

struct PipelineConfig {
  std::filesystem::path data_dir;  // empty: synthesize into <out_dir>/data
  std::filesystem::path out_dir = "run";
  std::uint64_t seed = 0;
  int workers = 1;

  int n_subjects = 10;
  int n_vertices = 10242;
  int n_parcels = 32;
  double deform_amplitude = 0.3;
  double pose_jitter_deg = 45.0;

  std::vector<ExperimentMode> modes = {ExperimentMode::euclidean, ExperimentMode::spectral,
                                       ExperimentMode::pointwise};
  int d = 3;
  std::string reference;  // empty: first training subject

  double learning_rate = 0.01;
  int max_epochs = 300;
  int patience = 10;
  std::vector<int> hidden = {32, 64};
  int kernels = 4;
  CheckpointFormat checkpoint_format = CheckpointFormat::binary;

  std::optional<double> lambda;  // unset: sweep `lambdas` on the validation subjects
  std::vector<double> lambdas = {0.1, 0.2, 0.5, 1.0, 2.0};

  HausdorffOptions hausdorff;

  /// Applies `key = value` lines; `#` starts a comment. Unknown keys are a UsageError.
  void apply_text(const std::string& text);
  void set(const std::string& key, const std::string& value);
  std::map<std::string, std::string> snapshot() const;
  void validate() const;
};

PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Where every stage reads and writes.
struct RunLayout {
  std::filesystem::path data_dir;
  std::filesystem::path out_dir;

  std::filesystem::path subject_dir(const std::string& id) const { return data_dir / id; }
  std::filesystem::path embed_dir(const std::string& id) const { return out_dir / "subjects" / id; }
  std::filesystem::path spectral_file(const std::string& id) const { return embed_dir(id) / "spectral.txt"; }
  std::filesystem::path aligned_file(const std::string& id) const { return embed_dir(id) / "spectral_aligned.txt"; }
  std::filesystem::path align_json(const std::string& id) const { return embed_dir(id) / "align.json"; }
  std::filesystem::path split_file() const { return out_dir / "split.txt"; }
  std::filesystem::path mode_dir(ExperimentMode mode) const { return out_dir / to_string(mode); }
  std::filesystem::path checkpoint_file(ExperimentMode mode) const { return mode_dir(mode) / "checkpoint.bin"; }
  std::filesystem::path prediction_dir(ExperimentMode mode, const std::string& id) const {
    return mode_dir(mode) / "subjects" / id;
  }
  std::filesystem::path report_dir() const { return out_dir / "report"; }
  std::filesystem::path manifest_file() const { return out_dir / "manifest.json"; }
};

/// Stage timings and artifacts, merged into `manifest.json` and written atomically.
class RunManifest {
 public:
  explicit RunManifest(std::filesystem::path path);

  void set_config(const std::map<std::string, std::string>& config);
  void set_subjects(const std::vector<std::string>& subjects);
  void record_stage(const std::string& name, double seconds, const std::vector<std::filesystem::path>& artifacts);
  /// Throws DataError when a recorded artifact is missing.
  void check_artifacts() const;
  void save() const;

 private:
  struct Stage {
    std::string name;
    double seconds = 0.0;
    std::vector<std::string> artifacts;
  };
  std::filesystem::path path_;
  std::map<std::string, std::string> config_;
  std::vector<std::string> subjects_;
  std::vector<Stage> stages_;
};

/// Subject directory name for index i.
std::string subject_id(int index);

/// Writes `n_subjects` labelled synthetic subjects; returns their ids.
std::vector<std::string> stage_synth(const PipelineConfig& config, const std::filesystem::path& data_dir);

/// Sorted names of the subject directories under `data_dir`.
std::vector<std::string> list_subjects(const std::filesystem::path& data_dir);

/// Reads the split if present, otherwise creates and writes it.
DatasetSplit ensure_split(const RunLayout& layout, const std::vector<std::string>& subjects, std::uint64_t seed);

void stage_embed(const RunLayout& layout, const std::vector<std::string>& subjects, int d, int workers);

/// Aligns every subject to `reference`; returns per-subject results in input order.
std::vector<AlignmentResult> stage_align(const RunLayout& layout, const std::vector<std::string>& subjects,
                                         const std::string& reference, int workers);

/// Loads mesh and (for spectral arms) the aligned embedding and builds the network input.
SubjectSample prepare_sample(const RunLayout& layout, const std::string& id, ExperimentMode mode);

NetworkConfig network_config_for(const PipelineConfig& config, ExperimentMode mode, int input_dim, int embed_dim);

TrainResult stage_train(const RunLayout& layout, const DatasetSplit& split, ExperimentMode mode,
                        const PipelineConfig& config);

/// Writes probabilities.txt and labels_pred.txt per subject. Fails with the checkpoint path
/// when no checkpoint exists.
void stage_predict(const RunLayout& layout, const std::vector<std::string>& subjects, ExperimentMode mode,
                   int workers);

/// MRF-regularizes `targets`. Without a fixed lambda, the value with the best validation mean
/// Dice is chosen (ties go to the smaller lambda). Returns the lambda used.
double stage_regularize(const RunLayout& layout, ExperimentMode mode, const std::vector<std::string>& validation,
                        const std::vector<std::string>& targets, std::optional<double> lambda,
                        const std::vector<double>& lambdas, int workers);

/// Metrics for each mode with and without MRF (when labels_mrf.txt exists) on `subjects`.
std::vector<ModeRun> stage_evaluate(const RunLayout& layout, const std::vector<ExperimentMode>& modes,
                                    const std::vector<std::string>& subjects, int num_parcels,
                                    const HausdorffOptions& options, int workers);

struct PipelineResult {
  std::vector<ModeRun> runs;
  ReportFiles report;
  std::map<std::string, double> stage_seconds;
};

PipelineResult run_pipeline(const PipelineConfig& config);

}  // namespace csg
