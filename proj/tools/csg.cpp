// csg: command-line front end for the cortical surface parcellation pipeline.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <map>

#include "csg/alignment.hpp"
#include "csg/error.hpp"
#include "csg/pipeline.hpp"
#include "csg/text_io.hpp"

namespace fs = std::filesystem;
using namespace csg;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kUsage = 2, kData = 3, kNumerical = 4 };

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("csg");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("CSG_LOG")) {
    const auto level = spdlog::level::from_str(env);
    if (level == spdlog::level::off && std::string(env) != "off") {
      spdlog::warn("unknown CSG_LOG level '{}'", env);
    } else {
      spdlog::set_level(level);
    }
  }
}

// Flags shared by the subcommands. Each one maps onto a config key, and only flags given on
// the command line override the config file.
struct Flags {
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  std::string config_file;

  void add(CLI::App* cmd, const std::string& flag, const std::string& key, const std::string& help) {
    options[key] = cmd->add_option(flag, values[key], help);
  }

  PipelineConfig resolve() const {
    PipelineConfig config;
    if (!config_file.empty()) config = load_pipeline_config(config_file);
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) config.set(key, values.at(key));
    }
    config.validate();
    return config;
  }
};

void add_common(CLI::App* cmd, Flags& flags) {
  cmd->add_option("--config", flags.config_file, "key = value configuration file");
  flags.add(cmd, "--data-dir", "data_dir", "subject directories (default <out-dir>/data)");
  flags.add(cmd, "--out-dir", "out_dir", "run directory for artifacts");
  flags.add(cmd, "--seed", "seed", "random seed");
  flags.add(cmd, "--workers", "workers", "subjects processed concurrently");
}

RunLayout layout_of(const PipelineConfig& c) {
  return RunLayout{c.data_dir.empty() ? c.out_dir / "data" : c.data_dir, c.out_dir};
}

struct StageTimer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); }
};

void record(const PipelineConfig& config, const RunLayout& layout, const std::string& stage, double seconds,
            const std::vector<fs::path>& artifacts, const std::vector<std::string>& subjects) {
  fs::create_directories(layout.out_dir);
  RunManifest manifest(layout.manifest_file());
  manifest.set_config(config.snapshot());
  if (!subjects.empty()) manifest.set_subjects(subjects);
  manifest.record_stage(stage, seconds, artifacts);
  manifest.save();
  spdlog::info("{} finished in {:.2f}s", stage, seconds);
}

std::string default_reference(const RunLayout& layout, const std::vector<std::string>& subjects, std::uint64_t seed) {
  return ensure_split(layout, subjects, seed).train.front();
}

int run(int argc, char** argv) {
  CLI::App app{"Spectral graph convolution pipeline for cortical surface parcellation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  Flags synth_f, embed_f, align_f, train_f, predict_f, reg_f, eval_f, pipe_f;

  auto* synth = app.add_subcommand("synth", "generate labelled synthetic subjects");
  add_common(synth, synth_f);
  synth_f.add(synth, "--n-subjects", "n_subjects", "number of subjects");
  synth_f.add(synth, "--n-vertices", "n_vertices", "minimum vertices per subject");
  synth_f.add(synth, "--n-parcels", "n_parcels", "parcels per subject");
  synth_f.add(synth, "--deform-amplitude", "deform_amplitude", "radial displacement scale");
  synth_f.add(synth, "--pose-jitter-deg", "pose_jitter_deg", "largest random pose rotation");

  auto* embed = app.add_subcommand("embed", "spectral embedding of every subject");
  add_common(embed, embed_f);
  embed_f.add(embed, "--d", "d", "embedding dimension");

  auto* align = app.add_subcommand("align", "align every embedding to a reference subject");
  add_common(align, align_f);
  align_f.add(align, "--reference", "reference", "reference subject id (default: first training subject)");

  auto* train_cmd = app.add_subcommand("train", "train the graph convolution network");
  add_common(train_cmd, train_f);
  train_f.add(train_cmd, "--mode", "modes", "euclidean|spectral|pointwise (comma-separated)");
  train_f.add(train_cmd, "--learning-rate", "learning_rate", "gradient step size");
  train_f.add(train_cmd, "--max-epochs", "max_epochs", "epoch limit");
  train_f.add(train_cmd, "--patience", "patience", "early-stop patience");
  train_f.add(train_cmd, "--n-parcels", "n_parcels", "number of classes");

  auto* predict_cmd = app.add_subcommand("predict", "per-vertex parcel probabilities from a checkpoint");
  add_common(predict_cmd, predict_f);
  predict_f.add(predict_cmd, "--mode", "modes", "euclidean|spectral|pointwise (comma-separated)");

  auto* reg = app.add_subcommand("regularize", "MRF smoothing of predicted labels");
  add_common(reg, reg_f);
  reg_f.add(reg, "--mode", "modes", "euclidean|spectral|pointwise (comma-separated)");
  reg_f.add(reg, "--lambda", "lambda", "Potts weight (default: chosen on the validation subjects)");

  auto* eval = app.add_subcommand("evaluate", "Dice and Hausdorff report on the test subjects");
  add_common(eval, eval_f);
  eval_f.add(eval, "--mode", "modes", "euclidean|spectral|pointwise (comma-separated)");
  eval_f.add(eval, "--n-parcels", "n_parcels", "number of parcels");

  auto* pipe = app.add_subcommand("pipeline", "synth or load, then every stage through evaluate");
  add_common(pipe, pipe_f);
  pipe_f.add(pipe, "--mode", "modes", "euclidean|spectral|pointwise (comma-separated)");
  pipe_f.add(pipe, "--lambda", "lambda", "Potts weight (default: chosen on the validation subjects)");
  pipe_f.add(pipe, "--d", "d", "embedding dimension");
  pipe_f.add(pipe, "--reference", "reference", "reference subject id");
  pipe_f.add(pipe, "--n-subjects", "n_subjects", "number of synthetic subjects");
  pipe_f.add(pipe, "--n-vertices", "n_vertices", "minimum vertices per subject");
  pipe_f.add(pipe, "--n-parcels", "n_parcels", "parcels per subject");
  pipe_f.add(pipe, "--learning-rate", "learning_rate", "gradient step size");
  pipe_f.add(pipe, "--max-epochs", "max_epochs", "epoch limit");
  pipe_f.add(pipe, "--patience", "patience", "early-stop patience");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  if (synth->parsed()) {
    const PipelineConfig c = synth_f.resolve();
    const RunLayout layout = layout_of(c);
    StageTimer t;
    const auto ids = stage_synth(c, layout.data_dir);
    std::vector<fs::path> artifacts;
    for (const auto& id : ids) artifacts.push_back(layout.subject_dir(id));
    record(c, layout, "synth", t.seconds(), artifacts, ids);
  } else if (embed->parsed()) {
    const PipelineConfig c = embed_f.resolve();
    const RunLayout layout = layout_of(c);
    const auto ids = list_subjects(layout.data_dir);
    StageTimer t;
    stage_embed(layout, ids, c.d, c.workers);
    std::vector<fs::path> artifacts;
    for (const auto& id : ids) artifacts.push_back(layout.spectral_file(id));
    record(c, layout, "embed", t.seconds(), artifacts, ids);
  } else if (align->parsed()) {
    const PipelineConfig c = align_f.resolve();
    const RunLayout layout = layout_of(c);
    const auto ids = list_subjects(layout.data_dir);
    const std::string ref = c.reference.empty() ? default_reference(layout, ids, c.seed) : c.reference;
    if (std::find(ids.begin(), ids.end(), ref) == ids.end()) {
      throw UsageError("reference subject '" + ref + "' not found under " + layout.data_dir.string());
    }
    StageTimer t;
    stage_align(layout, ids, ref, c.workers);
    std::vector<fs::path> artifacts;
    for (const auto& id : ids) artifacts.push_back(layout.align_json(id));
    record(c, layout, "align", t.seconds(), artifacts, ids);
  } else if (train_cmd->parsed()) {
    const PipelineConfig c = train_f.resolve();
    const RunLayout layout = layout_of(c);
    const auto ids = list_subjects(layout.data_dir);
    const DatasetSplit split = ensure_split(layout, ids, c.seed);
    for (const ExperimentMode mode : c.modes) {
      StageTimer t;
      stage_train(layout, split, mode, c);
      record(c, layout, "train:" + to_string(mode), t.seconds(),
             {layout.checkpoint_file(mode), layout.mode_dir(mode) / "train_log.csv"}, ids);
    }
  } else if (predict_cmd->parsed()) {
    const PipelineConfig c = predict_f.resolve();
    const RunLayout layout = layout_of(c);
    const auto ids = list_subjects(layout.data_dir);
    for (const ExperimentMode mode : c.modes) {
      StageTimer t;
      stage_predict(layout, ids, mode, c.workers);
      record(c, layout, "predict:" + to_string(mode), t.seconds(),
             {layout.prediction_dir(mode, ids.front()) / "probabilities.txt"}, ids);
    }
  } else if (reg->parsed()) {
    const PipelineConfig c = reg_f.resolve();
    const RunLayout layout = layout_of(c);
    const auto ids = list_subjects(layout.data_dir);
    const DatasetSplit split = ensure_split(layout, ids, c.seed);
    for (const ExperimentMode mode : c.modes) {
      StageTimer t;
      const double lambda = stage_regularize(layout, mode, split.validation, ids, c.lambda, c.lambdas, c.workers);
      spdlog::info("[{}] lambda = {}", to_string(mode), lambda);
      record(c, layout, "regularize:" + to_string(mode), t.seconds(), {layout.mode_dir(mode) / "mrf.json"}, ids);
    }
  } else if (eval->parsed()) {
    const PipelineConfig c = eval_f.resolve();
    const RunLayout layout = layout_of(c);
    const auto ids = list_subjects(layout.data_dir);
    const DatasetSplit split = ensure_split(layout, ids, c.seed);
    const auto& subjects = split.test.empty() ? split.validation : split.test;
    if (subjects.empty()) throw UsageError("no test subjects to evaluate");
    StageTimer t;
    const auto runs = stage_evaluate(layout, c.modes, subjects, c.n_parcels, c.hausdorff, c.workers);
    const ReportFiles files = emit_report(layout.report_dir(), runs);
    for (const auto& r : runs) {
      const ParcelSummary s = summarize(r.metrics);
      std::cout << r.mode << ": mean Dice " << format_double(s.mean_dice) << ", mean Hausdorff "
                << format_double(s.mean_hausdorff) << " mm\n";
    }
    record(c, layout, "evaluate", t.seconds(), {files.per_parcel_csv, files.summary_json}, ids);
  } else if (pipe->parsed()) {
    const PipelineConfig c = pipe_f.resolve();
    const PipelineResult result = run_pipeline(c);
    for (const auto& r : result.runs) {
      const ParcelSummary s = summarize(r.metrics);
      std::cout << r.mode << ": mean Dice " << format_double(s.mean_dice) << ", mean Hausdorff "
                << format_double(s.mean_hausdorff) << " mm\n";
    }
    std::cout << "report: " << result.report.summary_json.string() << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  } catch (const DataError& e) {
    spdlog::error("{}", e.what());
    return kData;
  } catch (const NumericalError& e) {
    spdlog::error("{}", e.what());
    return kNumerical;
  } catch (const fs::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return kData;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kFailure;
  }
}
