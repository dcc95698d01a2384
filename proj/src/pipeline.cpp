#include "csg/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <json.hpp>
#include <sstream>

#include "csg/alignment.hpp"
#include "csg/embedding.hpp"
#include "csg/error.hpp"
#include "csg/mrf.hpp"
#include "csg/synth.hpp"
#include "csg/text_io.hpp"

namespace csg {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw UsageError("config key '" + key + "' expects a number, got '" + value + "'");
  }
  return out;
}

long long parse_int(const std::string& key, const std::string& value) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw UsageError("config key '" + key + "' expects an integer, got '" + value + "'");
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
  return out;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void require_file(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path)) throw DataError("missing " + path.string() + " (run `" + producer + "` first)");
}

SurfaceMesh load_subject(const RunLayout& layout, const std::string& id) {
  return load_mesh(layout.subject_dir(id), MeshFormat::internal);
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& value) {
  if (key == "data_dir") {
    data_dir = value;
  } else if (key == "out_dir") {
    out_dir = value;
  } else if (key == "seed") {
    seed = static_cast<std::uint64_t>(parse_int(key, value));
  } else if (key == "workers") {
    workers = static_cast<int>(parse_int(key, value));
  } else if (key == "n_subjects") {
    n_subjects = static_cast<int>(parse_int(key, value));
  } else if (key == "n_vertices") {
    n_vertices = static_cast<int>(parse_int(key, value));
  } else if (key == "n_parcels") {
    n_parcels = static_cast<int>(parse_int(key, value));
  } else if (key == "deform_amplitude") {
    deform_amplitude = parse_double(key, value);
  } else if (key == "pose_jitter_deg") {
    pose_jitter_deg = parse_double(key, value);
  } else if (key == "modes" || key == "mode") {
    modes.clear();
    for (const auto& m : split_list(value)) modes.push_back(parse_experiment_mode(m));
  } else if (key == "d") {
    d = static_cast<int>(parse_int(key, value));
  } else if (key == "reference") {
    reference = value;
  } else if (key == "learning_rate") {
    learning_rate = parse_double(key, value);
  } else if (key == "max_epochs") {
    max_epochs = static_cast<int>(parse_int(key, value));
  } else if (key == "patience") {
    patience = static_cast<int>(parse_int(key, value));
  } else if (key == "hidden") {
    hidden.clear();
    for (const auto& h : split_list(value)) hidden.push_back(static_cast<int>(parse_int(key, h)));
  } else if (key == "kernels") {
    kernels = static_cast<int>(parse_int(key, value));
  } else if (key == "checkpoint_format") {
    if (value == "binary") {
      checkpoint_format = CheckpointFormat::binary;
    } else if (value == "json") {
      checkpoint_format = CheckpointFormat::json;
    } else {
      throw UsageError("checkpoint_format must be binary or json");
    }
  } else if (key == "lambda") {
    if (value.empty() || value == "auto") {
      lambda.reset();
    } else {
      lambda = parse_double(key, value);
    }
  } else if (key == "lambdas") {
    lambdas.clear();
    for (const auto& l : split_list(value)) lambdas.push_back(parse_double(key, l));
  } else if (key == "hausdorff") {
    if (value == "boundary") {
      hausdorff.points = HausdorffPoints::boundary;
    } else if (value == "all") {
      hausdorff.points = HausdorffPoints::all;
    } else {
      throw UsageError("hausdorff must be boundary or all");
    }
  } else if (key == "hausdorff_percentile") {
    hausdorff.percentile = parse_double(key, value);
  } else {
    throw UsageError("unknown config key '" + key + "'");
  }
}

void PipelineConfig::apply_text(const std::string& text) {
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(line_no) + ": expected `key = value`");
    }
    set(trim(std::string_view(line).substr(0, eq)), trim(std::string_view(line).substr(eq + 1)));
  }
}

std::map<std::string, std::string> PipelineConfig::snapshot() const {
  std::map<std::string, std::string> s;
  s["data_dir"] = data_dir.string();
  s["out_dir"] = out_dir.string();
  s["seed"] = std::to_string(seed);
  s["workers"] = std::to_string(workers);
  s["n_subjects"] = std::to_string(n_subjects);
  s["n_vertices"] = std::to_string(n_vertices);
  s["n_parcels"] = std::to_string(n_parcels);
  s["deform_amplitude"] = format_double(deform_amplitude);
  s["pose_jitter_deg"] = format_double(pose_jitter_deg);
  std::vector<std::string> names;
  for (auto m : modes) names.push_back(to_string(m));
  s["modes"] = join(names);
  s["d"] = std::to_string(d);
  s["reference"] = reference;
  s["learning_rate"] = format_double(learning_rate);
  s["max_epochs"] = std::to_string(max_epochs);
  s["patience"] = std::to_string(patience);
  std::vector<std::string> widths;
  for (int h : hidden) widths.push_back(std::to_string(h));
  s["hidden"] = join(widths);
  s["kernels"] = std::to_string(kernels);
  s["checkpoint_format"] = checkpoint_format == CheckpointFormat::binary ? "binary" : "json";
  s["lambda"] = lambda ? format_double(*lambda) : "auto";
  std::vector<std::string> ls;
  for (double l : lambdas) ls.push_back(format_double(l));
  s["lambdas"] = join(ls);
  s["hausdorff"] = hausdorff.points == HausdorffPoints::boundary ? "boundary" : "all";
  s["hausdorff_percentile"] = format_double(hausdorff.percentile);
  return s;
}

void PipelineConfig::validate() const {
  if (workers < 1) throw UsageError("workers must be at least 1");
  if (n_subjects < 1) throw UsageError("n_subjects must be at least 1");
  if (n_parcels < 2) throw UsageError("n_parcels must be at least 2");
  if (d < 1) throw UsageError("d must be at least 1");
  if (modes.empty()) throw UsageError("at least one mode is required");
  if (kernels < 1) throw UsageError("kernels must be at least 1");
  if (lambda && *lambda < 0.0) throw UsageError("lambda must be non-negative");
  if (!lambda && lambdas.empty()) throw UsageError("lambdas must not be empty");
  for (double l : lambdas) {
    if (l < 0.0) throw UsageError("lambdas must be non-negative");
  }
  if (!(hausdorff.percentile > 0.0 && hausdorff.percentile <= 100.0)) {
    throw UsageError("hausdorff_percentile must lie in (0, 100]");
  }
  TrainConfig t;
  t.learning_rate = learning_rate;
  t.max_epochs = max_epochs;
  t.patience = patience;
  t.validate();
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  if (!fs::exists(path)) throw UsageError("config file not found: " + path.string());
  PipelineConfig config;
  config.apply_text(read_text_file(path));
  return config;
}

RunManifest::RunManifest(fs::path path) : path_(std::move(path)) {
  if (!fs::exists(path_)) return;
  try {
    const auto j = nlohmann::json::parse(read_text_file(path_));
    if (j.contains("config")) config_ = j["config"].get<std::map<std::string, std::string>>();
    if (j.contains("subjects")) subjects_ = j["subjects"].get<std::vector<std::string>>();
    if (j.contains("stages")) {
      for (const auto& s : j["stages"]) {
        stages_.push_back({s.at("name").get<std::string>(), s.at("seconds").get<double>(),
                           s.at("artifacts").get<std::vector<std::string>>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    spdlog::warn("ignoring unreadable manifest {}: {}", path_.string(), e.what());
  }
}

void RunManifest::set_config(const std::map<std::string, std::string>& config) { config_ = config; }

void RunManifest::set_subjects(const std::vector<std::string>& subjects) { subjects_ = subjects; }

void RunManifest::record_stage(const std::string& name, double seconds, const std::vector<fs::path>& artifacts) {
  Stage stage{name, seconds, {}};
  for (const auto& a : artifacts) stage.artifacts.push_back(a.string());
  // A rerun of a stage replaces its earlier entry.
  std::erase_if(stages_, [&](const Stage& s) { return s.name == name; });
  stages_.push_back(std::move(stage));
}

void RunManifest::check_artifacts() const {
  for (const auto& s : stages_) {
    for (const auto& a : s.artifacts) {
      if (!fs::exists(a)) throw DataError("manifest artifact missing: " + a + " (stage " + s.name + ")");
    }
  }
}

void RunManifest::save() const {
  nlohmann::ordered_json j;
  j["tool"] = "csg";
  j["version"] = kToolVersion;
  j["config"] = config_;
  j["subjects"] = subjects_;
  auto stages = nlohmann::ordered_json::array();
  for (const auto& s : stages_) {
    nlohmann::ordered_json e;
    e["name"] = s.name;
    e["seconds"] = s.seconds;
    e["artifacts"] = s.artifacts;
    stages.push_back(std::move(e));
  }
  j["stages"] = std::move(stages);
  fs::create_directories(path_.parent_path().empty() ? fs::path(".") : path_.parent_path());
  write_text_file_atomic(path_, j.dump(2) + "\n");
}

std::string subject_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "subject_%03d", index);
  return buf;
}

std::vector<std::string> stage_synth(const PipelineConfig& config, const fs::path& data_dir) {
  std::vector<std::string> ids;
  for (int i = 0; i < config.n_subjects; ++i) ids.push_back(subject_id(i));
  fs::create_directories(data_dir);
  parallel_for(config.n_subjects, config.workers, [&](int i) {
    SynthParams p;
    p.seed = mix_seed(config.seed, static_cast<std::uint64_t>(i));
    p.n_vertices = config.n_vertices;
    p.n_parcels = config.n_parcels;
    p.deform_amplitude = config.deform_amplitude;
    p.pose_jitter_deg = config.pose_jitter_deg;
    save_subject(data_dir / ids[i], generate_synthetic_surface(p));
  });
  return ids;
}

std::vector<std::string> list_subjects(const fs::path& data_dir) {
  if (!fs::is_directory(data_dir)) throw DataError("data directory not found: " + data_dir.string());
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(data_dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "mesh.off")) ids.push_back(entry.path().filename().string());
  }
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) throw DataError("no subject directories (with mesh.off) under " + data_dir.string());
  return ids;
}

DatasetSplit ensure_split(const RunLayout& layout, const std::vector<std::string>& subjects, std::uint64_t seed) {
  if (fs::exists(layout.split_file())) {
    DatasetSplit split = read_split(layout.split_file());
    std::vector<std::string> listed = split.train;
    listed.insert(listed.end(), split.validation.begin(), split.validation.end());
    listed.insert(listed.end(), split.test.begin(), split.test.end());
    std::sort(listed.begin(), listed.end());
    std::vector<std::string> expected = subjects;
    std::sort(expected.begin(), expected.end());
    if (split.seed == seed && listed == expected) return split;
    spdlog::info("existing split does not match seed or subjects; recomputing");
  }
  DatasetSplit split = split_dataset(subjects, seed);
  fs::create_directories(layout.out_dir);
  write_split(layout.split_file(), split);
  return split;
}

void stage_embed(const RunLayout& layout, const std::vector<std::string>& subjects, int d, int workers) {
  parallel_for(static_cast<int>(subjects.size()), workers, [&](int s) {
    const std::string& id = subjects[s];
    const SurfaceMesh mesh = load_subject(layout, id);
    const BrainGraph graph = build_graph(mesh, AdjacencyMode::mesh_edges);
    const SpectralEmbedding emb = embed_graph(graph, d);
    fs::create_directories(layout.embed_dir(id));
    write_embedding(layout.spectral_file(id), emb);
    spdlog::debug("embedded {} ({} vertices)", id, mesh.num_vertices());
  });
}

std::vector<AlignmentResult> stage_align(const RunLayout& layout, const std::vector<std::string>& subjects,
                                         const std::string& reference, int workers) {
  require_file(layout.spectral_file(reference), "csg embed");
  const SpectralEmbedding ref = read_embedding(layout.spectral_file(reference), false);
  std::vector<AlignmentResult> results(subjects.size());
  parallel_for(static_cast<int>(subjects.size()), workers, [&](int s) {
    const std::string& id = subjects[s];
    require_file(layout.spectral_file(id), "csg embed");
    const SpectralEmbedding moving = read_embedding(layout.spectral_file(id), false);
    if (moving.dim() != ref.dim()) {
      throw DataError("embedding of " + id + " has d=" + std::to_string(moving.dim()) + " but reference " +
                      reference + " has d=" + std::to_string(ref.dim()));
    }
    AlignedEmbedding aligned = icp_align(moving, ref);
    write_embedding(layout.aligned_file(id), aligned.embedding);
    write_alignment_json(layout.align_json(id), aligned.result);
    spdlog::debug("aligned {}: rms {:.3g} -> {:.3g} in {} iterations", id, aligned.result.initial_rms_distance,
                  aligned.result.rms_distance, aligned.result.iterations);
    results[s] = std::move(aligned.result);
  });
  return results;
}

SubjectSample prepare_sample(const RunLayout& layout, const std::string& id, ExperimentMode mode) {
  const SurfaceMesh mesh = load_subject(layout, id);
  const BrainGraph mesh_graph = build_graph(mesh, AdjacencyMode::mesh_edges);
  SpectralEmbedding emb;
  const FeatureMode features = feature_mode_of(mode);
  if (features == FeatureMode::spectral) {
    require_file(layout.aligned_file(id), "csg align");
    emb = read_embedding(layout.aligned_file(id), true);
  }
  const MatrixXd x = build_feature_matrix(emb, mesh_graph, features);
  const int embed_dim = static_cast<int>(x.cols()) - 1;

  SubjectSample sample;
  sample.id = id;
  sample.input.features = x;
  sample.input.coords = kernel_coordinates(x.leftCols(embed_dim), mesh_graph);
  sample.input.stencil = mode == ExperimentMode::pointwise ? conv_stencil(build_graph(mesh, AdjacencyMode::identity))
                                                           : conv_stencil(mesh_graph);
  sample.labels = mesh.has_labels() ? mesh.labels : VectorXi::Constant(mesh.num_vertices(), kUnlabeled);
  return sample;
}

NetworkConfig network_config_for(const PipelineConfig& config, ExperimentMode, int input_dim, int embed_dim) {
  NetworkConfig net;
  net.input_dim = input_dim;
  net.hidden = config.hidden;
  net.num_classes = config.n_parcels;
  net.kernels = config.kernels;
  net.embed_dim = embed_dim;
  net.seed = config.seed;
  return net;
}

namespace {

std::vector<SubjectSample> prepare_samples(const RunLayout& layout, const std::vector<std::string>& ids,
                                           ExperimentMode mode, int workers) {
  std::vector<SubjectSample> out(ids.size());
  parallel_for(static_cast<int>(ids.size()), workers,
               [&](int s) { out[s] = prepare_sample(layout, ids[s], mode); });
  return out;
}

}  // namespace

TrainResult stage_train(const RunLayout& layout, const DatasetSplit& split, ExperimentMode mode,
                        const PipelineConfig& config) {
  const auto train_set = prepare_samples(layout, split.train, mode, config.workers);
  const auto val_set = prepare_samples(layout, split.validation, mode, config.workers);
  const int input_dim = static_cast<int>(train_set.front().input.features.cols());
  const int embed_dim = static_cast<int>(train_set.front().input.coords.cols());

  TrainConfig tc;
  tc.learning_rate = config.learning_rate;
  tc.max_epochs = config.max_epochs;
  tc.patience = config.patience;
  tc.mode = mode;
  tc.seed = config.seed;
  tc.checkpoint_dir = layout.mode_dir(mode);
  tc.checkpoint_format = config.checkpoint_format;
  tc.workers = config.workers;
  fs::create_directories(tc.checkpoint_dir);

  TrainResult result = train(train_set, val_set, tc, network_config_for(config, mode, input_dim, embed_dim));
  write_text_file_atomic(layout.mode_dir(mode) / "train_log.csv", result.log.to_csv());
  spdlog::info("[{}] best epoch {} with validation Dice {:.4f}", to_string(mode), result.best_epoch,
               result.best_val_dice);
  return result;
}

void stage_predict(const RunLayout& layout, const std::vector<std::string>& subjects, ExperimentMode mode,
                   int workers) {
  const fs::path ckpt = layout.checkpoint_file(mode);
  if (!fs::exists(ckpt)) throw DataError("checkpoint not found: " + ckpt.string() + " (run `csg train` first)");
  const NetworkParams params = load_checkpoint(ckpt);
  parallel_for(static_cast<int>(subjects.size()), workers, [&](int s) {
    const SubjectSample sample = prepare_sample(layout, subjects[s], mode);
    if (sample.input.features.cols() != params.config.input_dim) {
      throw DataError("checkpoint " + ckpt.string() + " expects " + std::to_string(params.config.input_dim) +
                      " input features, subject " + subjects[s] + " has " +
                      std::to_string(sample.input.features.cols()));
    }
    const Prediction p = predict(params, sample.input);
    const fs::path dir = layout.prediction_dir(mode, subjects[s]);
    fs::create_directories(dir);
    write_matrix_text(dir / "probabilities.txt", p.probabilities);
    write_int_vector_text(dir / "labels_pred.txt", p.labels);
  });
}

namespace {

struct MrfSubject {
  std::string id;
  MatrixXd probabilities;
  std::vector<Edge> edges;
  VectorXi labels;
};

MrfSubject load_mrf_subject(const RunLayout& layout, ExperimentMode mode, const std::string& id) {
  const fs::path probs = layout.prediction_dir(mode, id) / "probabilities.txt";
  require_file(probs, "csg predict");
  const SurfaceMesh mesh = load_subject(layout, id);
  MrfSubject s{id, read_matrix_text(probs), unique_edges(mesh.faces), mesh.labels};
  if (s.probabilities.rows() != mesh.num_vertices()) {
    throw DataError(probs.string() + " has " + std::to_string(s.probabilities.rows()) + " rows for a " +
                    std::to_string(mesh.num_vertices()) + "-vertex mesh");
  }
  return s;
}

VectorXi regularize(const MrfSubject& s, double lambda) {
  const MrfProblem problem = make_mrf_problem(s.probabilities, s.edges, lambda);
  return alpha_expansion(problem, unary_argmin(problem)).labels;
}

}  // namespace

double stage_regularize(const RunLayout& layout, ExperimentMode mode, const std::vector<std::string>& validation,
                        const std::vector<std::string>& targets, std::optional<double> lambda,
                        const std::vector<double>& lambdas, int workers) {
  double chosen = lambda.value_or(0.0);
  nlohmann::ordered_json sweep = nlohmann::ordered_json::array();
  if (!lambda) {
    if (validation.empty()) throw UsageError("lambda sweep needs validation subjects; pass --lambda instead");
    std::vector<MrfSubject> val(validation.size());
    parallel_for(static_cast<int>(validation.size()), workers,
                 [&](int s) { val[s] = load_mrf_subject(layout, mode, validation[s]); });
    double best = -1.0;
    for (double l : lambdas) {
      std::vector<double> dice(val.size());
      parallel_for(static_cast<int>(val.size()), workers, [&](int s) {
        if (!val[s].labels.size()) throw DataError("validation subject " + val[s].id + " has no labels");
        dice[s] = mean_dice(regularize(val[s], l), val[s].labels, static_cast<int>(val[s].probabilities.cols()));
      });
      double mean = 0.0;
      for (double v : dice) mean += v / static_cast<double>(dice.size());
      sweep.push_back({{"lambda", l}, {"val_dice", mean}});
      spdlog::debug("[{}] lambda {} validation Dice {:.4f}", to_string(mode), l, mean);
      // Ties go to the smaller lambda.
      if (mean > best || (mean == best && l < chosen)) {
        best = mean;
        chosen = l;
      }
    }
  }
  parallel_for(static_cast<int>(targets.size()), workers, [&](int s) {
    const MrfSubject subject = load_mrf_subject(layout, mode, targets[s]);
    write_int_vector_text(layout.prediction_dir(mode, targets[s]) / "labels_mrf.txt", regularize(subject, chosen));
  });
  nlohmann::ordered_json j;
  j["lambda"] = chosen;
  j["selected_by"] = lambda ? "fixed" : "validation mean Dice";
  j["sweep"] = std::move(sweep);
  fs::create_directories(layout.mode_dir(mode));
  write_text_file_atomic(layout.mode_dir(mode) / "mrf.json", j.dump(2) + "\n");
  return chosen;
}

std::vector<ModeRun> stage_evaluate(const RunLayout& layout, const std::vector<ExperimentMode>& modes,
                                    const std::vector<std::string>& subjects, int num_parcels,
                                    const HausdorffOptions& options, int workers) {
  std::vector<SurfaceMesh> meshes(subjects.size());
  parallel_for(static_cast<int>(subjects.size()), workers, [&](int s) {
    meshes[s] = load_subject(layout, subjects[s]);
    if (!meshes[s].has_labels()) throw DataError("subject " + subjects[s] + " has no reference labels");
  });
  std::vector<SurfaceGeometry> geometry;
  geometry.reserve(meshes.size());
  for (const auto& m : meshes) geometry.emplace_back(m);

  std::vector<ModeRun> runs;
  for (const ExperimentMode mode : modes) {
    for (const char* file : {"labels_pred.txt", "labels_mrf.txt"}) {
      const bool mrf = std::string(file) == "labels_mrf.txt";
      if (mrf && !fs::exists(layout.prediction_dir(mode, subjects.front()) / file)) continue;
      ModeRun run;
      run.mode = to_string(mode) + (mrf ? "+mrf" : "");
      run.subjects = subjects;
      run.metrics.resize(subjects.size());
      parallel_for(static_cast<int>(subjects.size()), workers, [&](int s) {
        const fs::path path = layout.prediction_dir(mode, subjects[s]) / file;
        require_file(path, mrf ? "csg regularize" : "csg predict");
        const VectorXi pred = read_int_vector_text(path);
        if (pred.size() != meshes[s].num_vertices()) {
          throw DataError(path.string() + " has " + std::to_string(pred.size()) + " labels for a " +
                          std::to_string(meshes[s].num_vertices()) + "-vertex mesh");
        }
        run.metrics[s] = evaluate_subject(pred, meshes[s].labels, num_parcels, geometry[s], options);
      });
      runs.push_back(std::move(run));
    }
  }
  return runs;
}

PipelineResult run_pipeline(const PipelineConfig& config) {
  config.validate();
  PipelineResult result;
  RunLayout layout{config.data_dir.empty() ? config.out_dir / "data" : config.data_dir, config.out_dir};
  fs::create_directories(layout.out_dir);
  RunManifest manifest(layout.manifest_file());
  manifest.set_config(config.snapshot());

  auto timed = [&](const std::string& name, auto&& fn, std::vector<fs::path> artifacts) {
    Stopwatch sw;
    spdlog::info("stage {} ...", name);
    try {
      fn();
    } catch (const Error& e) {
      spdlog::error("stage {} failed: {}", name, e.what());
      throw;
    }
    const double secs = sw.seconds();
    result.stage_seconds[name] = secs;
    manifest.record_stage(name, secs, artifacts);
    spdlog::info("stage {} done in {:.1f}s", name, secs);
  };

  std::vector<std::string> subjects;
  if (config.data_dir.empty()) {
    timed("synth", [&] { subjects = stage_synth(config, layout.data_dir); }, {layout.data_dir});
  } else {
    subjects = list_subjects(layout.data_dir);
  }
  manifest.set_subjects(subjects);
  const DatasetSplit split = ensure_split(layout, subjects, config.seed);
  if (split.train.empty()) throw UsageError("split produced no training subjects");
  const std::string reference = config.reference.empty() ? split.train.front() : config.reference;
  if (std::find(subjects.begin(), subjects.end(), reference) == subjects.end()) {
    throw UsageError("reference subject '" + reference + "' not found");
  }

  const bool spectral = std::any_of(config.modes.begin(), config.modes.end(),
                                    [](ExperimentMode m) { return feature_mode_of(m) == FeatureMode::spectral; });
  if (spectral) {
    timed("embed", [&] { stage_embed(layout, subjects, config.d, config.workers); },
          {layout.spectral_file(subjects.front())});
    timed("align", [&] { stage_align(layout, subjects, reference, config.workers); },
          {layout.align_json(subjects.front())});
  }

  std::vector<std::string> eval_subjects = split.validation;
  eval_subjects.insert(eval_subjects.end(), split.test.begin(), split.test.end());
  const std::vector<std::string>& report_subjects = split.test.empty() ? split.validation : split.test;
  if (report_subjects.empty()) throw UsageError("split has no test or validation subjects to evaluate");

  for (const ExperimentMode mode : config.modes) {
    const std::string tag = to_string(mode);
    timed("train:" + tag, [&] { stage_train(layout, split, mode, config); },
          {layout.checkpoint_file(mode), layout.mode_dir(mode) / "train_log.csv"});
    timed("predict:" + tag, [&] { stage_predict(layout, eval_subjects, mode, config.workers); },
          {layout.prediction_dir(mode, eval_subjects.front()) / "labels_pred.txt"});
    timed("regularize:" + tag,
          [&] {
            stage_regularize(layout, mode, split.validation, eval_subjects, config.lambda, config.lambdas,
                             config.workers);
          },
          {layout.mode_dir(mode) / "mrf.json"});
  }

  timed("evaluate",
        [&] {
          result.runs = stage_evaluate(layout, config.modes, report_subjects, config.n_parcels, config.hausdorff,
                                       config.workers);
          result.report = emit_report(layout.report_dir(), result.runs);
        },
        {layout.report_dir() / "summary.json", layout.report_dir() / "metrics_per_parcel.csv"});

  manifest.check_artifacts();
  manifest.save();
  return result;
}

}  // namespace csg
