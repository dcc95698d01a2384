#include "csg/report.hpp"

#include <json.hpp>

#include "csg/error.hpp"
#include "csg/text_io.hpp"

namespace csg {

namespace {

void check_runs(const std::vector<ModeRun>& runs) {
  if (runs.empty()) throw UsageError("report needs at least one run");
  for (const auto& run : runs) {
    if (run.subjects.size() != run.metrics.size()) throw UsageError("run '" + run.mode + "' has mismatched subjects");
    if (run.metrics.empty()) throw UsageError("run '" + run.mode + "' has no subjects");
  }
}

}  // namespace

std::string per_parcel_csv(const std::vector<ModeRun>& runs) {
  check_runs(runs);
  std::string out = "mode,subject,parcel,dice,hausdorff_mm\n";
  for (const auto& run : runs) {
    for (std::size_t s = 0; s < run.subjects.size(); ++s) {
      const SubjectMetrics& m = run.metrics[s];
      for (std::size_t c = 0; c < m.dice.size(); ++c) {
        out += run.mode + "," + run.subjects[s] + "," + std::to_string(c) + "," + format_double(m.dice[c]) + "," +
               format_double(m.hausdorff[c]) + "\n";
      }
    }
  }
  return out;
}

std::string dice_table_csv(const std::vector<ModeRun>& runs) {
  check_runs(runs);
  std::vector<ParcelSummary> summaries;
  std::size_t parcels = 0;
  for (const auto& run : runs) {
    summaries.push_back(summarize(run.metrics));
    parcels = std::max(parcels, summaries.back().parcel_dice.size());
  }
  std::string out = "parcel";
  for (const auto& run : runs) out += "," + run.mode;
  out += "\n";
  for (std::size_t c = 0; c < parcels; ++c) {
    out += std::to_string(c);
    for (const auto& s : summaries) out += "," + (c < s.parcel_dice.size() ? format_double(s.parcel_dice[c]) : "");
    out += "\n";
  }
  return out;
}

std::string summary_json(const std::vector<ModeRun>& runs) {
  check_runs(runs);
  nlohmann::ordered_json modes = nlohmann::ordered_json::object();
  for (const auto& run : runs) {
    const ParcelSummary s = summarize(run.metrics);
    nlohmann::ordered_json j;
    j["subjects"] = run.subjects;
    j["mean_dice"] = s.mean_dice;
    j["std_dice"] = s.std_dice;
    j["min_dice"] = s.min_dice;
    j["max_dice"] = s.max_dice;
    j["mean_hausdorff_mm"] = s.mean_hausdorff;
    j["accuracy"] = s.accuracy;
    j["parcel_dice"] = s.parcel_dice;
    j["parcel_hausdorff_mm"] = s.parcel_hausdorff;
    modes[run.mode] = std::move(j);
  }
  nlohmann::ordered_json root;
  root["modes"] = std::move(modes);
  return root.dump(2) + "\n";
}

ReportFiles emit_report(const std::filesystem::path& dir, const std::vector<ModeRun>& runs) {
  ReportFiles files{dir / "metrics_per_parcel.csv", dir / "dice_by_parcel.csv", dir / "summary.json"};
  std::filesystem::create_directories(dir);
  write_text_file_atomic(files.per_parcel_csv, per_parcel_csv(runs));
  write_text_file_atomic(files.dice_table_csv, dice_table_csv(runs));
  write_text_file_atomic(files.summary_json, summary_json(runs));
  return files;
}

}  // namespace csg
