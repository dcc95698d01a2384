#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "csg/metrics.hpp"

namespace csg {

/// Per-subject metrics of one experiment arm (e.g. "spectral" or "spectral+mrf").
struct ModeRun {
  std::string mode;
  std::vector<std::string> subjects;
  std::vector<SubjectMetrics> metrics;
};

struct ReportFiles {
  std::filesystem::path per_parcel_csv;
  std::filesystem::path dice_table_csv;
  std::filesystem::path summary_json;
};

/// `mode,subject,parcel,dice,hausdorff_mm` rows, in run, subject and parcel order.
std::string per_parcel_csv(const std::vector<ModeRun>& runs);

/// One row per parcel, one column per run, holding the subject-averaged Dice.
std::string dice_table_csv(const std::vector<ModeRun>& runs);

/// Aggregates per run. Contains no timings, so identical inputs give identical bytes.
std::string summary_json(const std::vector<ModeRun>& runs);

ReportFiles emit_report(const std::filesystem::path& dir, const std::vector<ModeRun>& runs);

}  // namespace csg
