#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "edac/diagnostics.hpp"
#include "edac/metrics.hpp"
#include "edac/sweep.hpp"

namespace edac::runner {

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

/// Column order of history.csv. Wall time is left out so that seeded reruns
/// produce identical bytes; it is kept in summary.json and the checkpoint.
inline constexpr const char* kHistoryHeader =
    "epoch,method,lr,clean_acc_train,clean_acc_test,robust_acc_train,robust_acc_test,ac_train,ac_test";
std::string history_row(const MetricsRecord& row);

inline constexpr const char* kSweepHeader = "eta,ac_train,robust_acc_test,ok";
std::string sweep_csv(std::span<const SweepRow> rows);

std::vector<std::string> class_names(std::size_t num_classes);

/// K x K grid with a one-line header of class names; row j is ground truth j.
std::string heatmap_csv(const Heatmap& heatmap);

/// Same header as the heatmap grid, then one row of per-class label-level variances.
std::string label_variance_csv(const Heatmap& heatmap);

/// Writes through a temporary file and renames, so readers never see half a file.
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace edac::runner
