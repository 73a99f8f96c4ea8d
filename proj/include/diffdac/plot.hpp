#pragma once

#include "diffdac/stats.hpp"
#include "diffdac/training.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace diffdac::plot {

/// One curve. Several CSVs under the same label (e.g. one per seed) are pooled.
struct SeriesSpec {
    std::string label;
    std::vector<std::filesystem::path> csvs;
};

struct CurvePoint {
    double episodes = 0.0;
    Quartiles spread;
};

struct Curve {
    std::string label;
    std::vector<CurvePoint> points;
};

/// Quartiles of return_mean over every per-agent row (agent_id >= 0, task_id >= 0)
/// at each evaluation point. Aggregate rows are ignored.
std::vector<CurvePoint> learning_curve(std::span<const std::vector<training::MetricsRow>> runs);

/// "label:path" or plain "path" (label = file stem). Repeated labels are merged.
std::vector<SeriesSpec> parse_series_args(std::span<const std::string> args);

/// Median line plus interquartile band per curve. Deterministic text output.
std::string render_svg(std::span<const Curve> curves, const std::string& title);

/// Reads every CSV, renders, and only then writes `output`. Throws ConfigError on a
/// schema mismatch and ArgumentError when a CSV holds no data rows.
void plot(std::span<const SeriesSpec> series, const std::filesystem::path& output, const std::string& title);

} // namespace diffdac::plot
