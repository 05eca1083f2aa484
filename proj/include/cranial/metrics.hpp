#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cranial/volume.hpp"

namespace cranial {

/// 2|a ∩ b| / (|a| + |b|). Throws GeometryMismatch, BothEmpty.
double dsc(const VoxelGrid& a, const VoxelGrid& b);

/// Directed distances (mm) between voxel centres of the two boundaries:
/// for every voxel of boundary(a) the distance to the nearest voxel of
/// boundary(b), and vice versa.
struct SurfaceDistances {
    std::vector<double> a_to_b;
    std::vector<double> b_to_a;
};

SurfaceDistances surface_distances(const VoxelGrid& a, const VoxelGrid& b);

/// Nearest-rank percentile: element ceil(q/100 * n) - 1 of the sorted values
/// (q in (0, 100]). Throws on empty input.
double percentile_nearest_rank(std::vector<double> values, int q);

/// 95th percentile of the pooled directed surface distances.
double hd95(const VoxelGrid& a, const VoxelGrid& b);

/// Dice restricted to R = {v : distance to boundary(gt) <= width_mm}.
/// Both restricted sets empty counts as perfect agreement (1.0).
double bdsc(const VoxelGrid& pred, const VoxelGrid& gt, double width_mm = 2.0);

struct MetricOptions {
    double bdsc_width_mm = 2.0;
};

struct MetricsReport {
    std::string case_id;
    double dsc = 0.0;
    double bdsc = 0.0;
    double hd95_mm = 0.0;
    bool hd95_defined = false;  // false when the prediction is empty
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string error;  // non-empty when the case failed and carries no metrics
};

/// Never throws for empty predictions: those score dsc 0 with hd95 flagged
/// undefined. gt must be nonempty.
MetricsReport evaluate_case(const VoxelGrid& pred_defect, const VoxelGrid& gt_defect, const MetricOptions& opts = {});

nlohmann::json to_json(const MetricsReport& r);

struct MetricSummary {
    double mean = 0.0;
    double median = 0.0;
    std::size_t count = 0;
};

struct ReportSummary {
    MetricSummary dsc;
    MetricSummary bdsc;
    MetricSummary hd95_mm;  // over cases with hd95_defined
    std::size_t cases = 0;
    std::size_t failed = 0;
};

ReportSummary summarize(const std::vector<MetricsReport>& reports);

/// One JSON object per line.
void write_jsonl(std::ostream& os, const std::vector<MetricsReport>& reports);

/// Header plus one row per labelled summary:
/// label,cases,dsc_mean,dsc_median,bdsc_mean,bdsc_median,hd95_mean_mm,hd95_median_mm
void write_summary_csv(std::ostream& os, const std::vector<std::pair<std::string, ReportSummary>>& rows);

}  // namespace cranial
