#include "cranial/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "cranial/edt.hpp"
#include "cranial/error.hpp"
#include "cranial/morphology.hpp"

namespace cranial {

double dsc(const VoxelGrid& a, const VoxelGrid& b) {
    require_compatible(a.geometry(), b.geometry());
    const auto na = a.foreground_count();
    const auto nb = b.foreground_count();
    if (na + nb == 0) throw Error(ErrorKind::BothEmpty, "dsc of two empty masks");
    const auto both = intersect(a, b).foreground_count();
    return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

namespace {

std::vector<double> directed(const VoxelGrid& from_boundary, const ScalarField& to_distance) {
    std::vector<double> out;
    for (std::int64_t idx : from_boundary.foreground_indices()) {
        out.push_back(to_distance.values[static_cast<std::size_t>(idx)]);
    }
    return out;
}

}  // namespace

SurfaceDistances surface_distances(const VoxelGrid& a, const VoxelGrid& b) {
    require_compatible(a.geometry(), b.geometry());
    if (a.empty() || b.empty()) throw Error(ErrorKind::EmptyVolume, "surface distances need two nonempty masks");
    const VoxelGrid ba = boundary(a);
    const VoxelGrid bb = boundary(b);
    return {directed(ba, edt(bb)), directed(bb, edt(ba))};
}

double percentile_nearest_rank(std::vector<double> values, int q) {
    if (values.empty()) throw Error(ErrorKind::InvalidArgument, "percentile of empty sequence");
    if (q <= 0 || q > 100) throw Error(ErrorKind::InvalidArgument, "percentile must be in (0, 100]");
    const std::size_t n = values.size();
    const std::size_t rank = (static_cast<std::size_t>(q) * n + 99) / 100;  // ceil(q n / 100)
    const std::size_t k = std::max<std::size_t>(rank, 1) - 1;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
    return values[k];
}

double hd95(const VoxelGrid& a, const VoxelGrid& b) {
    auto sd = surface_distances(a, b);
    sd.a_to_b.insert(sd.a_to_b.end(), sd.b_to_a.begin(), sd.b_to_a.end());
    return percentile_nearest_rank(std::move(sd.a_to_b), 95);
}

double bdsc(const VoxelGrid& pred, const VoxelGrid& gt, double width_mm) {
    require_compatible(pred.geometry(), gt.geometry());
    if (gt.empty()) throw Error(ErrorKind::EmptyVolume, "bdsc needs a nonempty ground truth");
    const auto dist = edt(boundary(gt));
    VoxelGrid band(gt.geometry());
    for (std::int64_t i = 0; i < band.size(); ++i) {
        if (dist.values[static_cast<std::size_t>(i)] <= width_mm) band.set(i, true);
    }
    const VoxelGrid p = intersect(pred, band);
    const VoxelGrid g = intersect(gt, band);
    if (p.empty() && g.empty()) return 1.0;
    return dsc(p, g);
}

MetricsReport evaluate_case(const VoxelGrid& pred_defect, const VoxelGrid& gt_defect, const MetricOptions& opts) {
    require_compatible(pred_defect.geometry(), gt_defect.geometry());
    if (gt_defect.empty()) throw Error(ErrorKind::EmptyVolume, "ground-truth defect is empty");
    MetricsReport r;
    r.dsc = dsc(pred_defect, gt_defect);
    r.bdsc = bdsc(pred_defect, gt_defect, opts.bdsc_width_mm);
    if (pred_defect.empty()) {
        r.hd95_defined = false;
        r.hd95_mm = std::numeric_limits<double>::infinity();
    } else {
        r.hd95_defined = true;
        r.hd95_mm = hd95(pred_defect, gt_defect);
    }
    return r;
}

nlohmann::json to_json(const MetricsReport& r) {
    nlohmann::json j;
    j["case_id"] = r.case_id;
    if (!r.error.empty()) {
        j["error"] = r.error;
    } else {
        j["dsc"] = r.dsc;
        j["bdsc"] = r.bdsc;
    }
    j["hd95_mm"] = (r.error.empty() && r.hd95_defined) ? nlohmann::json(r.hd95_mm) : nlohmann::json(nullptr);
    j["hd95_defined"] = r.error.empty() && r.hd95_defined;
    j["seed"] = r.seed;
    j["config_hash"] = r.config_hash;
    return j;
}

namespace {

MetricSummary summarize_values(std::vector<double> v) {
    MetricSummary s;
    s.count = v.size();
    if (v.empty()) {
        s.mean = s.median = std::numeric_limits<double>::quiet_NaN();
        return s;
    }
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    s.median = (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    return s;
}

}  // namespace

ReportSummary summarize(const std::vector<MetricsReport>& reports) {
    std::vector<double> d, b, h;
    ReportSummary s;
    for (const auto& r : reports) {
        ++s.cases;
        if (!r.error.empty()) {
            ++s.failed;
            continue;
        }
        d.push_back(r.dsc);
        b.push_back(r.bdsc);
        if (r.hd95_defined) h.push_back(r.hd95_mm);
    }
    s.dsc = summarize_values(std::move(d));
    s.bdsc = summarize_values(std::move(b));
    s.hd95_mm = summarize_values(std::move(h));
    return s;
}

void write_jsonl(std::ostream& os, const std::vector<MetricsReport>& reports) {
    for (const auto& r : reports) os << to_json(r).dump() << '\n';
}

void write_summary_csv(std::ostream& os, const std::vector<std::pair<std::string, ReportSummary>>& rows) {
    os << "label,cases,dsc_mean,dsc_median,bdsc_mean,bdsc_median,hd95_mean_mm,hd95_median_mm\n";
    auto num = [](double v) {
        if (std::isnan(v)) return std::string("nan");
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.6f", v);
        return std::string(buf);
    };
    for (const auto& [label, s] : rows) {
        os << label << ',' << s.cases << ',' << num(s.dsc.mean) << ',' << num(s.dsc.median) << ','
           << num(s.bdsc.mean) << ',' << num(s.bdsc.median) << ',' << num(s.hd95_mm.mean) << ','
           << num(s.hd95_mm.median) << '\n';
    }
}

}  // namespace cranial
