// Acceptance checks, one line per criterion:
//   criterion N: PASS|FAIL  <summary>
// `--only N` runs a single criterion (ctest registers each separately).

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "cranial/cli.hpp"
#include "cranial/edt.hpp"
#include "cranial/gradcheck.hpp"
#include "cranial/metrics.hpp"
#include "cranial/morphology.hpp"
#include "cranial/phantom.hpp"
#include "cranial/synth.hpp"
#include "cranial/trainer.hpp"
#include "support.hpp"

using namespace cranial;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// Silences stderr for the CLI calls of criterion 8.
struct MuteStderr {
    std::ostringstream sink;
    std::streambuf* old = std::cerr.rdbuf(sink.rdbuf());
    ~MuteStderr() { std::cerr.rdbuf(old); }
};

// --- 1: metrics --------------------------------------------------------------

Outcome metrics_oracle() {
    const auto t0 = Clock::now();
    Rng rng(derive(1, {tag("acceptance-metrics")}));
    int mismatches = 0, pairs = 0;
    for (; pairs < 200; ++pairs) {
        const Geometry geom{oracle::random_dims(rng, 2, 16), oracle::random_spacing(rng)};
        auto a = oracle::noise_mask(rng, geom, rng.uniform(0.02, 0.6));
        auto b = pairs % 2 ? oracle::blob_mask(rng, geom, 3) : oracle::noise_mask(rng, geom, rng.uniform(0.02, 0.6));
        if (a.empty()) a.set(0, true);
        if (b.empty()) b.set(b.size() - 1, true);
        const double d_expect =
            2.0 * double(oracle::count_and(a, b)) / double(oracle::count(a) + oracle::count(b));
        const auto ab = oracle::directed_surface(a, b);
        const auto ba = oracle::directed_surface(b, a);
        auto pooled = ab;
        pooled.insert(pooled.end(), ba.begin(), ba.end());
        const auto sd = surface_distances(a, b);
        const bool ok = dsc(a, b) == d_expect && sd.a_to_b == ab && sd.b_to_a == ba &&
                        hd95(a, b) == oracle::nearest_rank(pooled, 95);
        mismatches += !ok;
    }
    const double secs = seconds_since(t0);
    return {mismatches == 0 && secs <= 60.0,
            fmt("%d pairs, %d mismatches, %.1f s (limit 60 s)", pairs, mismatches, secs)};
}

// --- 2: EDT ------------------------------------------------------------------

Outcome edt_exact() {
    const auto t0 = Clock::now();
    Rng rng(derive(2, {tag("acceptance-edt")}));
    int bad = 0, masks = 0;
    for (; masks < 60; ++masks) {
        const Geometry geom{oracle::random_dims(rng, 1, 16), oracle::random_spacing(rng)};
        auto g = oracle::noise_mask(rng, geom, rng.uniform() < 0.5 ? rng.uniform(0.001, 0.05) : rng.uniform(0.05, 0.9));
        if (g.empty()) g.set(0, true);
        bad += edt_squared(g).values != oracle::edt_squared(g, geom.spacing);
    }
    const double secs = seconds_since(t0);
    return {bad == 0 && secs <= 30.0, fmt("%d masks, %d inexact, %.1f s (limit 30 s)", masks, bad, secs)};
}

// --- 3: morphology -------------------------------------------------------------

VoxelGrid padded(const VoxelGrid& g, std::int64_t pad) {
    const auto& d = g.dims();
    return paste(g, Geometry{{d[0] + 2 * pad, d[1] + 2 * pad, d[2] + 2 * pad}}, {pad, pad, pad});
}

bool subset(const VoxelGrid& a, const VoxelGrid& b) { return subtract(a, b).empty(); }

Outcome morphology_oracle() {
    Rng rng(derive(3, {tag("acceptance-morphology")}));
    int oracle_bad = 0, fuzz_bad = 0, masks = 0;
    for (; masks < 100; ++masks) {
        const Geometry geom{{12, 12, 12}, oracle::random_spacing(rng)};
        const auto g = masks % 2 ? oracle::noise_mask(rng, geom, rng.uniform(0.2, 0.8)) : oracle::blob_mask(rng, geom, 3);
        for (int r : {1, 2}) {
            const auto d = oracle::dilate(g, r);
            const auto e = oracle::erode(g, r);
            oracle_bad += dilate(g, r) != d || erode(g, r) != e || open(g, r) != oracle::dilate(e, r) ||
                          close(g, r) != oracle::erode(d, r);

            // Duality away from the border, where the outside convention does not reach.
            const auto p = padded(g, r);
            const auto dual = erode(p.complement(), r).complement();
            const auto dp = dilate(p, r);
            const auto& pd = p.dims();
            for (std::int64_t z = r; z < pd[2] - r; ++z)
                for (std::int64_t y = r; y < pd[1] - r; ++y)
                    for (std::int64_t x = r; x < pd[0] - r; ++x) fuzz_bad += dp.at(x, y, z) != dual.at(x, y, z);

            const auto h = padded(oracle::blob_mask(rng, Geometry{oracle::random_dims(rng, 4, 10)}, 3), 2 * r);
            const auto s = intersect(h, oracle::noise_mask(rng, h.geometry(), 0.8));
            fuzz_bad += open(open(s, r), r) != open(s, r) || close(close(s, r), r) != close(s, r) ||
                        !subset(dilate(s, r), dilate(h, r)) || !subset(erode(s, r), erode(h, r)) ||
                        !subset(open(s, r), s) || !subset(s, close(s, r));
        }
    }
    return {oracle_bad == 0 && fuzz_bad == 0,
            fmt("%d masks x r in {1,2}: %d oracle mismatches, %d fuzz violations", masks, oracle_bad, fuzz_bad)};
}

// --- 4: synthesis ----------------------------------------------------------------

Outcome synthesis_invariants() {
    const auto t0 = Clock::now();
    std::vector<VoxelGrid> skulls;
    for (std::uint64_t i = 0; i < 10; ++i) skulls.push_back(generate_phantom(PhantomConfig{}, derive(4, {i})));
    const SynthConfig d;
    SynthConfig zero = d;
    zero.max_disp_vox = 0.0;
    SynthConfig nd = d;
    nd.deform_enabled = false;
    int violations = 0, cases = 0;
    for (; cases < 1000; ++cases) {
        const auto& skull = skulls[static_cast<std::size_t>(cases % 10)];
        const auto seed = derive(4, {tag("case"), std::uint64_t(cases)});
        const auto c = synthesize_case(skull, d, seed);
        const auto replay = synthesize_case(skull, d, seed);
        violations += c.defective != subtract(skull, c.defect_gt) || c.defect_gt.empty() ||
                      !subset(c.defect_gt, skull) || replay.defect_gt != c.defect_gt ||
                      replay.defective != c.defective;
        if (cases % 4 == 0) {
            const auto a = synthesize_case(skull, zero, seed);
            const auto b = synthesize_case(skull, nd, seed);
            violations += a.defect_gt != b.defect_gt || a.defective != b.defective;
        }
    }
    const double secs = seconds_since(t0);
    return {violations == 0 && secs <= 120.0,
            fmt("%d cases over 10 phantoms, %d violations, %.1f s (limit 120 s)", cases, violations, secs)};
}

// --- 5: gradients ----------------------------------------------------------------

Outcome gradient_checks() {
    double worst_op = 0.0, worst_model = 0.0;
    bool ok = true;
    for (const auto& r : run_gradcheck_suite({})) {
        ok = ok && r.passed();
        (r.name.starts_with("model/") ? worst_model : worst_op) =
            std::max(r.name.starts_with("model/") ? worst_model : worst_op, r.max_rel_error);
    }
    int code;
    {
        std::ostringstream sink;
        auto* old = std::cout.rdbuf(sink.rdbuf());
        code = cli::run({"cranial", "gradcheck"});
        std::cout.rdbuf(old);
    }
    return {ok && worst_op <= 1e-5 && worst_model <= 1e-4 && code == 0,
            fmt("max op error %.2e (limit 1e-5), model %.2e (limit 1e-4), gradcheck exit %d", worst_op, worst_model,
                code)};
}

// --- 6: desk-scale learning -------------------------------------------------------

// Calibrated from the seed-42 default run (held-out dsc 0.835), with margin
// for BLAS summation-order differences across machines.
constexpr double kDeskDscFloor = 0.75;

struct DeskOverrides {
    int epochs = 0;
    int phantoms = 0;
};

Outcome desk_learning(const DeskOverrides& ov) {
    const auto t0 = Clock::now();
    TrainConfig cfg;
    cfg.base_seed = 42;
    const bool reduced = ov.epochs > 0 || ov.phantoms > 0;
    if (ov.epochs > 0) cfg.epochs = ov.epochs;
    if (ov.phantoms > 0) cfg.data.phantom_count = ov.phantoms;

    const auto result = train(cfg, [](const EpochLog& e) {
        std::fprintf(stderr, "  epoch %d loss %.5f (%.0f ms)\n", e.epoch, e.mean_loss, e.wall_ms);
    });
    const auto cases = make_eval_cases(load_heldout_skulls(cfg), cfg.synth, cfg.base_seed);
    const auto model_summary = summarize(evaluate_model(result.model, cases, cfg.eval));
    std::vector<VoxelGrid> copy;
    for (const auto& c : cases) copy.push_back(c.defective);
    const auto baseline = summarize(evaluate_reconstructions(cases, copy, cfg.eval));

    const double first = result.log.front().mean_loss, last = result.log.back().mean_loss;
    const double secs = seconds_since(t0);
    const bool pass = last < first && model_summary.dsc.mean > baseline.dsc.mean &&
                      model_summary.dsc.mean >= kDeskDscFloor && model_summary.failed == 0 && !reduced;
    return {pass, fmt("%s%d phantoms x %d epochs: loss %.4f -> %.4f; held-out defect dsc %.4f (median %.4f, bdsc "
                      "%.4f, hd95 %.2f mm) vs copy-input %.4f; floor %.2f; %.1f min (target 30)",
                      reduced ? "REDUCED RUN, not a verdict: " : "", cfg.data.phantom_count, cfg.epochs, first, last,
                      model_summary.dsc.mean, model_summary.dsc.median, model_summary.bdsc.mean,
                      model_summary.hd95_mm.mean, baseline.dsc.mean, kDeskDscFloor, secs / 60.0)};
}

// --- 7: ablation direction -------------------------------------------------------

// 40 phantoms x 20 epochs left most arms at the copy-input plateau (DSC 0),
// which compares nothing; this budget gets most arms past it.
struct AblationSetup {
    int seeds = 3;
    int phantoms = 100;
    int epochs = 30;
    int heldout = 20;
};

Outcome ablation_direction(const AblationSetup& s) {
    const auto t0 = Clock::now();
    TrainConfig cfg;
    cfg.data.phantom_count = s.phantoms;
    cfg.data.heldout_count = s.heldout;
    cfg.epochs = s.epochs;
    std::vector<std::uint64_t> seeds;
    for (int k = 0; k < s.seeds; ++k) seeds.push_back(derive(42, {tag("ablation"), std::uint64_t(k)}));
    const auto arms = run_ablation(cfg, seeds, [](const std::string& msg) { std::fprintf(stderr, "  %s\n", msg.c_str()); });

    std::map<std::string, std::vector<double>> per_seed;
    for (const auto& arm : arms) per_seed[arm.label].push_back(summarize(arm.reports).dsc.mean);
    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / double(v.size());
    };
    const double d = mean(per_seed["D"]), nd = mean(per_seed["ND"]);
    std::string seeds_txt;
    for (std::size_t i = 0; i < per_seed["D"].size(); ++i) {
        seeds_txt += fmt(" [%.4f vs %.4f]", per_seed["D"][i], per_seed["ND"][i]);
    }
    return {d > nd, fmt("%d seeds, %d phantoms x %d epochs: mean defect dsc D %.4f vs ND %.4f; per seed%s; %.1f min",
                        s.seeds, s.phantoms, s.epochs, d, nd, seeds_txt.c_str(), seconds_since(t0) / 60.0)};
}

// --- 8: I/O ------------------------------------------------------------------------

Outcome io_roundtrip() {
    const auto dir = fs::temp_directory_path() / "cranial_acceptance_io";
    fs::remove_all(dir);
    fs::create_directories(dir);
    int bad = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(derive(8, {seed}));
        const Geometry geom{oracle::random_dims(rng, 1, 24), oracle::random_spacing(rng),
                            {rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-50, 50)}};
        const auto g = oracle::noise_mask(rng, geom, rng.uniform());
        write_mha(g, dir / "v.mha");
        write_raw(g, dir / "v.bin");
        bad += read_mha(dir / "v.mha") != g || read_raw(dir / "v.json") != g;
    }
    int fixtures = 0, wrong_code = 0;
    {
        MuteStderr mute;
        for (const auto& e : fs::directory_iterator(fs::path(CRANIAL_TEST_DATA) / "malformed")) {
            ++fixtures;
            wrong_code += cli::run({"cranial", "preprocess", "--input", e.path().string(), "--out", dir.string()}) != 2;
        }
    }
    fs::remove_all(dir);
    return {bad == 0 && fixtures >= 5 && wrong_code == 0,
            fmt("100 grids, %d round-trip mismatches; %d malformed fixtures, %d without exit code 2", bad, fixtures,
                wrong_code)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::vector<int> only;
    DeskOverrides desk;
    AblationSetup ablation;
    app.add_option("--only", only, "Criteria to run (default: all)")->check(CLI::Range(1, 8));
    app.add_option("--desk-epochs", desk.epochs, "Shorter criterion-6 run for calibration (never passes)");
    app.add_option("--desk-phantoms", desk.phantoms, "Fewer criterion-6 phantoms for calibration (never passes)");
    app.add_option("--ablation-seeds", ablation.seeds)->capture_default_str();
    app.add_option("--ablation-phantoms", ablation.phantoms)->capture_default_str();
    app.add_option("--ablation-epochs", ablation.epochs)->capture_default_str();
    CLI11_PARSE(app, argc, argv);
    if (ablation.seeds < 3) {
        std::cerr << "criterion 7 needs at least 3 seeds\n";
        return 1;
    }

    const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
        {1, metrics_oracle},
        {2, edt_exact},
        {3, morphology_oracle},
        {4, synthesis_invariants},
        {5, gradient_checks},
        {6, [&] { return desk_learning(desk); }},
        {7, [&] { return ablation_direction(ablation); }},
        {8, io_roundtrip},
    };
    int failed = 0;
    for (const auto& [n, run] : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), n) == only.end()) continue;
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
        failed += !o.pass;
    }
    return failed == 0 ? 0 : 1;
}
