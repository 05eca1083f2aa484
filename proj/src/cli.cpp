#include "cranial/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <omp.h>

#include "cranial/checkpoint.hpp"
#include "cranial/error.hpp"
#include "cranial/gradcheck.hpp"
#include "cranial/preprocess.hpp"
#include "cranial/rng.hpp"
#include "cranial/trainer.hpp"

namespace cranial::cli {

namespace fs = std::filesystem;

namespace {

struct Shared {
    std::string config;
    std::optional<std::uint64_t> seed;
    int jobs = 0;
    std::string out = ".";
};

void add_shared(CLI::App* sub, Shared& s) {
    sub->add_option("--config", s.config, "JSON config with sections synth, model, optim, data, metrics")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", s.seed, "Base seed; all randomness derives from it");
    sub->add_option("--jobs", s.jobs, "Worker threads (0: runtime default)")->check(CLI::NonNegativeNumber);
    sub->add_option("--out", s.out, "Output directory")->capture_default_str();
}

TrainConfig resolve_config(const Shared& s) {
    TrainConfig cfg = s.config.empty() ? TrainConfig{} : load_train_config(s.config);
    if (s.seed) cfg.base_seed = *s.seed;
    return cfg;
}

fs::path out_dir(const Shared& s) {
    fs::path dir(s.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());
    return dir;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::trunc);
    out << j.dump(2) << '\n';
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
}

void write_reports(const fs::path& dir, const std::string& stem,
                   const std::vector<std::pair<std::string, std::vector<MetricsReport>>>& groups) {
    std::ofstream jl(dir / (stem + ".jsonl"), std::ios::trunc);
    std::vector<std::pair<std::string, ReportSummary>> rows;
    for (const auto& [label, reports] : groups) {
        write_jsonl(jl, reports);
        rows.emplace_back(label, summarize(reports));
    }
    std::ofstream csv(dir / (stem + ".csv"), std::ios::trunc);
    write_summary_csv(csv, rows);
    if (!jl || !csv) throw Error(ErrorKind::IoError, "cannot write reports in " + dir.string());
}

// --- synthesize -------------------------------------------------------------

struct SynthArgs {
    int phantoms = 0;
    std::vector<std::string> inputs;
    int cases_per_skull = 1;
};

int cmd_synthesize(const Shared& sh, const SynthArgs& a) {
    if ((a.phantoms > 0) == !a.inputs.empty()) {
        throw Error(ErrorKind::InvalidArgument, "give exactly one of --phantoms N or --input FILE...");
    }
    const TrainConfig cfg = resolve_config(sh);
    const fs::path dir = out_dir(sh);
    std::vector<VoxelGrid> skulls;
    std::vector<std::string> names;
    if (a.phantoms > 0) {
        TrainConfig pc = cfg;
        pc.data.dataset_dir.clear();
        pc.data.phantom_count = a.phantoms;
        skulls = load_training_skulls(pc);
        for (int i = 0; i < a.phantoms; ++i) {
            char name[32];
            std::snprintf(name, sizeof name, "phantom_%04d.mha", i);
            write_mha(skulls[static_cast<std::size_t>(i)], dir / name);
            names.emplace_back(name);
        }
    } else {
        for (const auto& in : a.inputs) {
            skulls.push_back(read_volume(in));
            names.push_back(in);
        }
    }

    const auto total = static_cast<std::int64_t>(skulls.size()) * a.cases_per_skull;
    std::vector<nlohmann::json> entries(static_cast<std::size_t>(total));
    std::vector<std::string> errors(static_cast<std::size_t>(total));
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t k = 0; k < total; ++k) {
        const auto skull_index = k / a.cases_per_skull;
        const std::uint64_t seed = derive(cfg.base_seed, {tag("synthesize"), static_cast<std::uint64_t>(k)});
        try {
            const CasePair c = synthesize_case(skulls[static_cast<std::size_t>(skull_index)], cfg.synth, seed);
            const std::string stem = "case_" + std::to_string(seed);
            write_mha(c.defective, dir / (stem + "_defective.mha"));
            write_mha(c.defect_gt, dir / (stem + "_defect.mha"));
            nlohmann::json meta = case_metadata(c);
            meta["skull"] = names[static_cast<std::size_t>(skull_index)];
            write_json(dir / (stem + ".json"), meta);
            entries[static_cast<std::size_t>(k)] = {{"case", stem},
                                                    {"seed", seed},
                                                    {"skull", names[static_cast<std::size_t>(skull_index)]}};
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(k)] = e.what();
        }
    }
    for (const auto& e : errors) {
        if (!e.empty()) throw Error(ErrorKind::SynthesisFailed, e);
    }
    write_json(dir / "manifest.json", {{"seed", cfg.base_seed},
                                       {"config_hash", config_hash(cfg.synth)},
                                       {"synth", to_json(cfg.synth)},
                                       {"phantom", to_json(cfg.data.phantom)},
                                       {"skulls", names},
                                       {"cases", entries}});
    std::cout << "wrote " << total << " cases to " << dir.string() << '\n';
    return kOk;
}

// --- preprocess -------------------------------------------------------------

struct PreArgs {
    std::string input;
    std::int64_t margin = 2;
    std::vector<std::int64_t> dims;
    std::string restore;  // transform sidecar: run the inverse instead
};

int cmd_preprocess(const Shared& sh, const PreArgs& a) {
    const TrainConfig cfg = resolve_config(sh);
    const fs::path dir = out_dir(sh);
    const VoxelGrid g = read_volume(a.input);
    const std::string stem = fs::path(a.input).stem().string();
    if (!a.restore.empty()) {
        std::ifstream in(a.restore);
        if (!in) throw Error(ErrorKind::IoError, "cannot open " + a.restore);
        GeomTransform t;
        try {
            t = transform_from_json(nlohmann::json::parse(in));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::FormatError, a.restore + ": " + e.what());
        }
        write_mha(restore(g, t), dir / (stem + "_restored.mha"));
        return kOk;
    }
    Index3 target = cfg.data.phantom.dims;
    if (!a.dims.empty()) {
        if (a.dims.size() != 3) throw Error(ErrorKind::InvalidArgument, "--dims takes three values");
        target = {a.dims[0], a.dims[1], a.dims[2]};
    }
    const auto [out, t] = normalize(g, a.margin, target);
    write_mha(out, dir / (stem + "_pre.mha"));
    write_json(dir / "preproc.json", to_json(t));
    return kOk;
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
    std::optional<int> epochs;
    std::optional<int> phantoms;
    std::optional<std::string> dataset;
    std::optional<int> checkpoint_every;
    bool quiet = false;
};

void apply(TrainConfig& cfg, const TrainArgs& a) {
    if (a.epochs) cfg.epochs = *a.epochs;
    if (a.phantoms) cfg.data.phantom_count = *a.phantoms;
    if (a.dataset) cfg.data.dataset_dir = *a.dataset;
    if (a.checkpoint_every) cfg.checkpoint_every = *a.checkpoint_every;
}

int cmd_train(const Shared& sh, const TrainArgs& a) {
    TrainConfig cfg = resolve_config(sh);
    apply(cfg, a);
    const fs::path dir = out_dir(sh);
    cfg.checkpoint_stem = dir / "model";
    cfg.log_path = dir / "train_log.jsonl";
    write_json(dir / "train_config.json", to_json(cfg));
    const auto result = train(cfg, [&](const EpochLog& e) {
        if (!a.quiet) std::cerr << "epoch " << e.epoch << " loss " << e.mean_loss << " lr " << e.lr << '\n';
    });
    std::cout << "final loss " << result.log.back().mean_loss << ", checkpoint " << cfg.checkpoint_stem.string()
              << ".json\n";
    return kOk;
}

// --- infer ------------------------------------------------------------------

struct InferArgs {
    std::string checkpoint;
    std::string input;
    std::optional<double> threshold;
};

int cmd_infer(const Shared& sh, const InferArgs& a) {
    TrainConfig cfg = resolve_config(sh);
    if (a.threshold) cfg.eval.threshold = *a.threshold;
    cfg.validate();
    const fs::path dir = out_dir(sh);
    const auto ckpt = load_checkpoint(a.checkpoint);
    const VoxelGrid defective = read_volume(a.input);
    const VoxelGrid recon = infer(ckpt.model, defective, cfg.eval.threshold);
    const std::string stem = fs::path(a.input).stem().string();
    write_mha(recon, dir / (stem + "_reconstruction.mha"));
    write_mha(extract_defect(recon, defective, cfg.eval.extract), dir / (stem + "_implant.mha"));
    return kOk;
}

// --- evaluate ---------------------------------------------------------------

struct EvalArgs {
    std::vector<std::string> pred;
    std::vector<std::string> gt;
    std::string label = "eval";
};

int cmd_evaluate(const Shared& sh, const EvalArgs& a) {
    const TrainConfig cfg = resolve_config(sh);
    if (a.pred.size() != a.gt.size() || a.pred.empty()) {
        throw Error(ErrorKind::InvalidArgument, "--pred and --gt need the same nonzero number of files");
    }
    std::vector<MetricsReport> reports;
    for (std::size_t i = 0; i < a.pred.size(); ++i) {
        const VoxelGrid p = read_volume(a.pred[i]);
        const VoxelGrid g = read_volume(a.gt[i]);
        require_compatible(p.geometry(), g.geometry());
        MetricsReport r;
        try {
            r = evaluate_case(p, g, cfg.eval.metrics);
        } catch (const Error& e) {
            r.error = e.what();
        }
        r.case_id = fs::path(a.pred[i]).stem().string();
        reports.push_back(std::move(r));
    }
    write_reports(out_dir(sh), "metrics", {{a.label, reports}});
    const auto s = summarize(reports);
    std::printf("cases %zu  dsc mean %.4f  bdsc mean %.4f  hd95 mean %.3f mm\n", s.cases, s.dsc.mean, s.bdsc.mean,
                s.hd95_mm.mean);
    return kOk;
}

// --- ablation ---------------------------------------------------------------

struct AblationArgs {
    TrainArgs train;
    int seeds = 1;
};

int cmd_ablation(const Shared& sh, const AblationArgs& a) {
    TrainConfig cfg = resolve_config(sh);
    apply(cfg, a.train);
    cfg.validate();
    const fs::path dir = out_dir(sh);
    std::vector<std::uint64_t> seeds{cfg.base_seed};
    for (int k = 1; k < a.seeds; ++k) seeds.push_back(derive(cfg.base_seed, {tag("ablation"), std::uint64_t(k)}));
    const auto arms = run_ablation(cfg, seeds, [&](const std::string& msg) {
        if (!a.train.quiet) std::cerr << msg << '\n';
    });
    std::vector<MetricsReport> d, nd;
    std::vector<std::pair<std::string, std::vector<MetricsReport>>> per_seed;
    for (const auto& arm : arms) {
        auto& pooled = arm.label == "D" ? d : nd;
        pooled.insert(pooled.end(), arm.reports.begin(), arm.reports.end());
        per_seed.emplace_back(arm.label + "@" + std::to_string(arm.seed), arm.reports);
    }
    write_reports(dir, "ablation_per_seed", per_seed);
    write_reports(dir, "ablation", {{"D", d}, {"ND", nd}});
    const auto sd = summarize(d), snd = summarize(nd);
    std::printf("D  dsc mean %.4f median %.4f\nND dsc mean %.4f median %.4f\n", sd.dsc.mean, sd.dsc.median,
                snd.dsc.mean, snd.dsc.median);
    return kOk;
}

// --- gradcheck --------------------------------------------------------------

int cmd_gradcheck(const Shared& sh) {
    GradCheckOptions opts;
    if (sh.seed) opts.seed = *sh.seed;
    const auto results = run_gradcheck_suite(opts);
    double worst = 0.0;
    bool ok = true;
    for (const auto& r : results) {
        char line[160];
        std::snprintf(line, sizeof line, "%-24s max_rel_error %.3e  tol %.0e  entries %lld  %s\n", r.name.c_str(),
                      r.max_rel_error, r.tolerance, static_cast<long long>(r.entries_checked),
                      r.passed() ? "ok" : "FAIL");
        std::cout << line;
        worst = std::max(worst, r.max_rel_error);
        ok = ok && r.passed();
    }
    char line[64];
    std::snprintf(line, sizeof line, "max relative error %.3e\n", worst);
    std::cout << line << std::flush;
    return ok ? kOk : kNumeric;
}

int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::NonFiniteGradient: return kNumeric;
        case ErrorKind::InvalidArgument: return kUsage;
        default: return kData;
    }
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Cranial defect reconstruction with masked shape autoencoders"};
    app.require_subcommand(1);
    Shared sh;

    auto* synth = app.add_subcommand("synthesize", "Write defective/defect case pairs from phantoms or skull files");
    SynthArgs sa;
    add_shared(synth, sh);
    synth->add_option("--phantoms", sa.phantoms, "Generate N phantom skulls (also written out)");
    synth->add_option("--input", sa.inputs, "Healthy skull volumes (.mha or raw .bin/.json)");
    synth->add_option("--cases-per-skull", sa.cases_per_skull, "Cases drawn per skull")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    auto* pre = app.add_subcommand("preprocess", "Crop to content and resample, writing preproc.json");
    PreArgs pa;
    add_shared(pre, sh);
    pre->add_option("--input", pa.input, "Volume to preprocess")->required();
    pre->add_option("--margin", pa.margin, "Crop margin in voxels")->capture_default_str();
    pre->add_option("--dims", pa.dims, "Target dims x y z (default: config phantom dims)")->expected(3);
    pre->add_option("--restore", pa.restore, "Apply the inverse of this preproc.json instead");

    auto* tr = app.add_subcommand("train", "Train a model; writes model.json/.bin and train_log.jsonl");
    TrainArgs ta;
    auto add_train = [](CLI::App* sub, TrainArgs& t) {
        sub->add_option("--epochs", t.epochs, "Training epochs");
        sub->add_option("--phantoms", t.phantoms, "Number of training phantoms");
        sub->add_option("--dataset", t.dataset, "Directory of healthy .mha skulls instead of phantoms");
        sub->add_option("--checkpoint-every", t.checkpoint_every, "Checkpoint period in epochs (0: end only)");
        sub->add_flag("--quiet", t.quiet, "No per-epoch progress on stderr");
    };
    add_shared(tr, sh);
    add_train(tr, ta);

    auto* inf = app.add_subcommand("infer", "Reconstruct a defective skull and extract the implant");
    InferArgs ia;
    add_shared(inf, sh);
    inf->add_option("--checkpoint", ia.checkpoint, "Checkpoint stem or manifest")->required();
    inf->add_option("--input", ia.input, "Defective skull volume")->required()->check(CLI::ExistingFile);
    inf->add_option("--threshold", ia.threshold, "Probability threshold");

    auto* ev = app.add_subcommand("evaluate", "Score predicted defects against ground truth");
    EvalArgs ea;
    add_shared(ev, sh);
    ev->add_option("--pred", ea.pred, "Predicted defect volumes")->required();
    ev->add_option("--gt", ea.gt, "Ground-truth defect volumes, same order")->required();
    ev->add_option("--label", ea.label, "Row label in the summary CSV")->capture_default_str();

    auto* ab = app.add_subcommand("ablation", "Train deformable (D) and sharp-edged (ND) models and compare");
    AblationArgs aa;
    add_shared(ab, sh);
    add_train(ab, aa.train);
    ab->add_option("--seeds", aa.seeds, "Number of base seeds derived from --seed")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient checks of every op and the model");
    add_shared(gc, sh);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }

    try {
        if (sh.jobs > 0) omp_set_num_threads(sh.jobs);
        if (synth->parsed()) return cmd_synthesize(sh, sa);
        if (pre->parsed()) return cmd_preprocess(sh, pa);
        if (tr->parsed()) return cmd_train(sh, ta);
        if (inf->parsed()) return cmd_infer(sh, ia);
        if (ev->parsed()) return cmd_evaluate(sh, ea);
        if (ab->parsed()) return cmd_ablation(sh, aa);
        if (gc->parsed()) return cmd_gradcheck(sh);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    }
    return kUsage;
}

int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace cranial::cli
