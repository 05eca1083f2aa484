#include "cranial/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <future>
#include <optional>

#include "cranial/checkpoint.hpp"
#include "cranial/error.hpp"
#include "cranial/preprocess.hpp"
#include "cranial/rng.hpp"

namespace cranial {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
    if (epochs < 1) throw Error(ErrorKind::InvalidArgument, "epochs must be >= 1");
    if (batch_size < 1) throw Error(ErrorKind::InvalidArgument, "batch_size must be >= 1");
    if (checkpoint_every < 0) throw Error(ErrorKind::InvalidArgument, "checkpoint_every must be >= 0");
    if (!(eval.threshold > 0.0 && eval.threshold < 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "threshold must lie in (0, 1)");
    }
    if (data.dataset_dir.empty() && data.phantom_count < 1) {
        throw Error(ErrorKind::InvalidArgument, "phantom_count must be >= 1");
    }
    if (data.heldout_count < 0) throw Error(ErrorKind::InvalidArgument, "heldout_count must be >= 0");
    synth.validate();
    model.validate();
    optim.validate();
    data.phantom.validate();
    for (auto d : data.phantom.dims) {
        if (d % model.spatial_divisor() != 0) {
            throw Error(ErrorKind::DimensionError, "dims must be divisible by " +
                                                       std::to_string(model.spatial_divisor()) + " for this model");
        }
    }
}

nlohmann::json to_json(const TrainConfig& c) {
    nlohmann::json optim = to_json(c.optim);
    optim["epochs"] = c.epochs;
    optim["batch_size"] = c.batch_size;
    optim["checkpoint_every"] = c.checkpoint_every;
    optim["prefetch"] = c.prefetch;
    return {{"seed", c.base_seed},
            {"synth", to_json(c.synth)},
            {"model", to_json(c.model)},
            {"optim", optim},
            {"data",
             {{"dataset_dir", c.data.dataset_dir.string()},
              {"phantom", to_json(c.data.phantom)},
              {"phantom_count", c.data.phantom_count},
              {"heldout_count", c.data.heldout_count},
              {"normalize_margin_vox", c.data.normalize_margin_vox},
              {"checkpoint", c.checkpoint_stem.string()},
              {"log", c.log_path.string()}}},
            {"metrics",
             {{"threshold", c.eval.threshold},
              {"open_radius", c.eval.extract.open_radius},
              {"min_component_vox", c.eval.extract.min_component_vox},
              {"bdsc_width_mm", c.eval.metrics.bdsc_width_mm}}}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
    try {
        c.base_seed = j.value("seed", c.base_seed);
        if (j.contains("synth")) c.synth = synth_config_from_json(j.at("synth"), c.synth);
        if (j.contains("model")) c.model = model_config_from_json(j.at("model"), c.model);
        if (j.contains("optim")) {
            const auto& o = j.at("optim");
            c.optim = adamw_config_from_json(o, c.optim);
            c.epochs = o.value("epochs", c.epochs);
            c.batch_size = o.value("batch_size", c.batch_size);
            c.checkpoint_every = o.value("checkpoint_every", c.checkpoint_every);
            c.prefetch = o.value("prefetch", c.prefetch);
        }
        if (j.contains("data")) {
            const auto& d = j.at("data");
            c.data.dataset_dir = d.value("dataset_dir", c.data.dataset_dir.string());
            if (d.contains("phantom")) c.data.phantom = phantom_config_from_json(d.at("phantom"), c.data.phantom);
            c.data.phantom_count = d.value("phantom_count", c.data.phantom_count);
            c.data.heldout_count = d.value("heldout_count", c.data.heldout_count);
            c.data.normalize_margin_vox = d.value("normalize_margin_vox", c.data.normalize_margin_vox);
            c.checkpoint_stem = d.value("checkpoint", c.checkpoint_stem.string());
            c.log_path = d.value("log", c.log_path.string());
        }
        if (j.contains("metrics")) {
            const auto& m = j.at("metrics");
            c.eval.threshold = m.value("threshold", c.eval.threshold);
            c.eval.extract.open_radius = m.value("open_radius", c.eval.extract.open_radius);
            c.eval.extract.min_component_vox = m.value("min_component_vox", c.eval.extract.min_component_vox);
            c.eval.metrics.bdsc_width_mm = m.value("bdsc_width_mm", c.eval.metrics.bdsc_width_mm);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::FormatError, std::string("bad config: ") + e.what());
    }
    return c;
}

TrainConfig load_train_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open config " + path.string());
    try {
        return train_config_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::FormatError, "config " + path.string() + ": " + e.what());
    }
}

std::string config_hash(const TrainConfig& c) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(tag(to_json(c).dump())));
    return buf;
}

namespace {

// Exceptions must not leave an OpenMP region; loops park them here.
void rethrow_first(const std::vector<std::exception_ptr>& errors) {
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

std::vector<VoxelGrid> load_directory(const TrainConfig& cfg) {
    std::vector<fs::path> files;
    if (!fs::is_directory(cfg.data.dataset_dir)) {
        throw Error(ErrorKind::IoError, "dataset directory not found: " + cfg.data.dataset_dir.string());
    }
    for (const auto& e : fs::directory_iterator(cfg.data.dataset_dir)) {
        if (e.is_regular_file() && e.path().extension() == ".mha") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw Error(ErrorKind::EmptyVolume, "no .mha skulls in " + cfg.data.dataset_dir.string());
    std::vector<VoxelGrid> out;
    for (const auto& f : files) {
        VoxelGrid g = read_volume(f);
        if (g.dims() != cfg.data.phantom.dims) g = normalize(g, cfg.data.normalize_margin_vox, cfg.data.phantom.dims).first;
        out.push_back(std::move(g));
    }
    return out;
}

std::vector<VoxelGrid> phantoms(const TrainConfig& cfg, std::uint64_t set_tag, int count) {
    std::vector<VoxelGrid> out(static_cast<std::size_t>(count));
    std::vector<std::exception_ptr> errors(out.size());
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < count; ++i) {
        try {
            out[static_cast<std::size_t>(i)] =
                generate_phantom(cfg.data.phantom, derive(cfg.base_seed, {set_tag, std::uint64_t(i)}));
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    rethrow_first(errors);
    return out;
}

}  // namespace

std::vector<VoxelGrid> load_training_skulls(const TrainConfig& cfg) {
    if (!cfg.data.dataset_dir.empty()) return load_directory(cfg);
    return phantoms(cfg, tag("train-phantom"), cfg.data.phantom_count);
}

std::vector<VoxelGrid> load_heldout_skulls(const TrainConfig& cfg) {
    return phantoms(cfg, tag("heldout-phantom"), cfg.data.heldout_count);
}

std::uint64_t case_seed(std::uint64_t base_seed, int epoch, std::int64_t case_index) {
    return derive(base_seed, {tag("case"), static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(case_index)});
}

nlohmann::json to_json(const EpochLog& e) {
    return {{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"lr", e.lr}, {"wall_ms", e.wall_ms}};
}

Tensor to_tensor(const VoxelGrid& g) {
    const auto& d = g.dims();
    Tensor t(Shape{1, 1, d[2], d[1], d[0]});
    for (std::int64_t i = 0; i < g.size(); ++i) t[i] = g.get(i) ? 1.0 : 0.0;
    return t;
}

namespace {

struct Batch {
    Tensor input;
    Tensor target;
};

Batch make_batch(const std::vector<VoxelGrid>& skulls, const std::vector<std::int64_t>& indices,
                 const SynthConfig& synth, std::uint64_t base_seed, int epoch) {
    const auto& d = skulls[static_cast<std::size_t>(indices.front())].dims();
    const auto n = static_cast<std::int64_t>(indices.size());
    const Shape s{n, 1, d[2], d[1], d[0]};
    Batch b{Tensor(s), Tensor(s)};
    const std::int64_t vox = s.spatial();
    for (std::int64_t k = 0; k < n; ++k) {
        const auto idx = indices[static_cast<std::size_t>(k)];
        const VoxelGrid& skull = skulls[static_cast<std::size_t>(idx)];
        if (skull.dims() != d) throw Error(ErrorKind::ShapeMismatch, "training skulls differ in dims");
        const CasePair c = synthesize_case(skull, synth, case_seed(base_seed, epoch, idx));
        for (std::int64_t i = 0; i < vox; ++i) {
            b.input[k * vox + i] = c.defective.get(i) ? 1.0 : 0.0;
            b.target[k * vox + i] = skull.get(i) ? 1.0 : 0.0;
        }
    }
    return b;
}

// Deterministic per-epoch visiting order.
std::vector<std::int64_t> epoch_order(std::int64_t count, std::uint64_t base_seed, int epoch) {
    std::vector<std::int64_t> order(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng rng(derive(base_seed, {tag("order"), static_cast<std::uint64_t>(epoch)}));
    for (std::int64_t i = count - 1; i > 0; --i) {
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(rng.uniform_int(0, i))]);
    }
    return order;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const std::vector<VoxelGrid>& skulls, const EpochCallback& on_epoch) {
    cfg.validate();
    if (skulls.empty()) throw Error(ErrorKind::EmptyVolume, "no training skulls");
    for (auto d : skulls.front().dims()) {
        if (d % cfg.model.spatial_divisor() != 0) {
            throw Error(ErrorKind::ShapeMismatch, "skull dims must be divisible by " +
                                                      std::to_string(cfg.model.spatial_divisor()));
        }
    }
    MicroUNet model(cfg.model, derive(cfg.base_seed, {tag("model")}));
    AdamW optim(cfg.optim, model.parameters());
    std::vector<EpochLog> log;
    std::ofstream log_file;
    if (!cfg.log_path.empty()) {
        log_file.open(cfg.log_path, std::ios::trunc);
        if (!log_file) throw Error(ErrorKind::IoError, "cannot write " + cfg.log_path.string());
    }
    const std::string hash = config_hash(cfg);
    const auto count = static_cast<std::int64_t>(skulls.size());

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = lr_at_epoch(cfg.optim, epoch - 1);
        const auto order = epoch_order(count, cfg.base_seed, epoch);
        std::vector<std::vector<std::int64_t>> batches;
        for (std::int64_t i = 0; i < count; i += cfg.batch_size) {
            batches.emplace_back(order.begin() + i, order.begin() + std::min(count, i + cfg.batch_size));
        }
        auto build = [&](std::size_t b) { return make_batch(skulls, batches[b], cfg.synth, cfg.base_seed, epoch); };

        double loss_sum = 0.0;
        std::future<Batch> next;
        if (cfg.prefetch) next = std::async(std::launch::async, build, std::size_t{0});
        for (std::size_t b = 0; b < batches.size(); ++b) {
            Batch batch = cfg.prefetch ? next.get() : build(b);
            if (cfg.prefetch && b + 1 < batches.size()) next = std::async(std::launch::async, build, b + 1);

            model.zero_grad();
            Var loss = soft_dice_loss(model.forward(constant(std::move(batch.input))), batch.target);
            backward(loss);
            try {
                optim.step(model.parameters(), lr);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::NonFiniteGradient) throw;
                if (next.valid()) next.wait();
                throw Error(ErrorKind::NonFiniteGradient,
                            std::string(e.what()) + " (epoch " + std::to_string(epoch) + ", batch " +
                                std::to_string(b) + ")");
            }
            loss_sum += loss.value()[0];
        }

        EpochLog entry{epoch, loss_sum / static_cast<double>(batches.size()), lr,
                       std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count()};
        log.push_back(entry);
        if (log_file) log_file << to_json(entry).dump() << '\n' << std::flush;
        if (on_epoch) on_epoch(entry);

        const bool periodic = cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0;
        if (!cfg.checkpoint_stem.empty() && (periodic || epoch == cfg.epochs)) {
            save_checkpoint(cfg.checkpoint_stem, model, optim, {epoch, derive(cfg.base_seed, {tag("model")}), hash});
        }
    }
    return {std::move(model), std::move(optim), std::move(log)};
}

TrainResult train(const TrainConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    return train(cfg, load_training_skulls(cfg), on_epoch);
}

VoxelGrid infer(const MicroUNet& model, const VoxelGrid& defective, double threshold) {
    const Var prob = model.forward(constant(to_tensor(defective)));
    VoxelGrid out(defective.geometry());
    const auto p = prob.value().data();
    for (std::int64_t i = 0; i < out.size(); ++i) {
        if (p[static_cast<std::size_t>(i)] >= threshold) out.set(i, true);
    }
    return out;
}

std::vector<EvalCase> make_eval_cases(const std::vector<VoxelGrid>& skulls, const SynthConfig& synth,
                                      std::uint64_t base_seed) {
    std::vector<EvalCase> out(skulls.size());
    std::vector<std::exception_ptr> errors(skulls.size());
    const std::string hash = config_hash(synth);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(skulls.size()); ++i) {
        const std::uint64_t seed = derive(base_seed, {tag("heldout-case"), static_cast<std::uint64_t>(i)});
        try {
            CasePair c = synthesize_case(skulls[static_cast<std::size_t>(i)], synth, seed);
            out[static_cast<std::size_t>(i)] =
                EvalCase{"heldout_" + std::to_string(i), std::move(c.defective), std::move(c.defect_gt), seed, hash};
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    rethrow_first(errors);
    return out;
}

std::vector<MetricsReport> evaluate_reconstructions(const std::vector<EvalCase>& cases,
                                                    const std::vector<VoxelGrid>& reconstructions,
                                                    const EvalConfig& cfg) {
    if (cases.empty()) throw Error(ErrorKind::InvalidArgument, "no cases to evaluate");
    if (cases.size() != reconstructions.size()) {
        throw Error(ErrorKind::InvalidArgument, "one reconstruction per case expected");
    }
    std::vector<MetricsReport> out(cases.size());
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(cases.size()); ++i) {
        const auto& c = cases[static_cast<std::size_t>(i)];
        MetricsReport r;
        try {
            const VoxelGrid pred = extract_defect(reconstructions[static_cast<std::size_t>(i)], c.defective, cfg.extract);
            r = evaluate_case(pred, c.defect_gt, cfg.metrics);
        } catch (const std::exception& e) {
            r = MetricsReport{};
            r.error = e.what();
        }
        r.case_id = c.id;
        r.seed = c.seed;
        r.config_hash = c.config_hash;
        out[static_cast<std::size_t>(i)] = std::move(r);
    }
    return out;
}

std::vector<MetricsReport> evaluate_model(const MicroUNet& model, const std::vector<EvalCase>& cases,
                                          const EvalConfig& cfg) {
    std::vector<VoxelGrid> recon;
    std::vector<std::string> failures(cases.size());
    recon.reserve(cases.size());
    for (std::size_t i = 0; i < cases.size(); ++i) {
        try {
            recon.push_back(infer(model, cases[i].defective, cfg.threshold));
        } catch (const Error& e) {
            failures[i] = e.what();
            recon.push_back(cases[i].defective);
        }
    }
    auto reports = evaluate_reconstructions(cases, recon, cfg);
    for (std::size_t i = 0; i < cases.size(); ++i) {
        if (!failures[i].empty()) {
            reports[i] = MetricsReport{cases[i].id, 0.0, 0.0, 0.0, false, cases[i].seed, cases[i].config_hash, failures[i]};
        }
    }
    return reports;
}

std::vector<AblationArm> run_ablation(const TrainConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                      const std::function<void(const std::string&)>& progress) {
    if (seeds.empty()) throw Error(ErrorKind::InvalidArgument, "ablation needs at least one seed");
    std::vector<AblationArm> arms;
    for (auto seed : seeds) {
        TrainConfig base = cfg;
        base.base_seed = seed;
        base.checkpoint_stem.clear();
        base.log_path.clear();
        const auto skulls = load_training_skulls(base);
        SynthConfig test_synth = cfg.synth;
        test_synth.deform_enabled = true;
        const auto cases = make_eval_cases(load_heldout_skulls(base), test_synth, seed);
        for (bool deform : {true, false}) {
            TrainConfig arm_cfg = base;
            arm_cfg.synth.deform_enabled = deform;
            const std::string label = deform ? "D" : "ND";
            if (progress) progress("training " + label + " seed " + std::to_string(seed));
            auto result = train(arm_cfg, skulls, [&](const EpochLog& e) {
                if (progress) {
                    progress(label + " seed " + std::to_string(seed) + " epoch " + std::to_string(e.epoch) +
                             " loss " + std::to_string(e.mean_loss));
                }
            });
            arms.push_back({label, seed, evaluate_model(result.model, cases, arm_cfg.eval), std::move(result.log)});
        }
    }
    return arms;
}

}  // namespace cranial
