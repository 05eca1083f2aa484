#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cranial/metrics.hpp"
#include "cranial/model.hpp"
#include "cranial/morphology.hpp"
#include "cranial/optim.hpp"
#include "cranial/phantom.hpp"
#include "cranial/synth.hpp"

namespace cranial {

/// Where healthy skulls come from: a directory of .mha volumes (sorted by
/// file name, normalized to the phantom dims when they differ) or, when
/// dataset_dir is empty, seeded phantoms.
struct DataConfig {
    std::filesystem::path dataset_dir;
    PhantomConfig phantom;
    int phantom_count = 200;
    int heldout_count = 20;
    std::int64_t normalize_margin_vox = 2;
};

/// Evaluation settings. The extraction defaults differ from extract_defect's
/// own: desk-scale phantom shells are one to two voxels thick, so an opening
/// would erase every defect.
struct EvalConfig {
    double threshold = 0.5;
    ExtractOptions extract{0, 10};
    MetricOptions metrics;
};

struct TrainConfig {
    DataConfig data;
    SynthConfig synth;
    ModelConfig model;
    AdamWConfig optim;
    EvalConfig eval;
    int epochs = 50;
    int batch_size = 1;
    std::uint64_t base_seed = 42;
    int checkpoint_every = 0;  // 0: only at the end
    std::filesystem::path checkpoint_stem;  // empty: no checkpoints
    std::filesystem::path log_path;         // empty: no log file
    /// Synthesize the next batch on a worker thread while the current step
    /// runs. Results are identical either way.
    bool prefetch = true;

    void validate() const;
};

/// Sections synth, model, optim, data, metrics plus a top-level "seed".
/// Training-loop keys (epochs, batch_size, checkpoint_every, prefetch) live
/// in "optim"; threshold and extraction settings in "metrics".
nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});
TrainConfig load_train_config(const std::filesystem::path& path);

/// Combined hash of the full configuration (16 hex digits).
std::string config_hash(const TrainConfig& c);

std::vector<VoxelGrid> load_training_skulls(const TrainConfig& cfg);
/// Held-out phantoms use seeds disjoint from the training set.
std::vector<VoxelGrid> load_heldout_skulls(const TrainConfig& cfg);

/// Seed of the defect drawn for `case_index` in `epoch` (1-based).
std::uint64_t case_seed(std::uint64_t base_seed, int epoch, std::int64_t case_index);

struct EpochLog {
    int epoch = 0;
    double mean_loss = 0.0;
    double lr = 0.0;
    double wall_ms = 0.0;
};

nlohmann::json to_json(const EpochLog& e);

struct TrainResult {
    MicroUNet model;
    AdamW optim;
    std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Self-supervised loop: every step synthesizes a fresh defect for each skull
/// in the batch, feeds the defective skull and regresses the full healthy
/// skull under soft Dice. Throws NonFiniteGradient with epoch and step.
TrainResult train(const TrainConfig& cfg, const std::vector<VoxelGrid>& skulls, const EpochCallback& on_epoch = {});
TrainResult train(const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Voxel grid as a (1, 1, z, y, x) tensor of 0/1 values.
Tensor to_tensor(const VoxelGrid& g);

/// Probability >= threshold becomes foreground; geometry is copied from the input.
VoxelGrid infer(const MicroUNet& model, const VoxelGrid& defective, double threshold = 0.5);

struct EvalCase {
    std::string id;
    VoxelGrid defective;
    VoxelGrid defect_gt;
    std::uint64_t seed = 0;
    std::string config_hash;
};

/// Defects synthesized on the held-out skulls with the given synthesis config.
std::vector<EvalCase> make_eval_cases(const std::vector<VoxelGrid>& skulls, const SynthConfig& synth,
                                      std::uint64_t base_seed);

/// Scores given reconstructions. Per-case failures land in the report's error field.
std::vector<MetricsReport> evaluate_reconstructions(const std::vector<EvalCase>& cases,
                                                    const std::vector<VoxelGrid>& reconstructions,
                                                    const EvalConfig& cfg);

std::vector<MetricsReport> evaluate_model(const MicroUNet& model, const std::vector<EvalCase>& cases,
                                          const EvalConfig& cfg);

struct AblationArm {
    std::string label;  // "D" or "ND"
    std::uint64_t seed = 0;
    std::vector<MetricsReport> reports;
    std::vector<EpochLog> log;
};

/// For each seed trains a deformable-masking and a sharp-edged model from the
/// same initialization and data, and evaluates both on the same held-out
/// cases synthesized with deformable masking.
std::vector<AblationArm> run_ablation(const TrainConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                      const std::function<void(const std::string&)>& progress = {});

}  // namespace cranial
