#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "cranial/model.hpp"

namespace cranial {

struct AdamWConfig {
    double lr = 0.001;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double gamma = 0.995;  // per-epoch exponential decay of lr

    void validate() const;
};

nlohmann::json to_json(const AdamWConfig& c);
AdamWConfig adamw_config_from_json(const nlohmann::json& j, AdamWConfig base = {});

/// lr * gamma^epoch.
double lr_at_epoch(const AdamWConfig& cfg, int epoch);

/// AdamW with decoupled weight decay:
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
///   w <- w - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * w)
/// with bias-corrected m_hat, v_hat.
class AdamW {
public:
    AdamW(const AdamWConfig& cfg, const std::vector<NamedParam>& params);

    /// Applies one update at learning rate `lr` using each parameter's
    /// current gradient (missing gradients count as zero). Throws
    /// NonFiniteGradient, leaving parameters and state untouched.
    void step(std::vector<NamedParam>& params, double lr);

    const AdamWConfig& config() const { return cfg_; }
    std::int64_t steps() const { return step_; }
    std::vector<std::vector<double>>& first_moments() { return m_; }
    std::vector<std::vector<double>>& second_moments() { return v_; }
    const std::vector<std::vector<double>>& first_moments() const { return m_; }
    const std::vector<std::vector<double>>& second_moments() const { return v_; }
    void set_steps(std::int64_t s) { step_ = s; }

private:
    AdamWConfig cfg_;
    std::int64_t step_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

}  // namespace cranial
