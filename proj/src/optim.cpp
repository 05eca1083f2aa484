#include "cranial/optim.hpp"

#include <cmath>

#include "cranial/error.hpp"

namespace cranial {

void AdamWConfig::validate() const {
    if (!(lr > 0.0)) throw Error(ErrorKind::InvalidArgument, "lr must be > 0");
    if (!(weight_decay >= 0.0)) throw Error(ErrorKind::InvalidArgument, "weight_decay must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "betas must lie in [0, 1)");
    }
    if (!(eps > 0.0)) throw Error(ErrorKind::InvalidArgument, "eps must be > 0");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw Error(ErrorKind::InvalidArgument, "gamma must lie in (0, 1]");
}

nlohmann::json to_json(const AdamWConfig& c) {
    return {{"lr", c.lr},       {"weight_decay", c.weight_decay}, {"beta1", c.beta1},
            {"beta2", c.beta2}, {"eps", c.eps},                   {"gamma", c.gamma}};
}

AdamWConfig adamw_config_from_json(const nlohmann::json& j, AdamWConfig c) {
    c.lr = j.value("lr", c.lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
    c.gamma = j.value("gamma", c.gamma);
    c.validate();
    return c;
}

double lr_at_epoch(const AdamWConfig& cfg, int epoch) {
    if (epoch < 0) throw Error(ErrorKind::InvalidArgument, "epoch must be >= 0");
    return cfg.lr * std::pow(cfg.gamma, epoch);
}

AdamW::AdamW(const AdamWConfig& cfg, const std::vector<NamedParam>& params) : cfg_(cfg) {
    cfg_.validate();
    for (const auto& p : params) {
        m_.emplace_back(static_cast<std::size_t>(p.var.value().numel()), 0.0);
        v_.emplace_back(static_cast<std::size_t>(p.var.value().numel()), 0.0);
    }
}

void AdamW::step(std::vector<NamedParam>& params, double lr) {
    if (params.size() != m_.size()) throw Error(ErrorKind::ShapeMismatch, "optimizer built for other parameters");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& g = params[i].var.grad();
        if (g.empty()) continue;
        if (g.numel() != static_cast<std::int64_t>(m_[i].size())) {
            throw Error(ErrorKind::ShapeMismatch, "gradient size changed for " + params[i].name);
        }
        for (double v : g.data()) {
            if (!std::isfinite(v)) {
                throw Error(ErrorKind::NonFiniteGradient, "non-finite gradient in " + params[i].name + " at step " +
                                                              std::to_string(step_ + 1));
            }
        }
    }
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto w = params[i].var.value().data();
        const auto& gt = params[i].var.grad();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t k = 0; k < w.size(); ++k) {
            const double g = gt.empty() ? 0.0 : gt.data()[k];
            m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g;
            v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g * g;
            const double m_hat = m[k] / bc1;
            const double v_hat = v[k] / bc2;
            w[k] -= lr * (m_hat / (std::sqrt(v_hat) + cfg_.eps) + cfg_.weight_decay * w[k]);
        }
    }
}

}  // namespace cranial
