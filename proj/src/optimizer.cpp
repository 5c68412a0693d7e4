#include "chunkalign/optimizer.hpp"

#include <cmath>
#include <string>

#include "chunkalign/errors.hpp"

namespace chunkalign::distill {

void StableAdamW::step(const std::vector<Tensor2D*>& params,
                       const std::vector<const Tensor2D*>& grads, double lr,
                       double weight_decay) {
    if (params.size() != grads.size()) {
        throw DimensionError("optimizer: " + std::to_string(params.size()) + " params vs " +
                             std::to_string(grads.size()) + " grads");
    }
    if (lr < 0.0) throw ConfigError("optimizer: lr must be >= 0");
    if (m_.empty()) {
        for (const Tensor2D* p : params) {
            m_.emplace_back(p->rows, p->cols);
            v_.emplace_back(p->rows, p->cols);
        }
    }
    if (m_.size() != params.size()) {
        throw DimensionError("optimizer: state holds " + std::to_string(m_.size()) +
                             " tensors, got " + std::to_string(params.size()));
    }
    ++step_;
    const double bc1 = 1.0 - std::pow(config_.beta1, double(step_));
    const double bc2 = 1.0 - std::pow(config_.beta2, double(step_));

    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tensor2D& p = *params[pi];
        const Tensor2D& g = *grads[pi];
        if (!p.same_shape(g) || !p.same_shape(m_[pi])) {
            throw DimensionError("optimizer: param " + std::to_string(pi) + " shape " +
                                 p.shape_str() + " vs grad " + g.shape_str());
        }
        Tensor2D& m = m_[pi];
        Tensor2D& v = v_[pi];

        for (size_t i = 0; i < p.size(); ++i) {
            m.data[i] = config_.beta1 * m.data[i] + (1.0 - config_.beta1) * g.data[i];
            v.data[i] = config_.beta2 * v.data[i] + (1.0 - config_.beta2) * g.data[i] * g.data[i];
        }

        // Adafactor-style clipping: RMS over this tensor of g^2 / v_hat,
        // computed before the update; 0/0 coordinates contribute 0.
        double lr_eff = lr;
        if (std::isfinite(config_.clip_threshold)) {
            double sum = 0.0;
            for (size_t i = 0; i < p.size(); ++i) {
                const double vhat = v.data[i] / bc2;
                if (vhat > 0.0) sum += g.data[i] * g.data[i] / vhat;
            }
            const double rms = std::sqrt(sum / double(p.size()));
            lr_eff = lr / std::max(1.0, rms / config_.clip_threshold);
        }

        for (size_t i = 0; i < p.size(); ++i) {
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            p.data[i] -= lr_eff * (mhat / (std::sqrt(vhat) + config_.eps) +
                                   weight_decay * p.data[i]);
        }
    }
}

void StableAdamW::restore(long step, std::vector<Tensor2D> m, std::vector<Tensor2D> v) {
    if (m.size() != v.size()) {
        throw DimensionError("optimizer restore: m/v count mismatch");
    }
    step_ = step;
    m_ = std::move(m);
    v_ = std::move(v);
}

}  // namespace chunkalign::distill
