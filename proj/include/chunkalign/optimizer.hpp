#pragma once

#include <limits>
#include <vector>

#include "chunkalign/tensor.hpp"

namespace chunkalign::distill {

// AdamW plus Adafactor-style update clipping: the effective learning rate of
// each parameter tensor is lr / max(1, RMS(g^2/v_hat) / clip_threshold).
// With clip_threshold = +inf this is exactly AdamW. The paper names the
// optimizer but not its constants; these defaults are ours.
struct OptimizerConfig {
    double beta1 = 0.9;
    double beta2 = 0.98;
    double eps = 1e-6;
    double clip_threshold = 1.0;
};

class StableAdamW {
public:
    explicit StableAdamW(OptimizerConfig config = {}) : config_(config) {}

    // Applies one update. Parameter/gradient lists must be positionally
    // aligned and keep their shapes across calls; moments are allocated on
    // first use.
    void step(const std::vector<Tensor2D*>& params, const std::vector<const Tensor2D*>& grads,
              double lr, double weight_decay);

    long step_count() const { return step_; }
    const std::vector<Tensor2D>& first_moments() const { return m_; }
    const std::vector<Tensor2D>& second_moments() const { return v_; }
    const OptimizerConfig& config() const { return config_; }

    // For the optimizer-state sidecar.
    void restore(long step, std::vector<Tensor2D> m, std::vector<Tensor2D> v);

private:
    OptimizerConfig config_;
    std::vector<Tensor2D> m_;
    std::vector<Tensor2D> v_;
    long step_ = 0;
};

constexpr double kNoClip = std::numeric_limits<double>::infinity();

}  // namespace chunkalign::distill
