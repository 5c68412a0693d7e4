#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "chunkalign/kernels.hpp"
#include "chunkalign/tensor.hpp"

namespace chunkalign::num {

using VarId = int;

// Records every op of one training step and replays the per-op analytic
// gradient rules (kernels.hpp) in reverse creation order. Creation order is
// a valid topological order because an op can only consume already-created
// ids. One tape per training step, confined to one thread.
class Tape {
public:
    // Value that gradients never flow into (input activations, teacher rows).
    VarId constant(Tensor2D v);
    // Parameter node; its gradient is readable after backward().
    VarId leaf(Tensor2D v);

    const Tensor2D& value(VarId id) const { return nodes_[size_t(id)].value; }
    // Zero tensor of the node's shape if backward never reached it.
    Tensor2D grad(VarId id) const;

    VarId matmul(VarId a, VarId b);
    VarId matmul_nt(VarId a, VarId b);  // A * B^T
    VarId add(VarId a, VarId b);
    VarId scale(VarId x, double s);
    VarId slice_rows(VarId x, int r0, int r1);
    VarId slice_cols(VarId x, int c0, int c1);
    VarId concat_rows(std::span<const VarId> parts);
    VarId concat_cols(std::span<const VarId> parts);
    VarId gather_rows(VarId table, std::vector<int> ids);
    VarId layer_norm(VarId x, VarId gain, VarId bias, double eps);
    VarId gelu(VarId x);
    VarId softmax_rows(VarId x, std::shared_ptr<const std::vector<uint8_t>> mask = nullptr);
    VarId mean_over_rows(VarId x, std::vector<int> row_ids);  // 1 x cols
    VarId l2_normalize_rows(VarId x);

    // Hook for module-specific ops (RoPE, losses): the callback receives the
    // upstream gradient and returns the gradient w.r.t. the single input.
    using UnaryBackward = std::function<Tensor2D(const Tensor2D& d_out)>;
    VarId custom_unary(VarId in, Tensor2D out_value, UnaryBackward back);

    // root must be 1x1.
    void backward(VarId root);

    size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor2D value;
        Tensor2D grad;  // allocated on first accumulation
        bool differentiable = true;
        std::function<void(Tape&)> back;  // empty for leaves/constants
    };

    VarId push(Tensor2D value, bool differentiable, std::function<void(Tape&)> back);
    Tensor2D& grad_buf(VarId id);
    bool grad_reached(VarId id) const;
    void accumulate(VarId id, const Tensor2D& g);

    std::vector<Node> nodes_;
};

}  // namespace chunkalign::num
