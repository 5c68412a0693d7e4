#pragma once

#include <functional>
#include <span>
#include <vector>

#include "chunkalign/tensor.hpp"

namespace chunkalign::num {

// Forward kernels are pure functions of their inputs; each has an explicit
// analytic backward rule below. The op tape (tape.hpp) composes these rules
// in reverse order of recording; there is no symbolic differentiation.

Tensor2D matmul(const Tensor2D& a, const Tensor2D& b);
// dC -> (dA += dC*B^T, dB += A^T*dC)
void matmul_backward(const Tensor2D& a, const Tensor2D& b, const Tensor2D& d_out,
                     Tensor2D& d_a, Tensor2D& d_b);

// C = A * B^T (rows of B are the right-hand vectors).
Tensor2D matmul_nt(const Tensor2D& a, const Tensor2D& b);
void matmul_nt_backward(const Tensor2D& a, const Tensor2D& b, const Tensor2D& d_out,
                        Tensor2D& d_a, Tensor2D& d_b);

// Row-wise softmax, stabilized by row-max subtraction. mask, when non-null,
// is a rows*cols byte matrix; masked-out entries get probability exactly 0
// and only unmasked entries participate in the normalization.
Tensor2D softmax_rows(const Tensor2D& x, const std::vector<uint8_t>* mask = nullptr);
// Needs only the forward output y: dX = (dY - rowsum(dY .* Y)) .* Y
Tensor2D softmax_rows_backward(const Tensor2D& y, const Tensor2D& d_out);

Tensor2D layer_norm(const Tensor2D& x, std::span<const double> gain,
                    std::span<const double> bias, double eps);
void layer_norm_backward(const Tensor2D& x, std::span<const double> gain, double eps,
                         const Tensor2D& d_out, Tensor2D& d_x, std::span<double> d_gain,
                         std::span<double> d_bias);

// GELU, tanh approximation: 0.5*x*(1 + tanh(sqrt(2/pi)*(x + 0.044715*x^3))).
Tensor2D gelu(const Tensor2D& x);
Tensor2D gelu_backward(const Tensor2D& x, const Tensor2D& d_out);

Tensor2D l2_normalize_rows(const Tensor2D& x);
Tensor2D l2_normalize_rows_backward(const Tensor2D& x, const Tensor2D& d_out);

// Mean of rows [row_start, row_end).
std::vector<double> mean_rows(const Tensor2D& x, int row_start, int row_end);

// Scalar-valued differentiable map: value plus analytic gradient w.r.t. x.
struct ScalarGrad {
    double value = 0.0;
    Tensor2D grad;
};
using ScalarGradFn = std::function<ScalarGrad(const Tensor2D&)>;

// Central-difference check of the map's analytic gradient at x. Returns the
// max over coordinates of |analytic - numeric| / max(1, |analytic|).
double grad_check(const ScalarGradFn& f, const Tensor2D& x, double step);

}  // namespace chunkalign::num
