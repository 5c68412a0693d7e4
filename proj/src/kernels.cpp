#include "chunkalign/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "chunkalign/errors.hpp"

namespace chunkalign::num {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw DimensionError(msg);
}

}  // namespace

Tensor2D matmul(const Tensor2D& a, const Tensor2D& b) {
    require(a.cols == b.rows,
            "matmul: " + a.shape_str() + " incompatible with " + b.shape_str());
    Tensor2D c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = b.row(k);
            for (int j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

void matmul_backward(const Tensor2D& a, const Tensor2D& b, const Tensor2D& d_out,
                     Tensor2D& d_a, Tensor2D& d_b) {
    require(d_out.rows == a.rows && d_out.cols == b.cols,
            "matmul_backward: d_out " + d_out.shape_str() + " vs expected " +
                std::to_string(a.rows) + "x" + std::to_string(b.cols));
    // dA += dC * B^T
    for (int i = 0; i < a.rows; ++i) {
        const double* drow = d_out.row(i);
        double* darow = d_a.row(i);
        for (int k = 0; k < b.rows; ++k) {
            const double* brow = b.row(k);
            double acc = 0.0;
            for (int j = 0; j < b.cols; ++j) acc += drow[j] * brow[j];
            darow[k] += acc;
        }
    }
    // dB += A^T * dC
    for (int k = 0; k < a.cols; ++k) {
        double* dbrow = d_b.row(k);
        for (int i = 0; i < a.rows; ++i) {
            const double aik = a.at(i, k);
            if (aik == 0.0) continue;
            const double* drow = d_out.row(i);
            for (int j = 0; j < b.cols; ++j) dbrow[j] += aik * drow[j];
        }
    }
}

Tensor2D matmul_nt(const Tensor2D& a, const Tensor2D& b) {
    require(a.cols == b.cols,
            "matmul_nt: " + a.shape_str() + " incompatible with " + b.shape_str() + "^T");
    Tensor2D c(a.rows, b.rows);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (int j = 0; j < b.rows; ++j) {
            const double* brow = b.row(j);
            double acc = 0.0;
            for (int k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
            crow[j] = acc;
        }
    }
    return c;
}

void matmul_nt_backward(const Tensor2D& a, const Tensor2D& b, const Tensor2D& d_out,
                        Tensor2D& d_a, Tensor2D& d_b) {
    require(d_out.rows == a.rows && d_out.cols == b.rows,
            "matmul_nt_backward: d_out " + d_out.shape_str() + " vs expected " +
                std::to_string(a.rows) + "x" + std::to_string(b.rows));
    // C = A B^T: dA += dC * B, dB += dC^T * A
    for (int i = 0; i < a.rows; ++i) {
        const double* drow = d_out.row(i);
        double* darow = d_a.row(i);
        for (int j = 0; j < b.rows; ++j) {
            const double dij = drow[j];
            if (dij == 0.0) continue;
            const double* brow = b.row(j);
            for (int k = 0; k < a.cols; ++k) darow[k] += dij * brow[k];
        }
    }
    for (int i = 0; i < a.rows; ++i) {
        const double* drow = d_out.row(i);
        const double* arow = a.row(i);
        for (int j = 0; j < b.rows; ++j) {
            const double dij = drow[j];
            if (dij == 0.0) continue;
            double* dbrow = d_b.row(j);
            for (int k = 0; k < a.cols; ++k) dbrow[k] += dij * arow[k];
        }
    }
}

Tensor2D softmax_rows(const Tensor2D& x, const std::vector<uint8_t>* mask) {
    if (mask) {
        require(mask->size() == x.size(),
                "softmax_rows: mask length " + std::to_string(mask->size()) + " vs " +
                    x.shape_str());
    }
    Tensor2D y(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i) {
        const double* xrow = x.row(i);
        const uint8_t* mrow = mask ? mask->data() + size_t(i) * x.cols : nullptr;
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < x.cols; ++j) {
            if (mrow && !mrow[j]) continue;
            mx = std::max(mx, xrow[j]);
        }
        double* yrow = y.row(i);
        double sum = 0.0;
        for (int j = 0; j < x.cols; ++j) {
            if (mrow && !mrow[j]) {
                yrow[j] = 0.0;
                continue;
            }
            yrow[j] = std::exp(xrow[j] - mx);
            sum += yrow[j];
        }
        for (int j = 0; j < x.cols; ++j) yrow[j] /= sum;
    }
    return y;
}

Tensor2D softmax_rows_backward(const Tensor2D& y, const Tensor2D& d_out) {
    require(y.same_shape(d_out),
            "softmax_rows_backward: " + y.shape_str() + " vs " + d_out.shape_str());
    Tensor2D dx(y.rows, y.cols);
    for (int i = 0; i < y.rows; ++i) {
        const double* yrow = y.row(i);
        const double* drow = d_out.row(i);
        double dot = 0.0;
        for (int j = 0; j < y.cols; ++j) dot += yrow[j] * drow[j];
        double* dxrow = dx.row(i);
        for (int j = 0; j < y.cols; ++j) dxrow[j] = (drow[j] - dot) * yrow[j];
    }
    return dx;
}

Tensor2D layer_norm(const Tensor2D& x, std::span<const double> gain,
                    std::span<const double> bias, double eps) {
    require(int(gain.size()) == x.cols && int(bias.size()) == x.cols,
            "layer_norm: gain/bias length " + std::to_string(gain.size()) + "," +
                std::to_string(bias.size()) + " vs cols " + std::to_string(x.cols));
    if (eps <= 0.0) throw ConfigError("layer_norm: eps must be > 0");
    Tensor2D y(x.rows, x.cols);
    const double inv_n = 1.0 / x.cols;
    for (int i = 0; i < x.rows; ++i) {
        const double* xrow = x.row(i);
        double mean = 0.0;
        for (int j = 0; j < x.cols; ++j) mean += xrow[j];
        mean *= inv_n;
        double var = 0.0;
        for (int j = 0; j < x.cols; ++j) {
            const double d = xrow[j] - mean;
            var += d * d;
        }
        var *= inv_n;
        const double inv_std = 1.0 / std::sqrt(var + eps);
        double* yrow = y.row(i);
        for (int j = 0; j < x.cols; ++j) {
            yrow[j] = (xrow[j] - mean) * inv_std * gain[j] + bias[j];
        }
    }
    return y;
}

void layer_norm_backward(const Tensor2D& x, std::span<const double> gain, double eps,
                         const Tensor2D& d_out, Tensor2D& d_x, std::span<double> d_gain,
                         std::span<double> d_bias) {
    require(x.same_shape(d_out),
            "layer_norm_backward: " + x.shape_str() + " vs " + d_out.shape_str());
    const int n = x.cols;
    const double inv_n = 1.0 / n;
    for (int i = 0; i < x.rows; ++i) {
        const double* xrow = x.row(i);
        const double* drow = d_out.row(i);
        double mean = 0.0;
        for (int j = 0; j < n; ++j) mean += xrow[j];
        mean *= inv_n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) {
            const double d = xrow[j] - mean;
            var += d * d;
        }
        var *= inv_n;
        const double inv_std = 1.0 / std::sqrt(var + eps);

        // dL/dxhat_j = drow_j * gain_j; then the standard two-correction form.
        double sum_dxhat = 0.0;
        double sum_dxhat_xhat = 0.0;
        for (int j = 0; j < n; ++j) {
            const double xhat = (xrow[j] - mean) * inv_std;
            const double dxhat = drow[j] * gain[j];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
            d_gain[j] += drow[j] * xhat;
            d_bias[j] += drow[j];
        }
        double* dxrow = d_x.row(i);
        for (int j = 0; j < n; ++j) {
            const double xhat = (xrow[j] - mean) * inv_std;
            const double dxhat = drow[j] * gain[j];
            dxrow[j] += inv_std * (dxhat - inv_n * sum_dxhat - inv_n * xhat * sum_dxhat_xhat);
        }
    }
}

namespace {
// sqrt(2/pi) for the tanh form of GELU.
constexpr double kGeluSqrt2OverPi = 0.7978845608028654;
constexpr double kGeluCubicCoeff = 0.044715;
}  // namespace

Tensor2D gelu(const Tensor2D& x) {
    Tensor2D y(x.rows, x.cols);
    for (size_t i = 0; i < x.size(); ++i) {
        const double v = x.data[i];
        const double inner = kGeluSqrt2OverPi * (v + kGeluCubicCoeff * v * v * v);
        y.data[i] = 0.5 * v * (1.0 + std::tanh(inner));
    }
    return y;
}

Tensor2D gelu_backward(const Tensor2D& x, const Tensor2D& d_out) {
    if (!x.same_shape(d_out)) {
        throw DimensionError("gelu_backward: " + x.shape_str() + " vs " + d_out.shape_str());
    }
    Tensor2D dx(x.rows, x.cols);
    for (size_t i = 0; i < x.size(); ++i) {
        const double v = x.data[i];
        const double inner = kGeluSqrt2OverPi * (v + kGeluCubicCoeff * v * v * v);
        const double t = std::tanh(inner);
        const double sech2 = 1.0 - t * t;
        const double dinner = kGeluSqrt2OverPi * (1.0 + 3.0 * kGeluCubicCoeff * v * v);
        dx.data[i] = d_out.data[i] * (0.5 * (1.0 + t) + 0.5 * v * sech2 * dinner);
    }
    return dx;
}

Tensor2D l2_normalize_rows(const Tensor2D& x) {
    Tensor2D y(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i) {
        const double* xrow = x.row(i);
        double norm_sq = 0.0;
        for (int j = 0; j < x.cols; ++j) norm_sq += xrow[j] * xrow[j];
        if (norm_sq == 0.0) {
            throw DegenerateInputError("l2_normalize_rows: zero-norm row " + std::to_string(i));
        }
        const double inv = 1.0 / std::sqrt(norm_sq);
        double* yrow = y.row(i);
        for (int j = 0; j < x.cols; ++j) yrow[j] = xrow[j] * inv;
    }
    return y;
}

Tensor2D l2_normalize_rows_backward(const Tensor2D& x, const Tensor2D& d_out) {
    if (!x.same_shape(d_out)) {
        throw DimensionError("l2_normalize_rows_backward: " + x.shape_str() + " vs " +
                             d_out.shape_str());
    }
    Tensor2D dx(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i) {
        const double* xrow = x.row(i);
        const double* drow = d_out.row(i);
        double norm_sq = 0.0;
        double dot = 0.0;
        for (int j = 0; j < x.cols; ++j) {
            norm_sq += xrow[j] * xrow[j];
            dot += xrow[j] * drow[j];
        }
        const double inv = 1.0 / std::sqrt(norm_sq);
        const double inv3 = inv * inv * inv;
        double* dxrow = dx.row(i);
        for (int j = 0; j < x.cols; ++j) {
            dxrow[j] = drow[j] * inv - xrow[j] * dot * inv3;
        }
    }
    return dx;
}

std::vector<double> mean_rows(const Tensor2D& x, int row_start, int row_end) {
    if (!(0 <= row_start && row_start < row_end && row_end <= x.rows)) {
        throw DegenerateInputError("mean_rows: empty or out-of-range slice [" +
                                   std::to_string(row_start) + ", " + std::to_string(row_end) +
                                   ") of " + std::to_string(x.rows) + " rows");
    }
    std::vector<double> out(size_t(x.cols), 0.0);
    for (int i = row_start; i < row_end; ++i) {
        const double* xrow = x.row(i);
        for (int j = 0; j < x.cols; ++j) out[j] += xrow[j];
    }
    const double inv = 1.0 / (row_end - row_start);
    for (auto& v : out) v *= inv;
    return out;
}

double grad_check(const ScalarGradFn& f, const Tensor2D& x, double step) {
    if (step <= 0.0) throw ConfigError("grad_check: step must be > 0");
    const ScalarGrad at_x = f(x);
    if (!std::isfinite(at_x.value)) {
        throw OracleFailureError("grad_check: non-finite value at base point");
    }
    if (!at_x.grad.same_shape(x)) {
        throw DimensionError("grad_check: analytic grad " + at_x.grad.shape_str() +
                             " vs x " + x.shape_str());
    }
    double worst = 0.0;
    Tensor2D probe = x;
    for (size_t i = 0; i < x.size(); ++i) {
        const double orig = probe.data[i];
        probe.data[i] = orig + step;
        const double fp = f(probe).value;
        probe.data[i] = orig - step;
        const double fm = f(probe).value;
        probe.data[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw OracleFailureError("grad_check: non-finite value at perturbed coordinate " +
                                     std::to_string(i));
        }
        const double numeric = (fp - fm) / (2.0 * step);
        const double analytic = at_x.grad.data[i];
        const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace chunkalign::num
