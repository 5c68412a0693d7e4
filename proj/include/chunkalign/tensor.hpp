#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "chunkalign/errors.hpp"
#include "chunkalign/rng.hpp"

namespace chunkalign {

// Dense row-major matrix of doubles. The universal numeric carrier: weights,
// activations, stacked embedding rows. Training math runs at 64-bit so the
// finite-difference checks can be tight; checkpoints are quantized to 32-bit
// on write.
struct Tensor2D {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;  // length rows*cols

    Tensor2D() = default;
    Tensor2D(int r, int c) : rows(r), cols(c), data(size_t(r) * size_t(c), 0.0) {}
    Tensor2D(int r, int c, std::vector<double> d) : rows(r), cols(c), data(std::move(d)) {
        if (data.size() != size_t(r) * size_t(c)) {
            throw DimensionError("Tensor2D: data length " + std::to_string(data.size()) +
                                 " != " + std::to_string(r) + "x" + std::to_string(c));
        }
    }

    double& at(int r, int c) { return data[size_t(r) * cols + c]; }
    double at(int r, int c) const { return data[size_t(r) * cols + c]; }

    double* row(int r) { return data.data() + size_t(r) * cols; }
    const double* row(int r) const { return data.data() + size_t(r) * cols; }

    std::span<double> row_span(int r) { return {row(r), size_t(cols)}; }
    std::span<const double> row_span(int r) const { return {row(r), size_t(cols)}; }

    size_t size() const { return data.size(); }

    bool same_shape(const Tensor2D& o) const { return rows == o.rows && cols == o.cols; }

    std::string shape_str() const {
        return std::to_string(rows) + "x" + std::to_string(cols);
    }

    static Tensor2D zeros(int r, int c) { return Tensor2D(r, c); }

    static Tensor2D identity(int n) {
        Tensor2D t(n, n);
        for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
        return t;
    }

    static Tensor2D from_rows(const std::vector<std::vector<double>>& rows_in) {
        if (rows_in.empty()) return Tensor2D();
        Tensor2D t(int(rows_in.size()), int(rows_in[0].size()));
        for (int r = 0; r < t.rows; ++r) {
            if (rows_in[r].size() != size_t(t.cols)) {
                throw DimensionError("from_rows: ragged row " + std::to_string(r));
            }
            for (int c = 0; c < t.cols; ++c) t.at(r, c) = rows_in[r][c];
        }
        return t;
    }

    static Tensor2D random_normal(int r, int c, Rng& rng, double stddev = 1.0) {
        Tensor2D t(r, c);
        for (auto& v : t.data) v = rng.normal() * stddev;
        return t;
    }

    static Tensor2D row_vector(std::span<const double> v) {
        Tensor2D t(1, int(v.size()));
        for (int c = 0; c < t.cols; ++c) t.at(0, c) = v[c];
        return t;
    }
};

// A parameter together with its accumulated gradient; shapes always match.
struct GradPair {
    Tensor2D value;
    Tensor2D grad;

    explicit GradPair(Tensor2D v) : value(std::move(v)), grad(value.rows, value.cols) {}
    GradPair(Tensor2D v, Tensor2D g) : value(std::move(v)), grad(std::move(g)) {
        if (!value.same_shape(grad)) {
            throw DimensionError("GradPair: value " + value.shape_str() + " vs grad " +
                                 grad.shape_str());
        }
    }
};

}  // namespace chunkalign
