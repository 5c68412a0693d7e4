#include "chunkalign/tape.hpp"

#include <string>
#include <utility>

#include "chunkalign/errors.hpp"

namespace chunkalign::num {

VarId Tape::push(Tensor2D value, bool differentiable, std::function<void(Tape&)> back) {
    nodes_.push_back(Node{std::move(value), Tensor2D(), differentiable, std::move(back)});
    return VarId(nodes_.size() - 1);
}

VarId Tape::constant(Tensor2D v) { return push(std::move(v), false, {}); }

VarId Tape::leaf(Tensor2D v) { return push(std::move(v), true, {}); }

Tensor2D Tape::grad(VarId id) const {
    const Node& n = nodes_[size_t(id)];
    if (n.grad.size() == 0) return Tensor2D(n.value.rows, n.value.cols);
    return n.grad;
}

Tensor2D& Tape::grad_buf(VarId id) {
    Node& n = nodes_[size_t(id)];
    if (n.grad.size() == 0) n.grad = Tensor2D(n.value.rows, n.value.cols);
    return n.grad;
}

bool Tape::grad_reached(VarId id) const { return nodes_[size_t(id)].grad.size() != 0; }

void Tape::accumulate(VarId id, const Tensor2D& g) {
    if (!nodes_[size_t(id)].differentiable) return;
    Tensor2D& buf = grad_buf(id);
    for (size_t i = 0; i < buf.size(); ++i) buf.data[i] += g.data[i];
}

VarId Tape::matmul(VarId a, VarId b) {
    Tensor2D out = num::matmul(value(a), value(b));
    VarId id = push(std::move(out), true, {});
    nodes_[size_t(id)].back = [a, b, id](Tape& t) {
        if (!t.grad_reached(id)) return;
        const Tensor2D& d_out = t.nodes_[size_t(id)].grad;
        num::matmul_backward(t.value(a), t.value(b), d_out, t.grad_buf(a), t.grad_buf(b));
    };
    return id;
}

VarId Tape::matmul_nt(VarId a, VarId b) {
    Tensor2D out = num::matmul_nt(value(a), value(b));
    VarId id = push(std::move(out), true, {});
    nodes_[size_t(id)].back = [a, b, id](Tape& t) {
        if (!t.grad_reached(id)) return;
        const Tensor2D& d_out = t.nodes_[size_t(id)].grad;
        num::matmul_nt_backward(t.value(a), t.value(b), d_out, t.grad_buf(a), t.grad_buf(b));
    };
    return id;
}

VarId Tape::add(VarId a, VarId b) {
    const Tensor2D& va = value(a);
    const Tensor2D& vb = value(b);
    if (!va.same_shape(vb)) {
        throw DimensionError("tape add: " + va.shape_str() + " vs " + vb.shape_str());
    }
    Tensor2D out = va;
    for (size_t i = 0; i < out.size(); ++i) out.data[i] += vb.data[i];
    VarId id = push(std::move(out), true, {});
    nodes_[size_t(id)].back = [a, b, id](Tape& t) {
        if (!t.grad_reached(id)) return;
        const Tensor2D& g = t.nodes_[size_t(id)].grad;
        t.accumulate(a, g);
        t.accumulate(b, g);
    };
    return id;
}

VarId Tape::scale(VarId x, double s) {
    Tensor2D out = value(x);
    for (auto& v : out.data) v *= s;
    VarId id = push(std::move(out), true, {});
    nodes_[size_t(id)].back = [x, s, id](Tape& t) {
        if (!t.grad_reached(id)) return;
        const Tensor2D& g = t.nodes_[size_t(id)].grad;
        Tensor2D gx = g;
        for (auto& v : gx.data) v *= s;
        t.accumulate(x, gx);
    };
    return id;
}

VarId Tape::slice_rows(VarId x, int r0, int r1) {
    const Tensor2D& vx = value(x);
    if (!(0 <= r0 && r0 < r1 && r1 <= vx.rows)) {
        throw DimensionError("tape slice_rows: [" + std::to_string(r0) + "," +
                             std::to_string(r1) + ") of " + vx.shape_str());
    }
    Tensor2D out(r1 - r0, vx.cols);
    for (int i = r0; i < r1; ++i) {
        for (int j = 0; j < vx.cols; ++j) out.at(i - r0, j) = vx.at(i, j);
    }
    VarId id = push(std::move(out), true, {});
    nodes_[size_t(id)].back = [x, r0, id](Tape& t) {
        if (!t.grad_reached(id)) return;
        const Tensor2D& g = t.nodes_[size_t(id)].grad;
        Tensor2D& gx = t.grad_buf(x);
        for (int i = 0; i < g.rows; ++i) {
            for (int j = 0; j < g.cols; ++j) gx.at(r0 + i, j) += g.at(i, j);
        }
    };
    return id;
}

VarId Tape::slice_cols(VarId x, int c0, int c1) {
    const Tensor2D& vx = value(x);
    if (!(0 <= c0 && c0 < c1 && c1 <= vx.cols)) {
        throw DimensionError("tape slice_cols: [" + std::to_string(c0) + "," +
                             std::to_string(c1) + ") of " + vx.shape_str());
    }
    Tensor2D out(vx.rows, c1 - c0);
    for (int i = 0; i < vx.rows; ++i) {
        for (int j = c0; j < c1; ++j) out.at(i, j - c0) = vx.at(i, j);
    }
    VarId id = push(std::move(out), true, {});
    nodes_[size_t(id)].back = [x, c0, id](Tape& t) {
        if (!t.grad_reached(id)) return;
        const Tensor2D& g = t.nodes_[size_t(id)].grad;
        Tensor2D& gx = t.grad_buf(x);
        for (int i = 0; i < g.rows; ++i) {
            for (int j = 0; j < g.cols; ++j) gx.at(i, c0 + j) += g.at(i, j);
        }
    };
    return id;
}

VarId Tape::concat_rows(std::span<const VarId> parts) {
    if (parts.empty()) throw DimensionError("tape concat_rows: no parts");
    int total = 0;
    const int cols = value(parts[0]).cols;
    for (VarId p : parts) {
        if (value(p).cols != cols) {
            throw DimensionError("tape concat_rows: column mismatch " +
                                 value(p).shape_str());
        }
        total += value(p).rows;
    }
    Tensor2D out(total, cols);
    int r = 0;
    for (VarId p : parts) {
        const Tensor2D& v = value(p);
        for (int i = 0; i < v.rows; ++i, ++r) {
            for (int j = 0; j < cols; ++j) out.at(r, j) = v.at(i, j);
        }
    }
    std::vector<VarId> ids(parts.begin(), parts.end());
    VarId id = push(std::move(out), true, {});
    nodes_[size_t(id)].back = [ids = std::move(ids), id](Tape& t) {
        if (!t.grad_reached(id)) return;
        const Tensor2D& g = t.nodes_[size_t(id)].grad;
        int r = 0;
        for (VarId p : ids) {
            Tensor2D& gp = t.grad_buf(p);
            for (int i = 0; i < gp.rows; ++i, ++r) {
                for (int j = 0; j < gp.cols; ++j) gp.at(i, j) += g.at(r, j);
            }
        }
    };
    return id;
}

VarId Tape::concat_cols(std::span<const VarId> parts) {
    if (parts.empty()) throw DimensionError("tape concat_cols: no parts");
    int total = 0;
    const int rows = value(parts[0]).rows;
    for (VarId p : parts) {
        if (value(p).rows != rows) {
            throw DimensionError("tape concat_cols: row mismatch " + value(p).shape_str());
        }
        total += value(p).cols;
    }
    Tensor2D out(rows, total);
    int c = 0;
    for (VarId p : parts) {
        const Tensor2D& v = value(p);
        for (int i = 0; i < rows; ++i) {
            for (int j = 0; j < v.cols; ++j) out.at(i, c + j) = v.at(i, j);
        }
        c += v.cols;
    }
    std::vector<VarId> ids(parts.begin(), parts.end());
    VarId id = push(std::move(out), true, {});
    nodes_[size_t(id)].back = [ids = std::move(ids), id](Tape& t) {
        if (!t.grad_reached(id)) return;
        const Tensor2D& g = t.nodes_[size_t(id)].grad;
        int c = 0;
        for (VarId p : ids) {
            Tensor2D& gp = t.grad_buf(p);
            for (int i = 0; i < gp.rows; ++i) {
                for (int j = 0; j < gp.cols; ++j) gp.at(i, j) += g.at(i, c + j);
            }
            c += gp.cols;
        }
    };
    return id;
}

VarId Tape::gather_rows(VarId table, std::vector<int> ids_in) {
    const Tensor2D& tab = value(table);
    Tensor2D out(int(ids_in.size()), tab.cols);
    for (size_t i = 0; i < ids_in.size(); ++i) {
        const int r = ids_in[i];
        if (r < 0 || r >= tab.rows) {
            throw DimensionError("tape gather_rows: id " + std::to_string(r) +
                                 " outside table " + tab.shape_str());
        }
        for (int j = 0; j < tab.cols; ++j) out.at(int(i), j) = tab.at(r, j);
    }
    VarId id = push(std::move(out), true, {});
    nodes_[size_t(id)].back = [table, rows = std::move(ids_in), id](Tape& t) {
        if (!t.grad_reached(id)) return;
        const Tensor2D& g = t.nodes_[size_t(id)].grad;
        Tensor2D& gt = t.grad_buf(table);
        for (size_t i = 0; i < rows.size(); ++i) {
            for (int j = 0; j < g.cols; ++j) gt.at(rows[i], j) += g.at(int(i), j);
        }
    };
    return id;
}

VarId Tape::layer_norm(VarId x, VarId gain, VarId bias, double eps) {
    const Tensor2D& vg = value(gain);
    const Tensor2D& vb = value(bias);
    Tensor2D out = num::layer_norm(value(x), vg.row_span(0), vb.row_span(0), eps);
    VarId id = push(std::move(out), true, {});
    nodes_[size_t(id)].back = [x, gain, bias, eps, id](Tape& t) {
        if (!t.grad_reached(id)) return;
        const Tensor2D& g = t.nodes_[size_t(id)].grad;
        num::layer_norm_backward(t.value(x), t.value(gain).row_span(0), eps, g,
                                 t.grad_buf(x), t.grad_buf(gain).row_span(0),
                                 t.grad_buf(bias).row_span(0));
    };
    return id;
}

VarId Tape::gelu(VarId x) {
    Tensor2D out = num::gelu(value(x));
    VarId id = push(std::move(out), true, {});
    nodes_[size_t(id)].back = [x, id](Tape& t) {
        if (!t.grad_reached(id)) return;
        t.accumulate(x, num::gelu_backward(t.value(x), t.nodes_[size_t(id)].grad));
    };
    return id;
}

VarId Tape::softmax_rows(VarId x, std::shared_ptr<const std::vector<uint8_t>> mask) {
    Tensor2D out = num::softmax_rows(value(x), mask ? mask.get() : nullptr);
    VarId id = push(std::move(out), true, {});
    // softmax backward only needs the forward output; masked entries have
    // probability 0 so no gradient leaks through them.
    nodes_[size_t(id)].back = [x, id](Tape& t) {
        if (!t.grad_reached(id)) return;
        t.accumulate(x, num::softmax_rows_backward(t.value(id), t.nodes_[size_t(id)].grad));
    };
    return id;
}

VarId Tape::mean_over_rows(VarId x, std::vector<int> row_ids) {
    const Tensor2D& vx = value(x);
    if (row_ids.empty()) throw DegenerateInputError("tape mean_over_rows: empty row set");
    Tensor2D out(1, vx.cols);
    for (int r : row_ids) {
        if (r < 0 || r >= vx.rows) {
            throw DimensionError("tape mean_over_rows: row " + std::to_string(r) +
                                 " outside " + vx.shape_str());
        }
        for (int j = 0; j < vx.cols; ++j) out.at(0, j) += vx.at(r, j);
    }
    const double inv = 1.0 / double(row_ids.size());
    for (auto& v : out.data) v *= inv;
    VarId id = push(std::move(out), true, {});
    nodes_[size_t(id)].back = [x, rows = std::move(row_ids), inv, id](Tape& t) {
        if (!t.grad_reached(id)) return;
        const Tensor2D& g = t.nodes_[size_t(id)].grad;
        Tensor2D& gx = t.grad_buf(x);
        for (int r : rows) {
            for (int j = 0; j < g.cols; ++j) gx.at(r, j) += g.at(0, j) * inv;
        }
    };
    return id;
}

VarId Tape::l2_normalize_rows(VarId x) {
    Tensor2D out = num::l2_normalize_rows(value(x));
    VarId id = push(std::move(out), true, {});
    nodes_[size_t(id)].back = [x, id](Tape& t) {
        if (!t.grad_reached(id)) return;
        t.accumulate(x, num::l2_normalize_rows_backward(t.value(x), t.nodes_[size_t(id)].grad));
    };
    return id;
}

VarId Tape::custom_unary(VarId in, Tensor2D out_value, UnaryBackward back) {
    VarId id = push(std::move(out_value), true, {});
    nodes_[size_t(id)].back = [in, id, back = std::move(back)](Tape& t) {
        if (!t.grad_reached(id)) return;
        t.accumulate(in, back(t.nodes_[size_t(id)].grad));
    };
    return id;
}

void Tape::backward(VarId root) {
    const Tensor2D& rv = value(root);
    if (rv.rows != 1 || rv.cols != 1) {
        throw DimensionError("tape backward: root must be 1x1, got " + rv.shape_str());
    }
    grad_buf(root).at(0, 0) = 1.0;
    for (VarId id = root; id >= 0; --id) {
        Node& n = nodes_[size_t(id)];
        if (n.back && grad_reached(id)) n.back(*this);
    }
}

}  // namespace chunkalign::num
