#include "chunkalign/losses.hpp"

#include <string>

#include "chunkalign/errors.hpp"
#include "chunkalign/kernels.hpp"

namespace chunkalign::distill {

LossValue cosine_loss(const Tensor2D& student_rows, const Tensor2D& teacher_rows) {
    if (!student_rows.same_shape(teacher_rows)) {
        throw DimensionError("cosine_loss: student " + student_rows.shape_str() +
                             " vs teacher " + teacher_rows.shape_str());
    }
    LossValue out;
    out.value = 0.0;
    for (int i = 0; i < student_rows.rows; ++i) {
        double dot = 0.0;
        for (int j = 0; j < student_rows.cols; ++j) {
            dot += student_rows.at(i, j) * teacher_rows.at(i, j);
        }
        out.value += 1.0 - dot;
    }
    out.grad_student = teacher_rows;
    for (auto& g : out.grad_student.data) g = -g;
    return out;
}

LossValue similarity_loss(const Tensor2D& s, const Tensor2D& t) {
    if (s.rows != t.rows) {
        throw DimensionError("similarity_loss: row count " + std::to_string(s.rows) + " vs " +
                             std::to_string(t.rows));
    }
    const int n = s.rows;
    const Tensor2D gram_s = num::matmul_nt(s, s);
    const Tensor2D gram_t = num::matmul_nt(t, t);
    Tensor2D diff(n, n);
    double mse = 0.0;
    for (size_t i = 0; i < diff.size(); ++i) {
        diff.data[i] = gram_s.data[i] - gram_t.data[i];
        mse += diff.data[i] * diff.data[i];
    }
    LossValue out;
    out.value = mse / double(n) / double(n);
    // d/dS of mean((SS^T - TT^T)^2) = 4/n^2 (SS^T - TT^T) S
    out.grad_student = num::matmul(diff, s);
    const double coeff = 4.0 / double(n) / double(n);
    for (auto& g : out.grad_student.data) g *= coeff;
    return out;
}

num::VarId cosine_loss_op(num::Tape& tape, num::VarId student_rows, Tensor2D teacher_rows) {
    LossValue loss = cosine_loss(tape.value(student_rows), teacher_rows);
    Tensor2D value(1, 1);
    value.at(0, 0) = loss.value;
    return tape.custom_unary(student_rows, std::move(value),
                             [grad = std::move(loss.grad_student)](const Tensor2D& d_out) {
                                 Tensor2D dx = grad;
                                 const double up = d_out.at(0, 0);
                                 for (auto& g : dx.data) g *= up;
                                 return dx;
                             });
}

num::VarId similarity_loss_op(num::Tape& tape, num::VarId s, Tensor2D t) {
    LossValue loss = similarity_loss(tape.value(s), t);
    Tensor2D value(1, 1);
    value.at(0, 0) = loss.value;
    return tape.custom_unary(s, std::move(value),
                             [grad = std::move(loss.grad_student)](const Tensor2D& d_out) {
                                 Tensor2D dx = grad;
                                 const double up = d_out.at(0, 0);
                                 for (auto& g : dx.data) g *= up;
                                 return dx;
                             });
}

num::VarId total_loss_op(num::Tape& tape, num::VarId student_rows,
                         const Tensor2D& teacher_cosine_targets,
                         const Tensor2D& teacher_gram_targets, double w_cos, double w_sim) {
    const num::VarId cos_term =
        tape.scale(cosine_loss_op(tape, student_rows, teacher_cosine_targets), w_cos);
    const num::VarId sim_term =
        tape.scale(similarity_loss_op(tape, student_rows, teacher_gram_targets), w_sim);
    return tape.add(cos_term, sim_term);
}

}  // namespace chunkalign::distill
