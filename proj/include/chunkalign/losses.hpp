#pragma once

#include "chunkalign/tape.hpp"
#include "chunkalign/tensor.hpp"

namespace chunkalign::distill {

struct LossValue {
    double value = 0.0;
    Tensor2D grad_student;  // d(loss)/d(student rows)
};

// Sum over rows of (1 - s_x . t_x). Both sides must hold unit-norm rows; the
// gradient w.r.t. the student rows is -teacher_rows (the normalization chain
// rule is supplied by the encoder's normalize op upstream).
LossValue cosine_loss(const Tensor2D& student_rows, const Tensor2D& teacher_rows);

// MSE over all n^2 entries of the Gram matrices S S^T and T T^T. Column
// counts may differ (teacher dim need not equal student dim). Gradient w.r.t.
// S is 4/n^2 (S S^T - T T^T) S.
LossValue similarity_loss(const Tensor2D& s, const Tensor2D& t);

// Taped adapters: teacher rows are frozen targets.
num::VarId cosine_loss_op(num::Tape& tape, num::VarId student_rows, Tensor2D teacher_rows);
num::VarId similarity_loss_op(num::Tape& tape, num::VarId s, Tensor2D t);

// w_cos * cosine + w_sim * similarity over the same stacked rows.
num::VarId total_loss_op(num::Tape& tape, num::VarId student_rows,
                         const Tensor2D& teacher_cosine_targets,
                         const Tensor2D& teacher_gram_targets, double w_cos, double w_sim);

}  // namespace chunkalign::distill
