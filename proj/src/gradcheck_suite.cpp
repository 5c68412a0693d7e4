#include "chunkalign/gradcheck_suite.hpp"

#include <cmath>

#include "chunkalign/encoder.hpp"
#include "chunkalign/kernels.hpp"
#include "chunkalign/losses.hpp"
#include "chunkalign/rng.hpp"
#include "chunkalign/tape.hpp"
#include "chunkalign/tensor.hpp"

namespace chunkalign::num {

namespace {

constexpr double kTol = 1e-6;
constexpr double kStep = 1e-5;

double weighted_sum(const Tensor2D& x, const Tensor2D& w) {
    double acc = 0.0;
    for (size_t i = 0; i < x.size(); ++i) acc += x.data[i] * w.data[i];
    return acc;
}

struct Suite {
    std::vector<CheckResult> results;
    bool corrupt = false;

    void check(const std::string& name, const ScalarGradFn& f, const Tensor2D& x,
               double tol = kTol, double step = kStep) {
        CheckResult r;
        r.name = name;
        r.tolerance = tol;
        r.max_rel_err = grad_check(f, x, step);
        r.pass = r.max_rel_err < tol;
        results.push_back(r);
    }
};

}  // namespace

std::vector<CheckResult> run_gradcheck_suite(uint64_t seed, bool corrupt) {
    Suite suite;
    suite.corrupt = corrupt;
    Rng rng(derive_seed(seed, "gradcheck"));

    const std::vector<std::pair<int, int>> matmul_shapes = {{3, 4}, {2, 5}, {4, 3}};
    for (size_t si = 0; si < matmul_shapes.size(); ++si) {
        const auto [r, c] = matmul_shapes[si];
        const int out_cols = 2 + int(si);
        const Tensor2D b = Tensor2D::random_normal(c, out_cols, rng);
        const Tensor2D a0 = Tensor2D::random_normal(r, c, rng);
        // f = 0.5 * ||A B||^2, so dC = C exercises the full backward rule.
        suite.check("matmul.dA#" + std::to_string(si),
                    [&](const Tensor2D& a) {
                        const Tensor2D prod = matmul(a, b);
                        ScalarGrad out;
                        out.value = 0.5 * weighted_sum(prod, prod);
                        Tensor2D da(a.rows, a.cols), db(b.rows, b.cols);
                        matmul_backward(a, b, prod, da, db);
                        out.grad = da;
                        return out;
                    },
                    a0);
        suite.check("matmul.dB#" + std::to_string(si),
                    [&](const Tensor2D& bb) {
                        const Tensor2D prod = matmul(a0, bb);
                        ScalarGrad out;
                        out.value = 0.5 * weighted_sum(prod, prod);
                        Tensor2D da(a0.rows, a0.cols), db(bb.rows, bb.cols);
                        matmul_backward(a0, bb, prod, da, db);
                        out.grad = db;
                        return out;
                    },
                    b);
    }

    for (int si = 0; si < 3; ++si) {
        const int r = 2 + si;
        const int c = 4 + si;
        const Tensor2D w = Tensor2D::random_normal(r, c, rng);
        suite.check("softmax_rows#" + std::to_string(si),
                    [&](const Tensor2D& x) {
                        const Tensor2D y = softmax_rows(x);
                        return ScalarGrad{weighted_sum(y, w), softmax_rows_backward(y, w)};
                    },
                    Tensor2D::random_normal(r, c, rng));
    }

    for (int si = 0; si < 3; ++si) {
        const int r = 3 + si;
        const int c = 6 + 2 * si;
        const Tensor2D w = Tensor2D::random_normal(r, c, rng);
        const Tensor2D x0 = Tensor2D::random_normal(r, c, rng);
        Tensor2D gain0 = Tensor2D::random_normal(1, c, rng, 0.5);
        for (auto& g : gain0.data) g += 1.0;
        const Tensor2D bias0 = Tensor2D::random_normal(1, c, rng, 0.5);
        const double eps = 1e-5;

        auto eval = [&](const Tensor2D& x, const Tensor2D& gain, const Tensor2D& bias) {
            const Tensor2D y = layer_norm(x, gain.row_span(0), bias.row_span(0), eps);
            Tensor2D dx(x.rows, x.cols), dgain(1, c), dbias(1, c);
            layer_norm_backward(x, gain.row_span(0), eps, w, dx, dgain.row_span(0),
                                dbias.row_span(0));
            return std::tuple{weighted_sum(y, w), dx, dgain, dbias};
        };
        suite.check("layer_norm.dx#" + std::to_string(si),
                    [&](const Tensor2D& x) {
                        auto [v, dx, dg, db] = eval(x, gain0, bias0);
                        return ScalarGrad{v, dx};
                    },
                    x0);
        suite.check("layer_norm.dgain#" + std::to_string(si),
                    [&](const Tensor2D& gain) {
                        auto [v, dx, dg, db] = eval(x0, gain, bias0);
                        return ScalarGrad{v, dg};
                    },
                    gain0);
        suite.check("layer_norm.dbias#" + std::to_string(si),
                    [&](const Tensor2D& bias) {
                        auto [v, dx, dg, db] = eval(x0, gain0, bias);
                        return ScalarGrad{v, db};
                    },
                    bias0);
    }

    for (int si = 0; si < 3; ++si) {
        const int r = 2;
        const int c = 6 + si;
        const Tensor2D w = Tensor2D::random_normal(r, c, rng);
        const bool corrupt_here = suite.corrupt && si == 0;
        suite.check("gelu#" + std::to_string(si),
                    [&, corrupt_here](const Tensor2D& x) {
                        ScalarGrad out;
                        out.value = weighted_sum(gelu(x), w);
                        out.grad = gelu_backward(x, w);
                        if (corrupt_here) out.grad.data[0] += 1e-3;
                        return out;
                    },
                    Tensor2D::random_normal(r, c, rng));
    }

    for (int si = 0; si < 3; ++si) {
        const int r = 3 + si;
        const int c = 5 + si;
        const Tensor2D w = Tensor2D::random_normal(r, c, rng);
        Tensor2D x0 = Tensor2D::random_normal(r, c, rng);
        for (auto& v : x0.data) v += (v >= 0 ? 0.5 : -0.5);  // keep rows away from zero norm
        suite.check("l2_normalize_rows#" + std::to_string(si),
                    [&](const Tensor2D& x) {
                        return ScalarGrad{weighted_sum(l2_normalize_rows(x), w),
                                          l2_normalize_rows_backward(x, w)};
                    },
                    x0);
    }

    for (int si = 0; si < 3; ++si) {
        const int rows = 3 + si;
        const int head_dim = 8;
        const double theta = si == 0 ? 10000.0 : (si == 1 ? 160000.0 : 73780400.0);
        std::vector<int> positions, neg_positions;
        for (int p = 0; p < rows; ++p) {
            positions.push_back(5 * p + si);
            neg_positions.push_back(-(5 * p + si));
        }
        const Tensor2D w = Tensor2D::random_normal(rows, head_dim, rng);
        suite.check("rope_rotate#" + std::to_string(si),
                    [&](const Tensor2D& x) {
                        const Tensor2D y = encoder::rope_rotate(x, positions, theta);
                        // Rotations are orthogonal: the adjoint is rotation by
                        // the negated positions.
                        return ScalarGrad{weighted_sum(y, w),
                                          encoder::rope_rotate(w, neg_positions, theta)};
                    },
                    Tensor2D::random_normal(rows, head_dim, rng));
    }

    for (int si = 0; si < 3; ++si) {
        const int rows = 2 + si;
        const int cols = 4 + si;
        Tensor2D teacher = Tensor2D::random_normal(rows, cols, rng);
        teacher = l2_normalize_rows(teacher);
        suite.check("cosine_loss#" + std::to_string(si),
                    [&](const Tensor2D& s) {
                        const distill::LossValue loss = distill::cosine_loss(s, teacher);
                        return ScalarGrad{loss.value, loss.grad_student};
                    },
                    Tensor2D::random_normal(rows, cols, rng));

        const Tensor2D gram_teacher = Tensor2D::random_normal(rows, cols + 3, rng);
        suite.check("similarity_loss#" + std::to_string(si),
                    [&](const Tensor2D& s) {
                        const distill::LossValue loss = distill::similarity_loss(s, gram_teacher);
                        return ScalarGrad{loss.value, loss.grad_student};
                    },
                    Tensor2D::random_normal(rows, cols, rng));
    }

    // Tape compositions: mean pooling and gather feeding normalize + loss.
    {
        const int rows = 6, cols = 5;
        Tensor2D teacher = l2_normalize_rows(Tensor2D::random_normal(1, cols, rng));
        const std::vector<int> subset = {1, 3, 4};
        suite.check("tape.mean+normalize+cosine",
                    [&](const Tensor2D& x) {
                        Tape tape;
                        const VarId leaf = tape.leaf(x);
                        const VarId pooled = tape.mean_over_rows(leaf, subset);
                        const VarId normed = tape.l2_normalize_rows(pooled);
                        const VarId loss = distill::cosine_loss_op(tape, normed, teacher);
                        tape.backward(loss);
                        return ScalarGrad{tape.value(loss).at(0, 0), tape.grad(leaf)};
                    },
                    Tensor2D::random_normal(rows, cols, rng));

        const Tensor2D proj = Tensor2D::random_normal(cols, 4, rng);
        Tensor2D gain(1, cols), bias(1, cols);
        for (auto& g : gain.data) g = 1.0;
        Tensor2D t2 = l2_normalize_rows(Tensor2D::random_normal(4, 4, rng));
        suite.check("tape.gather+ln+gelu+matmul+cosine",
                    [&](const Tensor2D& table) {
                        Tape tape;
                        const VarId leaf = tape.leaf(table);
                        const VarId g = tape.gather_rows(leaf, {0, 2, 1, 4});
                        const VarId ln = tape.layer_norm(g, tape.leaf(gain), tape.leaf(bias),
                                                         1e-5);
                        const VarId act = tape.gelu(ln);
                        const VarId projd = tape.matmul(act, tape.constant(proj));
                        const VarId normed = tape.l2_normalize_rows(projd);
                        const VarId loss = distill::cosine_loss_op(tape, normed, t2);
                        tape.backward(loss);
                        return ScalarGrad{tape.value(loss).at(0, 0), tape.grad(leaf)};
                    },
                    Tensor2D::random_normal(5, cols, rng));
    }

    // End-to-end: full encoder forward + total loss at toy dims, checked
    // against finite differences for several weight tensors.
    {
        encoder::EncoderConfig cfg;
        cfg.num_layers = 2;
        cfg.model_dim = 16;
        cfg.num_heads = 2;
        cfg.ffn_dim = 24;
        cfg.vocab_size = 300;
        cfg.native_max_len = 64;
        cfg.target_max_len = 64;
        cfg.local_window = 4;
        cfg.global_layer_period = 2;  // layer 0 global, layer 1 local
        cfg.validate();

        encoder::Weights weights = encoder::Weights::init(cfg, derive_seed(seed, "e2e"));
        // Perturb the zero-initialized projections so their rules are
        // exercised away from the origin.
        {
            Rng wr(derive_seed(seed, "e2e-perturb"));
            for (auto& layer : weights.layers) {
                for (auto& v : layer.wo.data) v = wr.normal() * 0.05;
                for (auto& v : layer.w2.data) v = wr.normal() * 0.05;
            }
        }

        const std::string text = "alpha beta gamma delta epsilon zeta eta theta iota kappa";
        const encoder::TokenSequence tokens = encoder::tokenize(text, cfg.vocab_size);
        const std::vector<chunker::ChunkSpan> char_spans =
            chunker::split_by_word(text, 6, 2);
        const std::vector<chunker::ChunkSpan> spans =
            chunker::map_spans_to_tokens(char_spans, tokens);

        const int row_count = 2 + int(spans.size());  // cls + chunks + mean
        Tensor2D cos_targets = l2_normalize_rows(
            Tensor2D::random_normal(row_count, cfg.model_dim, rng));
        Tensor2D gram_targets = l2_normalize_rows(
            Tensor2D::random_normal(row_count, 12, rng));

        auto named = weights.named_params();
        auto run_for = [&](size_t param_index) {
            return [&, param_index](const Tensor2D& candidate) {
                encoder::Weights local = weights;
                *local.named_params()[param_index].second = candidate;
                Tape tape;
                const encoder::TapedWeights staged = encoder::stage_weights(tape, local);
                const encoder::TapedEmbeddingSet enc =
                    encoder::encode_document_taped(tape, staged, cfg, tokens, spans);
                std::vector<VarId> rows = {enc.cls};
                for (VarId ch : enc.chunks) rows.push_back(ch);
                rows.push_back(enc.mean);
                const VarId stacked = tape.concat_rows(rows);
                const VarId loss = distill::total_loss_op(tape, stacked, cos_targets,
                                                          gram_targets, 1.0, 1.0);
                tape.backward(loss);
                return ScalarGrad{tape.value(loss).at(0, 0),
                                  encoder::collect_grads(tape, staged)[param_index]};
            };
        };
        for (size_t pi = 0; pi < named.size(); ++pi) {
            const std::string& name = named[pi].first;
            if (name == "layer0.wq" || name == "layer0.wo" || name == "layer1.w1" ||
                name == "layer1.ln2_gain" || name == "layer0.ln1_bias") {
                suite.check("e2e." + name, run_for(pi), *named[pi].second, kTol, 1e-5);
            }
        }
    }

    return suite.results;
}

}  // namespace chunkalign::num
