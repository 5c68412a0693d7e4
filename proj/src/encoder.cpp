#include "chunkalign/encoder.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "chunkalign/errors.hpp"
#include "chunkalign/kernels.hpp"

namespace chunkalign::encoder {

namespace {

// Residual output projections start at zero, so the untrained stack is the
// identity on token embeddings and training opens up the mixing paths
// gradually — important at the short schedules the desk runs use.
constexpr double kEmbedInitStd = 0.01;
constexpr double kProjInitStd = 0.02;
constexpr double kLayerNormEps = 1e-5;

Tensor2D rope_apply(const Tensor2D& x, std::span<const int> positions, double theta,
                    double sign) {
    if (x.cols % 2 != 0) {
        throw ConfigError("rope_rotate: head_dim " + std::to_string(x.cols) + " must be even");
    }
    if (theta <= 0.0) throw ConfigError("rope_rotate: theta must be > 0");
    if (int(positions.size()) != x.rows) {
        throw DimensionError("rope_rotate: " + std::to_string(positions.size()) +
                             " positions vs " + std::to_string(x.rows) + " rows");
    }
    const int pairs = x.cols / 2;
    Tensor2D out(x.rows, x.cols);
    for (int r = 0; r < x.rows; ++r) {
        const double* xrow = x.row(r);
        double* orow = out.row(r);
        for (int i = 0; i < pairs; ++i) {
            const double freq = std::pow(theta, -2.0 * i / x.cols);
            const double angle = sign * positions[r] * freq;
            const double c = std::cos(angle);
            const double s = std::sin(angle);
            const double a = xrow[2 * i];
            const double b = xrow[2 * i + 1];
            orow[2 * i] = a * c - b * s;
            orow[2 * i + 1] = a * s + b * c;
        }
    }
    return out;
}

std::vector<int> iota_positions(int n) {
    std::vector<int> pos(static_cast<size_t>(n), 0);
    std::iota(pos.begin(), pos.end(), 0);
    return pos;
}

void validate_spans(const TokenSequence& tokens,
                    std::span<const chunker::ChunkSpan> chunk_spans) {
    for (const auto& span : chunk_spans) {
        if (!span.token_mapped() || span.token_start < 0 || span.token_end > tokens.size()) {
            throw SpanError("chunk span tokens [" + std::to_string(span.token_start) + "," +
                            std::to_string(span.token_end) + ") outside sequence of " +
                            std::to_string(tokens.size()));
        }
        bool any_content = false;
        for (int p = span.token_start; p < span.token_end; ++p) {
            if (tokens.is_content(p)) {
                any_content = true;
            } else {
                throw SpanError("chunk span [" + std::to_string(span.token_start) + "," +
                                std::to_string(span.token_end) +
                                ") covers special/prompt position " + std::to_string(p));
            }
        }
        if (!any_content) {
            throw SpanError("chunk span [" + std::to_string(span.token_start) + "," +
                            std::to_string(span.token_end) + ") covers no content tokens");
        }
    }
}

}  // namespace

void EncoderConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("encoder config: " + msg); };
    if (num_layers < 1) fail("num_layers must be >= 1");
    if (model_dim < 2 || num_heads < 1) fail("model_dim/num_heads out of range");
    if (model_dim % num_heads != 0) fail("model_dim must be divisible by num_heads");
    if (head_dim() % 2 != 0) fail("head_dim must be even for RoPE pairs");
    if (ffn_dim < 1) fail("ffn_dim must be >= 1");
    if (vocab_size <= kWordBase) {
        fail("vocab_size must exceed " + std::to_string(kWordBase));
    }
    if (native_max_len < 4) fail("native_max_len must be >= 4");
    if (target_max_len < native_max_len) fail("target_max_len must be >= native_max_len");
    if (local_window < 2) fail("local_window must be >= 2");
    if (global_layer_period < 1) fail("global_layer_period must be >= 1");
    if (global_rope_theta <= 0.0 || local_rope_theta <= 0.0) fail("rope theta must be > 0");
    if (rope_longest_period(global_rope_theta, head_dim()) < double(target_max_len)) {
        fail("global_rope_theta " + std::to_string(global_rope_theta) +
             " aliases within target_max_len " + std::to_string(target_max_len));
    }
    if (rope_longest_period(local_rope_theta, head_dim()) < double(local_window)) {
        fail("local_rope_theta aliases within local_window");
    }
}

double rope_longest_period(double theta, int head_dim) {
    const double two_pi = 6.283185307179586476925286766559;
    return two_pi * std::pow(theta, double(head_dim - 2) / double(head_dim));
}

EncoderConfig scale_rope_theta(const EncoderConfig& config, double new_theta) {
    if (new_theta <= 0.0) throw ConfigError("scale_rope_theta: theta must be > 0");
    EncoderConfig out = config;
    out.global_rope_theta = new_theta;
    out.validate();
    return out;
}

Tensor2D rope_rotate(const Tensor2D& q_or_k, std::span<const int> positions, double theta) {
    return rope_apply(q_or_k, positions, theta, 1.0);
}

AttentionMask attention_mask(int layer_index, int seq_len, const EncoderConfig& config) {
    if (seq_len < 1) throw ConfigError("attention_mask: seq_len must be >= 1");
    AttentionMask mask;
    mask.n = seq_len;
    mask.allowed.assign(size_t(seq_len) * seq_len, 1);
    if (config.is_global_layer(layer_index)) return mask;
    const int half = config.local_window / 2;
    for (int i = 0; i < seq_len; ++i) {
        for (int j = 0; j < seq_len; ++j) {
            const bool band = std::abs(i - j) <= half;
            const bool cls = (i == 0 || j == 0);
            mask.allowed[size_t(i) * seq_len + j] = (band || cls) ? 1 : 0;
        }
    }
    return mask;
}

Weights Weights::init(const EncoderConfig& config, uint64_t seed) {
    config.validate();
    Weights w;
    w.config = config;
    Rng rng(derive_seed(seed, "encoder-init"));
    const int d = config.model_dim;
    w.tok_embed = Tensor2D::random_normal(config.vocab_size, d, rng, kEmbedInitStd);
    w.layers.resize(size_t(config.num_layers));
    for (auto& layer : w.layers) {
        layer.ln1_gain = Tensor2D(1, d);
        layer.ln1_bias = Tensor2D(1, d);
        for (int j = 0; j < d; ++j) layer.ln1_gain.at(0, j) = 1.0;
        layer.wq = Tensor2D::random_normal(d, d, rng, kProjInitStd);
        layer.wk = Tensor2D::random_normal(d, d, rng, kProjInitStd);
        layer.wv = Tensor2D::random_normal(d, d, rng, kProjInitStd);
        layer.wo = Tensor2D(d, d);
        layer.ln2_gain = Tensor2D(1, d);
        layer.ln2_bias = Tensor2D(1, d);
        for (int j = 0; j < d; ++j) layer.ln2_gain.at(0, j) = 1.0;
        layer.w1 = Tensor2D::random_normal(d, config.ffn_dim, rng, kProjInitStd);
        layer.w2 = Tensor2D(config.ffn_dim, d);
    }
    return w;
}

namespace {

template <typename W, typename T>
std::vector<std::pair<std::string, T*>> named_params_impl(W& w) {
    std::vector<std::pair<std::string, T*>> out;
    out.emplace_back("tok_embed", &w.tok_embed);
    for (size_t i = 0; i < w.layers.size(); ++i) {
        const std::string p = "layer" + std::to_string(i) + ".";
        auto& l = w.layers[i];
        out.emplace_back(p + "ln1_gain", &l.ln1_gain);
        out.emplace_back(p + "ln1_bias", &l.ln1_bias);
        out.emplace_back(p + "wq", &l.wq);
        out.emplace_back(p + "wk", &l.wk);
        out.emplace_back(p + "wv", &l.wv);
        out.emplace_back(p + "wo", &l.wo);
        out.emplace_back(p + "ln2_gain", &l.ln2_gain);
        out.emplace_back(p + "ln2_bias", &l.ln2_bias);
        out.emplace_back(p + "w1", &l.w1);
        out.emplace_back(p + "w2", &l.w2);
    }
    return out;
}

}  // namespace

std::vector<std::pair<std::string, Tensor2D*>> Weights::named_params() {
    return named_params_impl<Weights, Tensor2D>(*this);
}

std::vector<std::pair<std::string, const Tensor2D*>> Weights::named_params() const {
    return named_params_impl<const Weights, const Tensor2D>(*this);
}

namespace {

// One transformer stack forward over the whole sequence; inference path.
Tensor2D forward_hidden(const TokenSequence& tokens, const Weights& weights) {
    const EncoderConfig& cfg = weights.config;
    const int n = tokens.size();
    if (n > cfg.target_max_len) {
        throw ContractError("encode: sequence length " + std::to_string(n) +
                            " exceeds target_max_len " + std::to_string(cfg.target_max_len));
    }
    const std::vector<int> positions = iota_positions(n);
    const int d = cfg.model_dim;
    const int hd = cfg.head_dim();
    const double inv_sqrt_hd = 1.0 / std::sqrt(double(hd));

    Tensor2D x(n, d);
    for (int i = 0; i < n; ++i) {
        const double* src = weights.tok_embed.row(tokens.ids[size_t(i)]);
        for (int j = 0; j < d; ++j) x.at(i, j) = src[j];
    }

    for (int li = 0; li < cfg.num_layers; ++li) {
        const LayerWeights& lw = weights.layers[size_t(li)];
        const double theta = cfg.theta_for_layer(li);
        const bool global = cfg.is_global_layer(li);
        AttentionMask mask;
        if (!global) mask = attention_mask(li, n, cfg);

        const Tensor2D h = num::layer_norm(x, lw.ln1_gain.row_span(0), lw.ln1_bias.row_span(0),
                                           kLayerNormEps);
        const Tensor2D q = num::matmul(h, lw.wq);
        const Tensor2D k = num::matmul(h, lw.wk);
        const Tensor2D v = num::matmul(h, lw.wv);

        Tensor2D ctx(n, d);
        for (int head = 0; head < cfg.num_heads; ++head) {
            const int c0 = head * hd;
            Tensor2D qh(n, hd), kh(n, hd), vh(n, hd);
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < hd; ++j) {
                    qh.at(i, j) = q.at(i, c0 + j);
                    kh.at(i, j) = k.at(i, c0 + j);
                    vh.at(i, j) = v.at(i, c0 + j);
                }
            }
            qh = rope_apply(qh, positions, theta, 1.0);
            kh = rope_apply(kh, positions, theta, 1.0);
            Tensor2D scores = num::matmul_nt(qh, kh);
            for (auto& s : scores.data) s *= inv_sqrt_hd;
            const Tensor2D probs =
                num::softmax_rows(scores, global ? nullptr : &mask.allowed);
            const Tensor2D ctx_h = num::matmul(probs, vh);
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < hd; ++j) ctx.at(i, c0 + j) = ctx_h.at(i, j);
            }
        }
        const Tensor2D attn_out = num::matmul(ctx, lw.wo);
        for (size_t i = 0; i < x.size(); ++i) x.data[i] += attn_out.data[i];

        const Tensor2D h2 = num::layer_norm(x, lw.ln2_gain.row_span(0), lw.ln2_bias.row_span(0),
                                            kLayerNormEps);
        const Tensor2D ffn = num::matmul(num::gelu(num::matmul(h2, lw.w1)), lw.w2);
        for (size_t i = 0; i < x.size(); ++i) x.data[i] += ffn.data[i];
    }
    return x;
}

// Mirrors Tape::mean_over_rows exactly (multiply by 1/n, same accumulation
// order) so the inference and taped paths agree bit for bit.
std::vector<double> pooled_mean(const Tensor2D& hidden, const std::vector<int>& rows) {
    Tensor2D acc(1, hidden.cols);
    for (int r : rows) {
        for (int j = 0; j < hidden.cols; ++j) acc.at(0, j) += hidden.at(r, j);
    }
    const double inv = 1.0 / double(rows.size());
    for (auto& v : acc.data) v *= inv;
    const Tensor2D normed = num::l2_normalize_rows(acc);
    return {normed.data.begin(), normed.data.end()};
}

}  // namespace

EmbeddingSet encode_document(const TokenSequence& tokens,
                             std::span<const chunker::ChunkSpan> chunk_spans,
                             const Weights& weights) {
    validate_spans(tokens, chunk_spans);
    const std::vector<int> content = tokens.content_positions();
    if (content.empty()) {
        throw DegenerateInputError("encode_document: no content tokens to pool");
    }
    const Tensor2D hidden = forward_hidden(tokens, weights);

    EmbeddingSet out;
    out.cls = pooled_mean(hidden, {0});
    for (const auto& span : chunk_spans) {
        std::vector<int> rows;
        for (int p = span.token_start; p < span.token_end; ++p) rows.push_back(p);
        out.chunks.emplace_back(span, pooled_mean(hidden, rows));
    }
    out.mean = pooled_mean(hidden, content);
    return out;
}

TapedWeights stage_weights(num::Tape& tape, const Weights& weights) {
    TapedWeights staged;
    staged.tok_embed = tape.leaf(weights.tok_embed);
    for (const auto& lw : weights.layers) {
        TapedWeights::Layer l;
        l.ln1_gain = tape.leaf(lw.ln1_gain);
        l.ln1_bias = tape.leaf(lw.ln1_bias);
        l.wq = tape.leaf(lw.wq);
        l.wk = tape.leaf(lw.wk);
        l.wv = tape.leaf(lw.wv);
        l.wo = tape.leaf(lw.wo);
        l.ln2_gain = tape.leaf(lw.ln2_gain);
        l.ln2_bias = tape.leaf(lw.ln2_bias);
        l.w1 = tape.leaf(lw.w1);
        l.w2 = tape.leaf(lw.w2);
        staged.layers.push_back(l);
    }
    return staged;
}

std::vector<Tensor2D> collect_grads(const num::Tape& tape, const TapedWeights& staged) {
    std::vector<Tensor2D> grads;
    grads.push_back(tape.grad(staged.tok_embed));
    for (const auto& l : staged.layers) {
        grads.push_back(tape.grad(l.ln1_gain));
        grads.push_back(tape.grad(l.ln1_bias));
        grads.push_back(tape.grad(l.wq));
        grads.push_back(tape.grad(l.wk));
        grads.push_back(tape.grad(l.wv));
        grads.push_back(tape.grad(l.wo));
        grads.push_back(tape.grad(l.ln2_gain));
        grads.push_back(tape.grad(l.ln2_bias));
        grads.push_back(tape.grad(l.w1));
        grads.push_back(tape.grad(l.w2));
    }
    return grads;
}

TapedEmbeddingSet encode_document_taped(num::Tape& tape, const TapedWeights& staged,
                                        const EncoderConfig& cfg,
                                        const TokenSequence& tokens,
                                        std::span<const chunker::ChunkSpan> chunk_spans) {
    validate_spans(tokens, chunk_spans);
    const std::vector<int> content = tokens.content_positions();
    if (content.empty()) {
        throw DegenerateInputError("encode_document: no content tokens to pool");
    }
    const int n = tokens.size();
    if (n > cfg.target_max_len) {
        throw ContractError("encode: sequence length " + std::to_string(n) +
                            " exceeds target_max_len " + std::to_string(cfg.target_max_len));
    }
    const std::vector<int> positions = iota_positions(n);
    const int hd = cfg.head_dim();
    const double inv_sqrt_hd = 1.0 / std::sqrt(double(hd));

    auto rope_op = [&](num::VarId in, double theta) {
        Tensor2D value = rope_apply(tape.value(in), positions, theta, 1.0);
        return tape.custom_unary(in, std::move(value),
                                 [positions, theta](const Tensor2D& d_out) {
                                     return rope_apply(d_out, positions, theta, -1.0);
                                 });
    };

    num::VarId x = tape.gather_rows(staged.tok_embed, tokens.ids);
    for (int li = 0; li < cfg.num_layers; ++li) {
        const auto& lw = staged.layers[size_t(li)];
        const double theta = cfg.theta_for_layer(li);
        const bool global = cfg.is_global_layer(li);
        std::shared_ptr<const std::vector<uint8_t>> mask;
        if (!global) {
            mask = std::make_shared<const std::vector<uint8_t>>(
                attention_mask(li, n, cfg).allowed);
        }

        const num::VarId h = tape.layer_norm(x, lw.ln1_gain, lw.ln1_bias, kLayerNormEps);
        const num::VarId q = tape.matmul(h, lw.wq);
        const num::VarId k = tape.matmul(h, lw.wk);
        const num::VarId v = tape.matmul(h, lw.wv);

        std::vector<num::VarId> heads;
        for (int head = 0; head < cfg.num_heads; ++head) {
            const int c0 = head * hd;
            const num::VarId qh = rope_op(tape.slice_cols(q, c0, c0 + hd), theta);
            const num::VarId kh = rope_op(tape.slice_cols(k, c0, c0 + hd), theta);
            const num::VarId vh = tape.slice_cols(v, c0, c0 + hd);
            const num::VarId scores = tape.scale(tape.matmul_nt(qh, kh), inv_sqrt_hd);
            const num::VarId probs = tape.softmax_rows(scores, mask);
            heads.push_back(tape.matmul(probs, vh));
        }
        const num::VarId ctx = tape.concat_cols(heads);
        x = tape.add(x, tape.matmul(ctx, lw.wo));

        const num::VarId h2 = tape.layer_norm(x, lw.ln2_gain, lw.ln2_bias, kLayerNormEps);
        const num::VarId ffn = tape.matmul(tape.gelu(tape.matmul(h2, lw.w1)), lw.w2);
        x = tape.add(x, ffn);
    }

    TapedEmbeddingSet out;
    out.cls = tape.l2_normalize_rows(tape.slice_rows(x, 0, 1));
    for (const auto& span : chunk_spans) {
        std::vector<int> rows;
        for (int p = span.token_start; p < span.token_end; ++p) rows.push_back(p);
        out.chunks.push_back(tape.l2_normalize_rows(tape.mean_over_rows(x, std::move(rows))));
    }
    out.mean = tape.l2_normalize_rows(tape.mean_over_rows(x, content));
    return out;
}

}  // namespace chunkalign::encoder
