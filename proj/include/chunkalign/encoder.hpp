#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "chunkalign/chunker.hpp"
#include "chunkalign/tape.hpp"
#include "chunkalign/tensor.hpp"
#include "chunkalign/tokenizer.hpp"

namespace chunkalign::encoder {

struct EncoderConfig {
    int num_layers = 4;
    int model_dim = 64;
    int num_heads = 4;
    int ffn_dim = 128;
    int vocab_size = 4096;
    int native_max_len = 128;
    int target_max_len = 128;
    double global_rope_theta = 160000.0;
    double local_rope_theta = 10000.0;
    int local_window = 32;
    int global_layer_period = 3;  // every k-th layer attends globally

    int head_dim() const { return model_dim / num_heads; }
    bool is_global_layer(int layer_index) const {
        return layer_index % global_layer_period == 0;
    }
    double theta_for_layer(int layer_index) const {
        return is_global_layer(layer_index) ? global_rope_theta : local_rope_theta;
    }

    // Throws ConfigError on any invariant violation, including the RoPE
    // aliasing bound: the slowest rotating dimension pair must have a full
    // period of at least target_max_len positions.
    void validate() const;
};

// Full period, in positions, of the slowest dimension pair: 2*pi * theta^((d-2)/d).
double rope_longest_period(double theta, int head_dim);

// Returns the config with global_rope_theta replaced; weights are untouched
// and local_rope_theta keeps its value. Validates the result.
EncoderConfig scale_rope_theta(const EncoderConfig& config, double new_theta);

// Rotates dimension pairs (2i, 2i+1) of each row by positions[row] *
// theta^(-2i/head_dim). Pure; preserves per-pair norms.
Tensor2D rope_rotate(const Tensor2D& q_or_k, std::span<const int> positions, double theta);

struct AttentionMask {
    int n = 0;
    std::vector<uint8_t> allowed;  // n*n row-major; allowed[i*n+j] = i attends j

    bool at(int i, int j) const { return allowed[size_t(i) * n + j] != 0; }
};

// Global layers attend everywhere. Local layers use the band |i-j| <=
// local_window/2, and position 0 (CLS) attends and is attended globally in
// every layer.
AttentionMask attention_mask(int layer_index, int seq_len, const EncoderConfig& config);

struct LayerWeights {
    Tensor2D ln1_gain, ln1_bias;  // 1 x d
    Tensor2D wq, wk, wv, wo;      // d x d
    Tensor2D ln2_gain, ln2_bias;  // 1 x d
    Tensor2D w1;                  // d x ffn
    Tensor2D w2;                  // ffn x d
};

// Pre-norm blocks without biases on the linear maps; the residual output
// projections (wo, w2) start at zero so an untrained encoder is the identity
// on token embeddings.
struct Weights {
    EncoderConfig config;
    Tensor2D tok_embed;  // vocab x d
    std::vector<LayerWeights> layers;

    static Weights init(const EncoderConfig& config, uint64_t seed);

    // Stable ordering shared by checkpoints, the optimizer, and the tape.
    std::vector<std::pair<std::string, Tensor2D*>> named_params();
    std::vector<std::pair<std::string, const Tensor2D*>> named_params() const;
};

struct EmbeddingSet {
    std::vector<double> cls;
    std::vector<std::pair<chunker::ChunkSpan, std::vector<double>>> chunks;
    std::vector<double> mean;
};

// One forward pass over the whole sequence; all three pooled embeddings come
// from the same pass (late-chunking semantics) and are unit-normalized.
// chunk_spans must be token-mapped.
EmbeddingSet encode_document(const TokenSequence& tokens,
                             std::span<const chunker::ChunkSpan> chunk_spans,
                             const Weights& weights);

// Taped twin of encode_document for training. Parameter ids must come from
// stage_weights on the same tape.
struct TapedWeights {
    num::VarId tok_embed;
    struct Layer {
        num::VarId ln1_gain, ln1_bias, wq, wk, wv, wo, ln2_gain, ln2_bias, w1, w2;
    };
    std::vector<Layer> layers;
};
TapedWeights stage_weights(num::Tape& tape, const Weights& weights);

// Gradients in named_params order, valid after tape.backward().
std::vector<Tensor2D> collect_grads(const num::Tape& tape, const TapedWeights& staged);

struct TapedEmbeddingSet {
    num::VarId cls;                    // 1 x d, unit norm
    std::vector<num::VarId> chunks;    // 1 x d each, unit norm
    num::VarId mean;                   // 1 x d, unit norm
};
TapedEmbeddingSet encode_document_taped(num::Tape& tape, const TapedWeights& staged,
                                        const EncoderConfig& config,
                                        const TokenSequence& tokens,
                                        std::span<const chunker::ChunkSpan> chunk_spans);

}  // namespace chunkalign::encoder
