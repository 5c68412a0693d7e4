#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "chunkalign/chunker.hpp"
#include "chunkalign/corpus.hpp"
#include "chunkalign/encoder.hpp"
#include "chunkalign/optimizer.hpp"
#include "chunkalign/teacher.hpp"

namespace chunkalign::distill {

struct TrainConfig {
    int batch_size = 8;        // paper: 64
    double peak_lr = 1e-4;     // paper value
    int warmup_steps = 50;     // paper: 2000
    int total_steps = 0;       // 0 = epochs * batches per epoch
    int epochs = 2;            // paper value
    double weight_decay = 0.0; // paper value
    int max_len = 128;         // paper: 2048
    double w_cos = 1.0;
    double w_sim = 1.0;
    uint64_t seed = 42;

    // total_steps must already be resolved (> 0) here.
    void validate() const;
};

// Linear ramp 0 -> peak_lr over warmup_steps, then linear decay to 0 at
// total_steps. Steps past total_steps are a schedule error.
double lr_at(long step, const TrainConfig& config);

// A document prepared for one training run: chunked, tokenized, truncated,
// with teacher targets selected for the spans that survived token mapping.
struct PreparedDoc {
    std::string doc_id;
    encoder::TokenSequence tokens;
    std::vector<chunker::ChunkSpan> spans;       // token-mapped
    std::vector<std::string> chunk_texts;        // per plan, pre-drop
    Tensor2D teacher_cos_rows;                   // (1+chunks) x model_dim, bridged
    Tensor2D teacher_gram_rows;                  // (1+chunks) x teacher_dim
};

PreparedDoc prepare_doc(const corpus::Doc& doc, const chunker::ChunkerConfig& chunker_config,
                        TeacherSource& teacher, const TrainConfig& train_config,
                        const encoder::EncoderConfig& encoder_config,
                        const Tensor2D* bridge /* model_dim x teacher_dim or null */);

// Frozen seeded random projection used for Eq.-1 targets when the teacher
// dimension differs from the student dimension. Gram targets always use the
// raw teacher rows.
Tensor2D make_teacher_bridge(int model_dim, int teacher_dim, uint64_t seed);

struct TrainResult {
    long steps = 0;
    double final_total_loss = 0.0;
    double heldout_cls_cosine = 0.0;    // NaN when no held-out docs
    double heldout_chunk_cosine = 0.0;  // NaN when no held-out chunks
    std::vector<double> step_total_losses;
};

// Full distillation run: chunk, encode, align, descend. Deterministic given
// the seed. Writes the checkpoint, an optimizer-state sidecar
// (<checkpoint>.opt) and a step,lr,cosine_loss,similarity_loss,total_loss
// CSV.
TrainResult train(const std::vector<corpus::Doc>& train_docs,
                  const std::vector<corpus::Doc>& heldout_docs,
                  const chunker::ChunkerConfig& chunker_config, TeacherSource& teacher,
                  const TrainConfig& train_config, const encoder::EncoderConfig& encoder_config,
                  const std::filesystem::path& checkpoint_path,
                  const std::filesystem::path& metrics_csv_path);

// Mean cosine of student CLS vs teacher whole and student chunks vs teacher
// chunks over a document set, using the same preparation as training.
struct AlignmentScore {
    double cls_cosine = 0.0;
    double chunk_cosine = 0.0;
    long chunk_count = 0;
};
AlignmentScore score_alignment(const std::vector<corpus::Doc>& docs,
                               const chunker::ChunkerConfig& chunker_config,
                               TeacherSource& teacher, const TrainConfig& train_config,
                               const encoder::Weights& weights);

}  // namespace chunkalign::distill
