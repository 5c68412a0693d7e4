#include "chunkalign/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "chunkalign/checkpoint.hpp"
#include "chunkalign/errors.hpp"
#include "chunkalign/kernels.hpp"
#include "chunkalign/losses.hpp"
#include "chunkalign/tape.hpp"

namespace chunkalign::distill {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

// Fisher-Yates with our own RNG so shuffles are platform-stable.
void shuffle_indices(std::vector<int>& idx, Rng& rng) {
    for (int i = int(idx.size()) - 1; i > 0; --i) {
        std::swap(idx[size_t(i)], idx[size_t(rng.uniform_int(0, i))]);
    }
}

Tensor2D stack_rows(const std::vector<const Tensor2D*>& parts) {
    int total = 0;
    const int cols = parts.empty() ? 0 : parts[0]->cols;
    for (const Tensor2D* p : parts) total += p->rows;
    Tensor2D out(total, cols);
    int r = 0;
    for (const Tensor2D* p : parts) {
        for (int i = 0; i < p->rows; ++i, ++r) {
            for (int j = 0; j < cols; ++j) out.at(r, j) = p->at(i, j);
        }
    }
    return out;
}

}  // namespace

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
    if (peak_lr <= 0.0) throw ConfigError("train config: peak_lr must be > 0");
    if (epochs < 1) throw ConfigError("train config: epochs must be >= 1");
    if (total_steps < 1) throw ConfigError("train config: total_steps must be >= 1");
    if (warmup_steps < 0 || warmup_steps >= total_steps) {
        throw ConfigError("train config: need 0 <= warmup_steps < total_steps (" +
                          std::to_string(warmup_steps) + " vs " + std::to_string(total_steps) +
                          ")");
    }
    if (weight_decay < 0.0) throw ConfigError("train config: weight_decay must be >= 0");
    if (max_len < 4) throw ConfigError("train config: max_len must be >= 4");
}

double lr_at(long step, const TrainConfig& config) {
    if (step < 0 || step > config.total_steps) {
        throw ScheduleError("lr_at: step " + std::to_string(step) + " outside [0, " +
                            std::to_string(config.total_steps) + "]");
    }
    if (step <= config.warmup_steps) {
        if (config.warmup_steps == 0) return config.peak_lr;
        return config.peak_lr * double(step) / double(config.warmup_steps);
    }
    return config.peak_lr * double(config.total_steps - step) /
           double(config.total_steps - config.warmup_steps);
}

Tensor2D make_teacher_bridge(int model_dim, int teacher_dim, uint64_t seed) {
    Rng rng(derive_seed(seed, "teacher-bridge"));
    const double scale = 1.0 / std::sqrt(double(teacher_dim));
    return Tensor2D::random_normal(model_dim, teacher_dim, rng, scale);
}

PreparedDoc prepare_doc(const corpus::Doc& doc, const chunker::ChunkerConfig& chunker_config,
                        TeacherSource& teacher, const TrainConfig& train_config,
                        const encoder::EncoderConfig& encoder_config, const Tensor2D* bridge) {
    PreparedDoc out;
    out.doc_id = doc.id;

    const uint64_t doc_seed = derive_seed(train_config.seed, "chunk", fnv1a64(doc.id));
    const chunker::ChunkResult chunked = chunker::chunk_document(doc.text, doc_seed,
                                                                 chunker_config);

    out.tokens = encoder::truncate(
        encoder::tokenize(doc.text, encoder_config.vocab_size),
        std::min(train_config.max_len, encoder_config.target_max_len));

    std::vector<int> dropped;
    out.spans = chunker::map_spans_to_tokens(chunked.spans, out.tokens, &dropped);

    for (const auto& span : chunked.spans) {
        out.chunk_texts.push_back(
            doc.text.substr(size_t(span.char_start), size_t(span.char_end - span.char_start)));
    }
    // The teacher answers for the full plan; rows for truncation-dropped
    // spans are discarded afterwards to keep index alignment.
    TeacherRecord record = teacher.encode_document(doc.id, doc.text, out.chunk_texts);
    if (record.chunks.size() != chunked.spans.size()) {
        throw AlignmentError("teacher returned " + std::to_string(record.chunks.size()) +
                             " chunk embeddings for " + std::to_string(chunked.spans.size()) +
                             " spans of doc " + doc.id);
    }

    std::vector<std::vector<double>> rows;
    rows.push_back(record.whole);
    size_t next_drop = 0;
    for (size_t i = 0; i < record.chunks.size(); ++i) {
        if (next_drop < dropped.size() && dropped[next_drop] == int(i)) {
            ++next_drop;
            continue;
        }
        rows.push_back(record.chunks[i]);
    }
    out.teacher_gram_rows = Tensor2D::from_rows(rows);

    if (bridge) {
        Tensor2D projected = num::matmul_nt(out.teacher_gram_rows, *bridge);
        out.teacher_cos_rows = num::l2_normalize_rows(projected);
    } else {
        out.teacher_cos_rows = out.teacher_gram_rows;
    }
    return out;
}

namespace {

struct Pipeline {
    const Tensor2D* bridge;
    Tensor2D bridge_storage;
};

}  // namespace

TrainResult train(const std::vector<corpus::Doc>& train_docs,
                  const std::vector<corpus::Doc>& heldout_docs,
                  const chunker::ChunkerConfig& chunker_config, TeacherSource& teacher,
                  const TrainConfig& train_config_in,
                  const encoder::EncoderConfig& encoder_config,
                  const std::filesystem::path& checkpoint_path,
                  const std::filesystem::path& metrics_csv_path) {
    if (train_docs.empty()) throw DegenerateInputError("train: empty corpus");
    encoder_config.validate();
    chunker_config.validate();

    TrainConfig train_config = train_config_in;
    const long batches_per_epoch =
        (long(train_docs.size()) + train_config.batch_size - 1) / train_config.batch_size;
    const long derived_steps = batches_per_epoch * train_config.epochs;
    if (train_config.total_steps == 0) train_config.total_steps = int(derived_steps);
    if (derived_steps > train_config.total_steps) {
        throw ConfigError("train config: schedule horizon " +
                          std::to_string(train_config.total_steps) + " shorter than run (" +
                          std::to_string(derived_steps) + " steps)");
    }
    train_config.validate();

    Pipeline pipe{nullptr, Tensor2D()};
    if (teacher.dim() != encoder_config.model_dim) {
        pipe.bridge_storage = make_teacher_bridge(encoder_config.model_dim, teacher.dim(),
                                                  train_config.seed);
        pipe.bridge = &pipe.bridge_storage;
    }

    std::vector<PreparedDoc> prepared;
    prepared.reserve(train_docs.size());
    for (const auto& doc : train_docs) {
        prepared.push_back(prepare_doc(doc, chunker_config, teacher, train_config,
                                       encoder_config, pipe.bridge));
    }

    encoder::Weights weights = encoder::Weights::init(encoder_config, train_config.seed);
    auto named = weights.named_params();
    std::vector<Tensor2D*> params;
    for (auto& [name, tensor] : named) params.push_back(tensor);

    StableAdamW optimizer;

    std::ofstream metrics(metrics_csv_path, std::ios::trunc);
    if (!metrics) throw IoError("cannot open metrics file " + metrics_csv_path.string());
    metrics << "step,lr,cosine_loss,similarity_loss,total_loss\n";

    TrainResult result;
    std::vector<int> order(train_docs.size());
    std::iota(order.begin(), order.end(), 0);

    long step = 0;
    for (int epoch = 0; epoch < train_config.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(train_config.seed, "shuffle", uint64_t(epoch)));
        shuffle_indices(order, shuffle_rng);

        for (long b = 0; b < batches_per_epoch; ++b) {
            const size_t lo = size_t(b) * train_config.batch_size;
            const size_t hi = std::min(lo + train_config.batch_size, order.size());

            num::Tape tape;
            const encoder::TapedWeights staged = encoder::stage_weights(tape, weights);

            std::vector<num::VarId> student_rows;
            std::vector<const Tensor2D*> cos_targets;
            std::vector<const Tensor2D*> gram_targets;
            for (size_t di = lo; di < hi; ++di) {
                const PreparedDoc& pd = prepared[size_t(order[di])];
                try {
                    const encoder::TapedEmbeddingSet enc = encoder::encode_document_taped(
                        tape, staged, encoder_config, pd.tokens, pd.spans);
                    student_rows.push_back(enc.cls);
                    for (num::VarId chunk : enc.chunks) student_rows.push_back(chunk);
                } catch (const std::exception& e) {
                    throw ContractError("train step " + std::to_string(step) + " doc " +
                                        pd.doc_id + ": " + e.what());
                }
                cos_targets.push_back(&pd.teacher_cos_rows);
                gram_targets.push_back(&pd.teacher_gram_rows);
            }

            const num::VarId stacked = tape.concat_rows(student_rows);
            const Tensor2D cos_matrix = stack_rows(cos_targets);
            const Tensor2D gram_matrix = stack_rows(gram_targets);

            const num::VarId cos_id = cosine_loss_op(tape, stacked, cos_matrix);
            const num::VarId sim_id = similarity_loss_op(tape, stacked, gram_matrix);
            const num::VarId total = tape.add(tape.scale(cos_id, train_config.w_cos),
                                              tape.scale(sim_id, train_config.w_sim));
            tape.backward(total);

            const std::vector<Tensor2D> grads = encoder::collect_grads(tape, staged);
            std::vector<const Tensor2D*> grad_ptrs;
            for (const auto& g : grads) grad_ptrs.push_back(&g);

            const double lr = lr_at(step, train_config);
            optimizer.step(params, grad_ptrs, lr, train_config.weight_decay);

            const double cos_val = tape.value(cos_id).at(0, 0);
            const double sim_val = tape.value(sim_id).at(0, 0);
            const double total_val = tape.value(total).at(0, 0);
            char line[160];
            std::snprintf(line, sizeof(line), "%ld,%.10e,%.10e,%.10e,%.10e\n", step, lr,
                          cos_val, sim_val, total_val);
            metrics << line;
            result.step_total_losses.push_back(total_val);
            result.final_total_loss = total_val;
            ++step;
        }
    }
    result.steps = step;
    metrics.close();

    encoder::save_checkpoint(checkpoint_path, weights);
    {
        std::vector<std::string> header = {"optimizer = StableAdamW",
                                           "step = " + std::to_string(optimizer.step_count())};
        std::vector<std::pair<std::string, const Tensor2D*>> blocks;
        for (size_t i = 0; i < named.size(); ++i) {
            blocks.emplace_back(named[i].first + ".m", &optimizer.first_moments()[i]);
            blocks.emplace_back(named[i].first + ".v", &optimizer.second_moments()[i]);
        }
        encoder::write_block_file(checkpoint_path.string() + ".opt", header, blocks);
    }

    result.heldout_cls_cosine = std::numeric_limits<double>::quiet_NaN();
    result.heldout_chunk_cosine = std::numeric_limits<double>::quiet_NaN();
    if (!heldout_docs.empty()) {
        const AlignmentScore score = score_alignment(heldout_docs, chunker_config, teacher,
                                                     train_config, weights);
        result.heldout_cls_cosine = score.cls_cosine;
        result.heldout_chunk_cosine = score.chunk_cosine;
    }
    return result;
}

AlignmentScore score_alignment(const std::vector<corpus::Doc>& docs,
                               const chunker::ChunkerConfig& chunker_config,
                               TeacherSource& teacher, const TrainConfig& train_config,
                               const encoder::Weights& weights) {
    Tensor2D bridge_storage;
    const Tensor2D* bridge = nullptr;
    if (teacher.dim() != weights.config.model_dim) {
        bridge_storage = make_teacher_bridge(weights.config.model_dim, teacher.dim(),
                                             train_config.seed);
        bridge = &bridge_storage;
    }
    double cls_sum = 0.0;
    double chunk_sum = 0.0;
    long chunk_count = 0;
    long doc_count = 0;
    for (const auto& doc : docs) {
        const PreparedDoc pd = prepare_doc(doc, chunker_config, teacher, train_config,
                                           weights.config, bridge);
        const encoder::EmbeddingSet enc = encoder::encode_document(pd.tokens, pd.spans, weights);
        cls_sum += dot(enc.cls, pd.teacher_cos_rows.row_span(0));
        ++doc_count;
        for (size_t c = 0; c < enc.chunks.size(); ++c) {
            chunk_sum += dot(enc.chunks[c].second, pd.teacher_cos_rows.row_span(int(c) + 1));
            ++chunk_count;
        }
    }
    AlignmentScore score;
    score.cls_cosine = doc_count ? cls_sum / double(doc_count)
                                 : std::numeric_limits<double>::quiet_NaN();
    score.chunk_cosine = chunk_count ? chunk_sum / double(chunk_count)
                                     : std::numeric_limits<double>::quiet_NaN();
    score.chunk_count = chunk_count;
    return score;
}

}  // namespace chunkalign::distill
