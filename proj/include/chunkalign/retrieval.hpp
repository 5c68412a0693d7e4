#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "chunkalign/chunker.hpp"
#include "chunkalign/corpus.hpp"
#include "chunkalign/encoder.hpp"

namespace chunkalign::retrieval {

enum class Mode { Single, Multi };
enum class SingleSource { Cls, Mean };

std::string mode_name(Mode mode);

// Retrieval-time document representation: one vector in single mode (CLS by
// default, mean selectable), CLS plus all chunk vectors in multi mode.
struct DocEmbedding {
    std::string doc_id;
    Mode mode = Mode::Single;
    std::vector<std::vector<double>> vectors;
};

struct EvalTask {
    std::vector<corpus::Doc> queries;
    std::vector<corpus::Doc> corpus;
    // query_id -> doc_id -> relevance grade
    std::map<std::string, std::map<std::string, int>> qrels;
};

// Word-window chunking at eval time: deterministic spans, modest chunk size
// so long documents carry many vectors.
constexpr int kEvalChunkWords = 48;
constexpr double kEvalOverlapFrac = 0.3;
chunker::ChunkerConfig eval_chunker_config();

struct EmbedWarning {
    std::string doc_id;
    std::string message;
};

// One whole-document forward pass per doc; multi mode emits cls + chunk
// vectors from that pass, single mode the CLS (or mean) vector. Documents
// longer than target_max_len are truncated with a warning record. Parallel
// over documents (frozen weights); CHUNKALIGN_THREADS caps the worker count.
std::vector<DocEmbedding> embed_corpus(const std::vector<corpus::Doc>& docs,
                                       const encoder::Weights& weights, Mode mode,
                                       const chunker::ChunkerConfig& chunk_config,
                                       uint64_t seed,
                                       SingleSource single_source = SingleSource::Cls,
                                       std::vector<EmbedWarning>* warnings = nullptr);

// Single mode: cosine (dot of unit vectors). Multi mode: max cosine over the
// document's vectors.
double score(std::span<const double> query_vec, const DocEmbedding& doc);

struct ScoredHit {
    std::string doc_id;
    double score = 0.0;
};

// Descending score, ties broken by ascending doc_id.
std::vector<ScoredHit> rank(std::span<const double> query_vec,
                            std::span<const DocEmbedding> corpus, int k);

struct NdcgResult {
    double value = 0.0;
    bool skipped = false;  // no relevant doc in qrels for this query
};

// Gain 2^rel - 1, discount log2(rank+1), normalized by the ideal DCG.
NdcgResult ndcg_at_k(std::span<const ScoredHit> ranking,
                     const std::map<std::string, int>& qrels, int k = 10);

// Synthetic long-context retrieval task: every document is filler sentences
// with one distinctive target passage at a random depth; the query repeats
// the target passage; the qrel marks the containing doc relevant.
EvalTask make_needle_task(int num_docs, int doc_length_tokens, uint64_t seed);

struct EvalRow {
    std::string mode;
    std::string query_id;
    NdcgResult ndcg;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    std::map<std::string, double> mean_ndcg;  // mode -> mean over scored queries
    bool empty_queries = false;
};

EvalReport run_eval(const EvalTask& task, const encoder::Weights& weights,
                    std::span<const Mode> modes, const chunker::ChunkerConfig& chunk_config,
                    uint64_t seed, SingleSource single_source = SingleSource::Cls);

// Tab-separated "id<TAB>text" and "query_id<TAB>doc_id<TAB>grade" files.
std::vector<corpus::Doc> read_tsv_docs(const std::filesystem::path& path);
void write_tsv_docs(const std::filesystem::path& path, const std::vector<corpus::Doc>& docs);
std::map<std::string, std::map<std::string, int>> read_qrels(const std::filesystem::path& path);
void write_qrels(const std::filesystem::path& path,
                 const std::map<std::string, std::map<std::string, int>>& qrels);
void write_report_csv(const std::filesystem::path& path, const EvalReport& report);

}  // namespace chunkalign::retrieval
