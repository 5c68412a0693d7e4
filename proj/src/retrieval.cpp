#include "chunkalign/retrieval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "chunkalign/errors.hpp"
#include "chunkalign/tokenizer.hpp"

namespace chunkalign::retrieval {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DimensionError("score: query dim " + std::to_string(a.size()) + " vs doc dim " +
                             std::to_string(b.size()));
    }
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

int worker_count(size_t jobs) {
    if (jobs <= 1) return 1;
    unsigned n = std::thread::hardware_concurrency();
    if (n == 0) n = 1;
    if (const char* env = std::getenv("CHUNKALIGN_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1) n = std::min<unsigned>(n, unsigned(cap));
    }
    return int(std::min<size_t>(n, jobs));
}

encoder::EmbeddingSet encode_one(const corpus::Doc& doc, const encoder::Weights& weights,
                                 const chunker::ChunkerConfig& chunk_config, uint64_t seed,
                                 std::vector<EmbedWarning>* warnings) {
    const uint64_t doc_seed = derive_seed(seed, "chunk", fnv1a64(doc.id));
    const chunker::ChunkResult chunked = chunker::chunk_document(doc.text, doc_seed,
                                                                 chunk_config);
    encoder::TokenSequence tokens = encoder::tokenize(doc.text, weights.config.vocab_size);
    if (tokens.size() > weights.config.target_max_len) {
        if (warnings) {
            warnings->push_back({doc.id, "truncated from " + std::to_string(tokens.size()) +
                                             " to " +
                                             std::to_string(weights.config.target_max_len) +
                                             " tokens"});
        }
        tokens = encoder::truncate(tokens, weights.config.target_max_len);
    }
    const std::vector<chunker::ChunkSpan> spans =
        chunker::map_spans_to_tokens(chunked.spans, tokens);
    return encoder::encode_document(tokens, spans, weights);
}

}  // namespace

std::string mode_name(Mode mode) { return mode == Mode::Single ? "single" : "multi"; }

chunker::ChunkerConfig eval_chunker_config() {
    chunker::ChunkerConfig cfg;
    cfg.p_recursive = 0.0;  // word windows: deterministic token extents
    cfg.size_min = kEvalChunkWords;
    cfg.size_max = kEvalChunkWords;
    cfg.overlap_frac_min = kEvalOverlapFrac;
    cfg.overlap_frac_max = kEvalOverlapFrac;
    return cfg;
}

std::vector<DocEmbedding> embed_corpus(const std::vector<corpus::Doc>& docs,
                                       const encoder::Weights& weights, Mode mode,
                                       const chunker::ChunkerConfig& chunk_config,
                                       uint64_t seed, SingleSource single_source,
                                       std::vector<EmbedWarning>* warnings) {
    std::vector<DocEmbedding> out(docs.size());
    std::vector<std::vector<EmbedWarning>> per_doc_warnings(docs.size());

    const int threads = worker_count(docs.size());
    std::atomic<size_t> next{0};
    auto work = [&]() {
        while (true) {
            const size_t i = next.fetch_add(1);
            if (i >= docs.size()) break;
            const encoder::EmbeddingSet enc =
                encode_one(docs[i], weights, chunk_config, seed, &per_doc_warnings[i]);
            DocEmbedding de;
            de.doc_id = docs[i].id;
            de.mode = mode;
            if (mode == Mode::Single) {
                de.vectors.push_back(single_source == SingleSource::Cls ? enc.cls : enc.mean);
            } else {
                de.vectors.push_back(enc.cls);
                for (const auto& [span, vec] : enc.chunks) de.vectors.push_back(vec);
            }
            out[i] = std::move(de);
        }
    };
    if (threads == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (warnings) {
        for (auto& w : per_doc_warnings) {
            warnings->insert(warnings->end(), w.begin(), w.end());
        }
    }
    return out;
}

double score(std::span<const double> query_vec, const DocEmbedding& doc) {
    if (doc.vectors.empty()) {
        throw DegenerateInputError("score: doc " + doc.doc_id + " has no vectors");
    }
    if (doc.mode == Mode::Single) return dot(query_vec, doc.vectors[0]);
    double best = -2.0;
    for (const auto& v : doc.vectors) best = std::max(best, dot(query_vec, v));
    return best;
}

std::vector<ScoredHit> rank(std::span<const double> query_vec,
                            std::span<const DocEmbedding> corpus, int k) {
    if (k < 1) throw ConfigError("rank: k must be >= 1");
    std::vector<ScoredHit> hits;
    hits.reserve(corpus.size());
    for (const auto& doc : corpus) hits.push_back({doc.doc_id, score(query_vec, doc)});
    std::sort(hits.begin(), hits.end(), [](const ScoredHit& a, const ScoredHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    if (int(hits.size()) > k) hits.resize(size_t(k));
    return hits;
}

NdcgResult ndcg_at_k(std::span<const ScoredHit> ranking,
                     const std::map<std::string, int>& qrels, int k) {
    if (k < 1) throw ConfigError("ndcg_at_k: k must be >= 1");
    std::vector<int> grades;
    for (const auto& [doc_id, grade] : qrels) {
        if (grade > 0) grades.push_back(grade);
    }
    if (grades.empty()) return {0.0, true};

    double dcg = 0.0;
    const int depth = std::min<int>(k, int(ranking.size()));
    for (int r = 0; r < depth; ++r) {
        const auto it = qrels.find(ranking[size_t(r)].doc_id);
        if (it == qrels.end() || it->second <= 0) continue;
        dcg += (std::pow(2.0, double(it->second)) - 1.0) / std::log2(double(r) + 2.0);
    }
    std::sort(grades.begin(), grades.end(), std::greater<>());
    double idcg = 0.0;
    const int ideal_depth = std::min<int>(k, int(grades.size()));
    for (int r = 0; r < ideal_depth; ++r) {
        idcg += (std::pow(2.0, double(grades[size_t(r)])) - 1.0) / std::log2(double(r) + 2.0);
    }
    return {dcg / idcg, false};
}

EvalTask make_needle_task(int num_docs, int doc_length_tokens, uint64_t seed) {
    if (num_docs < 0) throw ConfigError("make_needle_task: negative num_docs");
    if (num_docs > 0 && doc_length_tokens < 4 * kEvalChunkWords) {
        throw ConfigError("make_needle_task: doc_length " + std::to_string(doc_length_tokens) +
                          " below 4x chunk size " + std::to_string(kEvalChunkWords));
    }
    EvalTask task;
    const auto pool = corpus::word_pool();
    for (int d = 0; d < num_docs; ++d) {
        Rng rng(derive_seed(seed, "needle", uint64_t(d)));
        auto sample_sentence = [&](int words) {
            std::string s;
            for (int w = 0; w < words; ++w) {
                if (w > 0) s += ' ';
                s += pool[size_t(rng.uniform_int(0, int(pool.size()) - 1))];
            }
            s += '.';
            return s;
        };

        const std::string target = sample_sentence(12);

        std::vector<std::string> sentences;
        int tokens = 0;
        while (tokens < doc_length_tokens) {
            const int words = rng.uniform_int(6, 10);
            sentences.push_back(sample_sentence(words));
            tokens += words + 1;  // trailing period is its own token
        }
        const int depth = rng.uniform_int(0, int(sentences.size()));
        sentences.insert(sentences.begin() + depth, target);

        std::string text;
        for (size_t s = 0; s < sentences.size(); ++s) {
            if (s > 0) text += ' ';
            text += sentences[s];
        }

        char doc_id[16], query_id[16];
        std::snprintf(doc_id, sizeof(doc_id), "ndoc%04d", d);
        std::snprintf(query_id, sizeof(query_id), "q%04d", d);
        task.corpus.push_back({doc_id, std::move(text)});
        task.queries.push_back({query_id, target});
        task.qrels[query_id][doc_id] = 1;
    }
    return task;
}

EvalReport run_eval(const EvalTask& task, const encoder::Weights& weights,
                    std::span<const Mode> modes, const chunker::ChunkerConfig& chunk_config,
                    uint64_t seed, SingleSource single_source) {
    EvalReport report;
    if (task.queries.empty()) {
        report.empty_queries = true;
        return report;
    }

    // Queries are encoded once, always as their CLS vector.
    std::vector<std::vector<double>> query_vecs;
    {
        const std::vector<DocEmbedding> qe =
            embed_corpus(task.queries, weights, Mode::Single, chunk_config, seed,
                         SingleSource::Cls);
        for (const auto& e : qe) query_vecs.push_back(e.vectors[0]);
    }

    for (Mode mode : modes) {
        const std::vector<DocEmbedding> corpus_emb =
            embed_corpus(task.corpus, weights, mode, chunk_config, seed, single_source);
        double sum = 0.0;
        long counted = 0;
        for (size_t qi = 0; qi < task.queries.size(); ++qi) {
            const auto& query = task.queries[qi];
            const std::vector<ScoredHit> hits = rank(query_vecs[qi], corpus_emb, 10);
            static const std::map<std::string, int> kEmpty;
            const auto qit = task.qrels.find(query.id);
            const NdcgResult res = ndcg_at_k(hits, qit == task.qrels.end() ? kEmpty : qit->second);
            report.rows.push_back({mode_name(mode), query.id, res});
            if (!res.skipped) {
                sum += res.value;
                ++counted;
            }
        }
        report.mean_ndcg[mode_name(mode)] = counted ? sum / double(counted) : 0.0;
    }
    return report;
}

std::vector<corpus::Doc> read_tsv_docs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<corpus::Doc> docs;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const size_t tab = line.find('\t');
        if (tab == std::string::npos || tab == 0) {
            throw ParseError(path.string() + " line " + std::to_string(line_no) +
                             ": expected id<TAB>text");
        }
        docs.push_back({line.substr(0, tab), line.substr(tab + 1)});
    }
    return docs;
}

void write_tsv_docs(const std::filesystem::path& path, const std::vector<corpus::Doc>& docs) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    for (const auto& doc : docs) {
        std::string flat = doc.text;
        // Keep records line-delimited: embedded newlines become spaces.
        for (char& c : flat) {
            if (c == '\n' || c == '\t') c = ' ';
        }
        out << doc.id << '\t' << flat << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
}

std::map<std::string, std::map<std::string, int>> read_qrels(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::map<std::string, std::map<std::string, int>> qrels;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const size_t t1 = line.find('\t');
        const size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos) {
            throw ParseError(path.string() + " line " + std::to_string(line_no) +
                             ": expected query_id<TAB>doc_id<TAB>grade");
        }
        try {
            qrels[line.substr(0, t1)][line.substr(t1 + 1, t2 - t1 - 1)] =
                std::stoi(line.substr(t2 + 1));
        } catch (const std::exception&) {
            throw ParseError(path.string() + " line " + std::to_string(line_no) +
                             ": bad grade '" + line.substr(t2 + 1) + "'");
        }
    }
    return qrels;
}

void write_qrels(const std::filesystem::path& path,
                 const std::map<std::string, std::map<std::string, int>>& qrels) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    for (const auto& [qid, docs] : qrels) {
        for (const auto& [doc_id, grade] : docs) {
            out << qid << '\t' << doc_id << '\t' << grade << '\n';
        }
    }
    if (!out) throw IoError("write failed for " + path.string());
}

void write_report_csv(const std::filesystem::path& path, const EvalReport& report) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "mode,query_id,ndcg_at_10\n";
    char buf[64];
    for (const auto& row : report.rows) {
        if (row.ndcg.skipped) {
            out << row.mode << ',' << row.query_id << ",skipped\n";
            continue;
        }
        std::snprintf(buf, sizeof(buf), "%.6f", row.ndcg.value);
        out << row.mode << ',' << row.query_id << ',' << buf << '\n';
    }
    for (const auto& [mode, mean] : report.mean_ndcg) {
        std::snprintf(buf, sizeof(buf), "%.6f", mean);
        out << mode << ",mean," << buf << '\n';
    }
    if (report.empty_queries) out << "flag,empty_queries,1\n";
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace chunkalign::retrieval
