#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "chunkalign/checkpoint.hpp"
#include "chunkalign/chunker.hpp"
#include "chunkalign/cli.hpp"
#include "chunkalign/corpus.hpp"
#include "chunkalign/encoder.hpp"
#include "chunkalign/gradcheck_suite.hpp"
#include "chunkalign/losses.hpp"
#include "chunkalign/retrieval.hpp"
#include "chunkalign/teacher.hpp"
#include "chunkalign/trainer.hpp"

namespace py = pybind11;
using namespace chunkalign;

namespace {

Tensor2D rows_to_tensor(const std::vector<std::vector<double>>& rows) {
    return Tensor2D::from_rows(rows);
}

std::vector<std::vector<double>> tensor_to_rows(const Tensor2D& t) {
    std::vector<std::vector<double>> rows;
    rows.reserve(size_t(t.rows));
    for (int r = 0; r < t.rows; ++r) {
        rows.emplace_back(t.row(r), t.row(r) + t.cols);
    }
    return rows;
}

// Checkpoint-backed encoder with the document pipeline (tokenize, chunk,
// truncate, encode) behind one call.
class Model {
public:
    explicit Model(const std::filesystem::path& checkpoint)
        : weights_(encoder::load_checkpoint(checkpoint)) {}

    py::dict encode(const std::string& text, int chunk_words, double overlap_frac,
                    uint64_t seed) const {
        chunker::ChunkerConfig chunk_config = retrieval::eval_chunker_config();
        chunk_config.size_min = chunk_words;
        chunk_config.size_max = chunk_words;
        chunk_config.overlap_frac_min = overlap_frac;
        chunk_config.overlap_frac_max = overlap_frac;
        const chunker::ChunkResult chunked =
            chunker::chunk_document(text, derive_seed(seed, "chunk"), chunk_config);
        encoder::TokenSequence tokens = encoder::tokenize(text, weights_.config.vocab_size);
        if (tokens.size() > weights_.config.target_max_len) {
            tokens = encoder::truncate(tokens, weights_.config.target_max_len);
        }
        const std::vector<chunker::ChunkSpan> spans =
            chunker::map_spans_to_tokens(chunked.spans, tokens);
        const encoder::EmbeddingSet enc = encoder::encode_document(tokens, spans, weights_);

        py::dict out;
        out["cls"] = enc.cls;
        out["mean"] = enc.mean;
        py::list chunks;
        for (const auto& [span, vec] : enc.chunks) {
            py::dict c;
            c["char_start"] = span.char_start;
            c["char_end"] = span.char_end;
            c["token_start"] = span.token_start;
            c["token_end"] = span.token_end;
            c["vector"] = vec;
            chunks.append(c);
        }
        out["chunks"] = chunks;
        return out;
    }

    int model_dim() const { return weights_.config.model_dim; }

private:
    encoder::Weights weights_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "chunk-alignment distillation core: tokenizer, chunkers, losses, "
              "encoder inference and the evaluation pipeline";

    py::register_exception<DimensionError>(m, "DimensionError");
    py::register_exception<DegenerateInputError>(m, "DegenerateInputError");
    py::register_exception<ConfigError>(m, "ConfigError");

    m.def("tokenize",
          [](const std::string& text, int vocab_size) {
              const encoder::TokenSequence ts = encoder::tokenize(text, vocab_size);
              py::list out;
              for (int p = 0; p < ts.size(); ++p) {
                  out.append(py::make_tuple(ts.ids[size_t(p)], ts.char_offsets[size_t(p)].first,
                                            ts.char_offsets[size_t(p)].second));
              }
              return out;
          },
          py::arg("text"), py::arg("vocab_size") = 4096,
          "Token (id, char_start, char_end) triples; specials carry (-1, -1).");

    m.def("split_by_word",
          [](const std::string& text, int chunk_size, int overlap) {
              py::list out;
              for (const auto& s : chunker::split_by_word(text, chunk_size, overlap)) {
                  out.append(py::make_tuple(s.char_start, s.char_end));
              }
              return out;
          },
          py::arg("text"), py::arg("chunk_size"), py::arg("overlap"));

    m.def("recursive_split",
          [](const std::string& text, int chunk_size, int overlap) {
              py::list out;
              for (const auto& s : chunker::recursive_split(text, chunk_size, overlap,
                                                            chunker::default_separators())) {
                  out.append(py::make_tuple(s.char_start, s.char_end));
              }
              return out;
          },
          py::arg("text"), py::arg("chunk_size"), py::arg("overlap"));

    m.def("cosine_loss",
          [](const std::vector<std::vector<double>>& student,
             const std::vector<std::vector<double>>& teacher) {
              return distill::cosine_loss(rows_to_tensor(student), rows_to_tensor(teacher))
                  .value;
          },
          py::arg("student_rows"), py::arg("teacher_rows"));

    m.def("similarity_loss",
          [](const std::vector<std::vector<double>>& s,
             const std::vector<std::vector<double>>& t) {
              return distill::similarity_loss(rows_to_tensor(s), rows_to_tensor(t)).value;
          },
          py::arg("student_rows"), py::arg("teacher_rows"));

    py::class_<distill::OracleTeacher>(m, "OracleTeacher")
        .def(py::init<int, uint64_t, int>(), py::arg("dim"), py::arg("seed"),
             py::arg("buckets") = 4096)
        .def("encode",
             [](const distill::OracleTeacher& t, const std::string& text) {
                 return t.encode(text);
             },
             py::arg("text"))
        .def_property_readonly("dim", &distill::OracleTeacher::dim);

    m.def("ndcg_at_k",
          [](const std::vector<std::pair<std::string, double>>& ranking,
             const std::map<std::string, int>& qrels, int k) {
              std::vector<retrieval::ScoredHit> hits;
              for (const auto& [id, s] : ranking) hits.push_back({id, s});
              const retrieval::NdcgResult res = retrieval::ndcg_at_k(hits, qrels, k);
              return py::make_tuple(res.value, res.skipped);
          },
          py::arg("ranking"), py::arg("qrels"), py::arg("k") = 10,
          "(value, skipped) for a ranking of (doc_id, score) pairs.");

    m.def("make_training_corpus",
          [](int num_docs, uint64_t seed) {
              py::list out;
              for (const auto& d : corpus::make_training_corpus(num_docs, seed)) {
                  out.append(py::make_tuple(d.id, d.text));
              }
              return out;
          },
          py::arg("num_docs"), py::arg("seed"));

    m.def("make_needle_task",
          [](int num_docs, int doc_length_tokens, uint64_t seed) {
              const retrieval::EvalTask task =
                  retrieval::make_needle_task(num_docs, doc_length_tokens, seed);
              py::dict out;
              py::list queries, docs;
              for (const auto& q : task.queries) queries.append(py::make_tuple(q.id, q.text));
              for (const auto& d : task.corpus) docs.append(py::make_tuple(d.id, d.text));
              out["queries"] = queries;
              out["corpus"] = docs;
              out["qrels"] = task.qrels;
              return out;
          },
          py::arg("num_docs"), py::arg("doc_length_tokens"), py::arg("seed"));

    py::class_<Model>(m, "Model")
        .def(py::init<const std::filesystem::path&>(), py::arg("checkpoint"))
        .def("encode", &Model::encode, py::arg("text"),
             py::arg("chunk_words") = retrieval::kEvalChunkWords,
             py::arg("overlap_frac") = retrieval::kEvalOverlapFrac, py::arg("seed") = 0)
        .def_property_readonly("model_dim", &Model::model_dim);

    m.def("gradcheck",
          [](uint64_t seed) {
              py::list out;
              for (const auto& r : num::run_gradcheck_suite(seed)) {
                  out.append(py::make_tuple(r.name, r.max_rel_err, r.tolerance, r.pass));
              }
              return out;
          },
          py::arg("seed") = 20240601);

    m.def("cli_run", &cli::run, py::arg("args"),
          "Run a CLI subcommand in-process; returns the exit code.");
}
