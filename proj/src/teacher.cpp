#include "chunkalign/teacher.hpp"

#include <cctype>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "chunkalign/errors.hpp"
#include "chunkalign/rng.hpp"

namespace chunkalign::distill {

namespace {

void normalize_in_place(std::vector<double>& v, const std::string& what) {
    double norm_sq = 0.0;
    for (double x : v) norm_sq += x * x;
    if (norm_sq == 0.0) throw DegenerateInputError("zero-norm teacher vector: " + what);
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (double& x : v) x *= inv;
}

}  // namespace

OracleTeacher::OracleTeacher(int dim, uint64_t seed, int buckets)
    : dim_(dim), buckets_(buckets) {
    if (dim < 1 || buckets < 8) throw ConfigError("oracle teacher: bad dim/buckets");
    Rng rng(derive_seed(seed, "oracle-teacher"));
    const double scale = 1.0 / std::sqrt(double(buckets));
    projection_ = Tensor2D::random_normal(dim, buckets, rng, scale);
}

std::vector<double> OracleTeacher::encode(std::string_view text) const {
    std::vector<double> counts(size_t(buckets_), 0.0);
    size_t i = 0;
    bool any_word = false;
    while (i < text.size()) {
        if (std::isspace(static_cast<unsigned char>(text[i]))) {
            ++i;
            continue;
        }
        size_t j = i + 1;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        any_word = true;
        std::string padded = "^" + std::string(text.substr(i, j - i)) + "$";
        for (size_t t = 0; t + 3 <= padded.size(); ++t) {
            counts[fnv1a64(std::string_view(padded).substr(t, 3)) % uint64_t(buckets_)] += 1.0;
        }
        i = j;
    }
    if (!any_word) throw DegenerateInputError("oracle teacher: empty text");

    std::vector<double> out(size_t(dim_), 0.0);
    for (int b = 0; b < buckets_; ++b) {
        const double c = counts[size_t(b)];
        if (c == 0.0) continue;
        for (int d = 0; d < dim_; ++d) out[size_t(d)] += projection_.at(d, b) * c;
    }
    normalize_in_place(out, "oracle encode");
    return out;
}

TeacherRecord OracleTeacherSource::encode_document(const std::string& doc_id,
                                                   std::string_view text,
                                                   const std::vector<std::string>& chunk_texts) {
    TeacherRecord rec;
    rec.doc_id = doc_id;
    rec.teacher_dim = oracle_.dim();
    rec.whole = oracle_.encode(text);
    rec.chunks.reserve(chunk_texts.size());
    for (const auto& chunk : chunk_texts) rec.chunks.push_back(oracle_.encode(chunk));
    return rec;
}

std::vector<TeacherRecord> load_teacher_jsonl(
    const std::filesystem::path& path, const std::map<std::string, int>* expected_chunk_counts) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open teacher file " + path.string());
    std::vector<TeacherRecord> records;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError("teacher file " + path.string() + " line " +
                             std::to_string(line_no) + ": " + e.what());
        }
        if (!j.contains("doc_id") || !j.contains("whole") || !j.contains("chunks")) {
            throw ParseError("teacher file " + path.string() + " line " +
                             std::to_string(line_no) + ": missing doc_id/whole/chunks");
        }
        TeacherRecord rec;
        rec.doc_id = j["doc_id"].get<std::string>();
        rec.whole = j["whole"].get<std::vector<double>>();
        rec.teacher_dim = int(rec.whole.size());
        if (rec.teacher_dim == 0) {
            throw ParseError("teacher file " + path.string() + " line " +
                             std::to_string(line_no) + ": empty whole embedding");
        }
        normalize_in_place(rec.whole, rec.doc_id + "/whole");
        for (const auto& chunk : j["chunks"]) {
            std::vector<double> v = chunk.get<std::vector<double>>();
            if (int(v.size()) != rec.teacher_dim) {
                throw ParseError("teacher file " + path.string() + " line " +
                                 std::to_string(line_no) + ": chunk dim " +
                                 std::to_string(v.size()) + " != " +
                                 std::to_string(rec.teacher_dim));
            }
            normalize_in_place(v, rec.doc_id + "/chunk");
            rec.chunks.push_back(std::move(v));
        }
        if (expected_chunk_counts) {
            auto it = expected_chunk_counts->find(rec.doc_id);
            if (it != expected_chunk_counts->end() && it->second != int(rec.chunks.size())) {
                throw AlignmentError("teacher record " + rec.doc_id + " has " +
                                     std::to_string(rec.chunks.size()) + " chunk embeddings, " +
                                     "chunk plan has " + std::to_string(it->second));
            }
        }
        records.push_back(std::move(rec));
    }
    return records;
}

void write_teacher_jsonl(const std::filesystem::path& path,
                         const std::vector<TeacherRecord>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    for (const auto& rec : records) {
        nlohmann::json j;
        j["doc_id"] = rec.doc_id;
        j["whole"] = rec.whole;
        j["chunks"] = rec.chunks;
        out << j.dump() << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
}

FileTeacherSource::FileTeacherSource(std::vector<TeacherRecord> records) {
    for (auto& rec : records) {
        if (dim_ == 0) dim_ = rec.teacher_dim;
        if (rec.teacher_dim != dim_) {
            throw AlignmentError("teacher record " + rec.doc_id + " dim " +
                                 std::to_string(rec.teacher_dim) + " != " +
                                 std::to_string(dim_));
        }
        records_[rec.doc_id] = std::move(rec);
    }
}

TeacherRecord FileTeacherSource::encode_document(const std::string& doc_id,
                                                 std::string_view /*text*/,
                                                 const std::vector<std::string>& chunk_texts) {
    auto it = records_.find(doc_id);
    if (it == records_.end()) {
        throw AlignmentError("no teacher record for doc " + doc_id);
    }
    if (it->second.chunks.size() != chunk_texts.size()) {
        throw AlignmentError("teacher record " + doc_id + " has " +
                             std::to_string(it->second.chunks.size()) +
                             " chunk embeddings, chunk plan has " +
                             std::to_string(chunk_texts.size()));
    }
    return it->second;
}

}  // namespace chunkalign::distill
