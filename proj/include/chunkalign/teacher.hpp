#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "chunkalign/tensor.hpp"

namespace chunkalign::distill {

// Teacher whole-text embedding plus per-chunk embeddings, aligned
// index-for-index with the document's chunk spans. Vectors are unit norm
// (normalized at load/creation).
struct TeacherRecord {
    std::string doc_id;
    std::vector<double> whole;
    std::vector<std::vector<double>> chunks;
    int teacher_dim = 0;
};

// Deterministic frozen stand-in for a real teacher model: character trigrams
// of each whitespace-delimited word (padded with ^ and $) are hashed into
// buckets, the count vector is projected by a fixed seeded random matrix and
// the result normalized. Same text, same vector, forever.
class OracleTeacher {
public:
    OracleTeacher(int dim, uint64_t seed, int buckets = 4096);

    int dim() const { return dim_; }
    std::vector<double> encode(std::string_view text) const;

private:
    int dim_;
    int buckets_;
    Tensor2D projection_;  // dim x buckets
};

// Pluggable teacher interface; the trainer only sees this.
class TeacherSource {
public:
    virtual ~TeacherSource() = default;
    virtual int dim() const = 0;
    virtual TeacherRecord encode_document(const std::string& doc_id, std::string_view text,
                                          const std::vector<std::string>& chunk_texts) = 0;
};

class OracleTeacherSource final : public TeacherSource {
public:
    OracleTeacherSource(int dim, uint64_t seed) : oracle_(dim, seed) {}
    int dim() const override { return oracle_.dim(); }
    TeacherRecord encode_document(const std::string& doc_id, std::string_view text,
                                  const std::vector<std::string>& chunk_texts) override;

private:
    OracleTeacher oracle_;
};

// Line-delimited records {"doc_id": ..., "whole": [...], "chunks": [[...],...]}.
// Rows are L2-normalized on load. When expected_chunk_counts is non-null,
// each record's chunk count is validated against it.
std::vector<TeacherRecord> load_teacher_jsonl(
    const std::filesystem::path& path,
    const std::map<std::string, int>* expected_chunk_counts = nullptr);

void write_teacher_jsonl(const std::filesystem::path& path,
                         const std::vector<TeacherRecord>& records);

// File-backed teacher: serves preloaded records, ignoring the texts. Chunk
// counts must match the chunk plan of the requesting document.
class FileTeacherSource final : public TeacherSource {
public:
    explicit FileTeacherSource(std::vector<TeacherRecord> records);
    int dim() const override { return dim_; }
    TeacherRecord encode_document(const std::string& doc_id, std::string_view text,
                                  const std::vector<std::string>& chunk_texts) override;

private:
    std::map<std::string, TeacherRecord> records_;
    int dim_ = 0;
};

}  // namespace chunkalign::distill
