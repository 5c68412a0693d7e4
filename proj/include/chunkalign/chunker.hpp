#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "chunkalign/rng.hpp"
#include "chunkalign/tokenizer.hpp"

namespace chunkalign::chunker {

// One separator level for recursive splitting: the text to match and how many
// leading bytes of the match stay with the preceding piece (keeps sentence
// punctuation inside its sentence while dropping the whitespace).
struct Separator {
    std::string match;
    int keep_prefix = 0;
};

std::vector<Separator> default_separators();

struct ChunkerConfig {
    double p_recursive = 0.7;
    int size_min = 64;   // words
    int size_max = 500;  // words
    double overlap_frac_min = 0.3;
    double overlap_frac_max = 0.6;
    std::vector<Separator> separators = default_separators();
    uint64_t seed = 0;

    void validate() const;
};

// Character extent of one chunk; token extent filled by map_spans_to_tokens.
struct ChunkSpan {
    int char_start = 0;
    int char_end = 0;  // exclusive
    int token_start = -1;
    int token_end = -1;  // exclusive

    bool token_mapped() const { return token_start >= 0 && token_end > token_start; }
};

enum class Strategy { Recursive, ByWord };

struct ChunkPlan {
    Strategy strategy = Strategy::Recursive;
    int chunk_size = 0;       // words
    int overlap = 0;          // words, floor(frac * chunk_size)
    double overlap_frac = 0;  // sampled fraction before rounding
};

// Sliding window over whitespace-delimited words, stride chunk_size - overlap;
// the final window may be shorter and the iteration stops once a window
// reaches the last word.
std::vector<ChunkSpan> split_by_word(std::string_view text, int chunk_size, int overlap);

// chunk_size and overlap are in words here too; the character budget is
// chunk_size * 6 (average word length, documented tradeoff so one sampled
// number drives both strategies). Splits at the first separator level whose
// pieces all fit the budget, then merges pieces greedily up to the budget,
// re-including trailing pieces up to the overlap budget.
std::vector<ChunkSpan> recursive_split(std::string_view text, int chunk_size, int overlap,
                                       const std::vector<Separator>& separators);

// Words-to-characters scale shared by recursive_split and its tests.
constexpr int kCharsPerWord = 6;

ChunkPlan sample_chunk_plan(Rng& rng, const ChunkerConfig& config);

// Fills token_start/token_end by the token-midpoint rule: a token belongs to
// a span iff its character midpoint lies inside [char_start, char_end).
// Spans that capture zero tokens are dropped; their indices (into the input
// list) are appended to *dropped when provided. Input must be sorted by
// char_start.
std::vector<ChunkSpan> map_spans_to_tokens(const std::vector<ChunkSpan>& spans,
                                           const encoder::TokenSequence& tokens,
                                           std::vector<int>* dropped = nullptr);

// Samples a plan from the document's derived seed and dispatches to the
// matching splitter.
struct ChunkResult {
    ChunkPlan plan;
    std::vector<ChunkSpan> spans;
};
ChunkResult chunk_document(std::string_view text, uint64_t doc_seed,
                           const ChunkerConfig& config);

}  // namespace chunkalign::chunker
