#include "chunkalign/chunker.hpp"

#include <algorithm>
#include <cctype>

#include "chunkalign/errors.hpp"

namespace chunkalign::chunker {

namespace {

struct WordExtent {
    int start;
    int end;  // exclusive
};

std::vector<WordExtent> find_words(std::string_view text) {
    std::vector<WordExtent> words;
    size_t i = 0;
    while (i < text.size()) {
        if (std::isspace(static_cast<unsigned char>(text[i]))) {
            ++i;
            continue;
        }
        size_t j = i + 1;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        words.push_back({int(i), int(j)});
        i = j;
    }
    return words;
}

struct Piece {
    int start;
    int end;  // exclusive
    int len() const { return end - start; }
};

// Splits text at every occurrence of the separator, keeping keep_prefix bytes
// of the match with the preceding piece. The empty separator yields
// single-byte pieces. Pure-whitespace pieces are discarded and all pieces are
// trimmed of surrounding whitespace.
std::vector<Piece> split_at_separator(std::string_view text, const Separator& sep) {
    std::vector<Piece> raw;
    if (sep.match.empty()) {
        for (size_t i = 0; i < text.size(); ++i) raw.push_back({int(i), int(i + 1)});
    } else {
        size_t pos = 0;
        while (pos <= text.size()) {
            const size_t hit = text.find(sep.match, pos);
            if (hit == std::string_view::npos) {
                raw.push_back({int(pos), int(text.size())});
                break;
            }
            raw.push_back({int(pos), int(hit + sep.keep_prefix)});
            pos = hit + sep.match.size();
        }
    }
    std::vector<Piece> pieces;
    for (Piece p : raw) {
        while (p.start < p.end && std::isspace(static_cast<unsigned char>(text[p.start]))) {
            ++p.start;
        }
        while (p.end > p.start && std::isspace(static_cast<unsigned char>(text[p.end - 1]))) {
            --p.end;
        }
        if (p.start < p.end) pieces.push_back(p);
    }
    return pieces;
}

}  // namespace

std::vector<Separator> default_separators() {
    return {{"\n\n", 0}, {"\n", 0}, {". ", 1}, {"? ", 1}, {"! ", 1}, {" ", 0}, {"", 0}};
}

void ChunkerConfig::validate() const {
    if (p_recursive < 0.0 || p_recursive > 1.0) {
        throw ConfigError("chunker: p_recursive must be in [0,1]");
    }
    if (!(0 < size_min && size_min <= size_max)) {
        throw ConfigError("chunker: need 0 < size_min <= size_max");
    }
    if (!(0.0 <= overlap_frac_min && overlap_frac_min <= overlap_frac_max &&
          overlap_frac_max < 1.0)) {
        throw ConfigError("chunker: need 0 <= overlap_frac_min <= overlap_frac_max < 1");
    }
    if (separators.empty() || !separators.back().match.empty()) {
        throw ConfigError("chunker: separator list must end with the empty separator");
    }
}

std::vector<ChunkSpan> split_by_word(std::string_view text, int chunk_size, int overlap) {
    if (chunk_size < 1) throw ConfigError("split_by_word: chunk_size must be >= 1");
    if (overlap < 0 || overlap >= chunk_size) {
        throw ConfigError("split_by_word: need 0 <= overlap < chunk_size");
    }
    const std::vector<WordExtent> words = find_words(text);
    if (words.empty()) {
        throw DegenerateInputError("split_by_word: text has no words");
    }
    const int n = int(words.size());
    const int stride = chunk_size - overlap;
    std::vector<ChunkSpan> spans;
    for (int start = 0;; start += stride) {
        const int end = std::min(start + chunk_size, n);
        spans.push_back({words[start].start, words[end - 1].end, -1, -1});
        if (end == n) break;
    }
    return spans;
}

std::vector<ChunkSpan> recursive_split(std::string_view text, int chunk_size, int overlap,
                                       const std::vector<Separator>& separators) {
    if (chunk_size < 1) throw ConfigError("recursive_split: chunk_size must be >= 1");
    const int budget = chunk_size * kCharsPerWord;
    const int overlap_budget = overlap * kCharsPerWord;

    std::vector<Piece> pieces;
    for (const Separator& sep : separators) {
        pieces = split_at_separator(text, sep);
        bool all_fit = !pieces.empty();
        for (const Piece& p : pieces) {
            if (p.len() > budget) {
                all_fit = false;
                break;
            }
        }
        if (all_fit) break;
    }
    if (pieces.empty()) return {};

    // Greedy merge with suffix re-use for overlap. The chunk extent runs from
    // the first to the last merged piece; separator bytes in between are
    // covered, which is fine since coverage only concerns non-separator text.
    std::vector<ChunkSpan> spans;
    const int n = int(pieces.size());
    int start = 0;
    while (start < n) {
        int end = start;
        while (end + 1 < n &&
               pieces[end + 1].end - pieces[start].start <= budget) {
            ++end;
        }
        spans.push_back({pieces[start].start, pieces[end].end, -1, -1});
        if (end + 1 >= n) break;
        // Re-include trailing pieces up to the overlap budget; always advance
        // past `start` so the loop terminates.
        int next = end + 1;
        while (next - 1 > start &&
               pieces[end].end - pieces[next - 1].start <= overlap_budget) {
            --next;
        }
        start = next;
    }
    return spans;
}

ChunkPlan sample_chunk_plan(Rng& rng, const ChunkerConfig& config) {
    config.validate();
    ChunkPlan plan;
    plan.strategy = rng.bernoulli(config.p_recursive) ? Strategy::Recursive : Strategy::ByWord;
    plan.chunk_size = rng.uniform_int(config.size_min, config.size_max);
    plan.overlap_frac = rng.uniform(config.overlap_frac_min, config.overlap_frac_max);
    plan.overlap = int(plan.overlap_frac * plan.chunk_size);
    return plan;
}

std::vector<ChunkSpan> map_spans_to_tokens(const std::vector<ChunkSpan>& spans,
                                           const encoder::TokenSequence& tokens,
                                           std::vector<int>* dropped) {
    for (size_t i = 1; i < spans.size(); ++i) {
        if (spans[i].char_start < spans[i - 1].char_start) {
            throw ContractError("map_spans_to_tokens: spans not sorted at index " +
                                std::to_string(i));
        }
    }
    std::vector<ChunkSpan> mapped;
    for (size_t si = 0; si < spans.size(); ++si) {
        const ChunkSpan& span = spans[si];
        int tok_lo = -1;
        int tok_hi = -1;
        for (int p = 0; p < tokens.size(); ++p) {
            if (!tokens.is_content(p)) continue;
            const auto [s, e] = tokens.char_offsets[p];
            // midpoint rule without integer truncation: 2*mid in [2*start, 2*end)
            const int mid2 = s + e;
            if (mid2 >= 2 * span.char_start && mid2 < 2 * span.char_end) {
                if (tok_lo < 0) tok_lo = p;
                tok_hi = p;
            }
        }
        if (tok_lo < 0) {
            if (dropped) dropped->push_back(int(si));
            continue;
        }
        ChunkSpan out = span;
        out.token_start = tok_lo;
        out.token_end = tok_hi + 1;
        mapped.push_back(out);
    }
    return mapped;
}

ChunkResult chunk_document(std::string_view text, uint64_t doc_seed,
                           const ChunkerConfig& config) {
    Rng rng(doc_seed);
    ChunkResult result;
    result.plan = sample_chunk_plan(rng, config);
    if (result.plan.strategy == Strategy::ByWord) {
        result.spans = split_by_word(text, result.plan.chunk_size, result.plan.overlap);
    } else {
        result.spans =
            recursive_split(text, result.plan.chunk_size, result.plan.overlap, config.separators);
    }
    return result;
}

}  // namespace chunkalign::chunker
