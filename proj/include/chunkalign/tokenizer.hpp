#pragma once

#include <string_view>
#include <utility>
#include <vector>

namespace chunkalign::encoder {

// Token id layout: [0]=CLS, [1]=SEP, [2..257]=byte fallback, [258..vocab) =
// hashed word slots. Deterministic by construction; no learned vocabulary.
constexpr int kClsId = 0;
constexpr int kSepId = 1;
constexpr int kByteBase = 2;
constexpr int kWordBase = 258;

constexpr std::pair<int, int> kSentinelOffset{-1, -1};

struct TokenSequence {
    std::vector<int> ids;
    // (start, end) byte offsets into the source text; sentinel for CLS, SEP
    // and prompt tokens.
    std::vector<std::pair<int, int>> char_offsets;
    bool has_cls = true;
    bool has_sep = true;
    int prompt_token_count = 0;

    int size() const { return int(ids.size()); }

    // Content = carries text, participates in mean/chunk pooling.
    bool is_content(int pos) const {
        if (has_cls && pos == 0) return false;
        if (has_sep && pos == size() - 1) return false;
        if (pos < (has_cls ? 1 : 0) + prompt_token_count) return false;
        return true;
    }

    std::vector<int> content_positions() const {
        std::vector<int> out;
        for (int p = 0; p < size(); ++p) {
            if (is_content(p)) out.push_back(p);
        }
        return out;
    }
};

// Whitespace-and-punctuation segmentation. Runs of ASCII alphanumerics become
// hashed word tokens; any other non-whitespace byte becomes its byte token
// (which doubles as the fallback for unknowns, e.g. non-ASCII bytes). Words
// longer than 24 bytes also fall back to bytes. The optional prompt is
// tokenized the same way and placed right after CLS with sentinel offsets.
TokenSequence tokenize(std::string_view text, int vocab_size, std::string_view prompt = {});

// Keeps CLS + the first tokens that fit + SEP. Returns the input unchanged
// when it already fits.
TokenSequence truncate(const TokenSequence& ts, int max_len);

}  // namespace chunkalign::encoder
