#include "chunkalign/tokenizer.hpp"

#include <cctype>
#include <string>

#include "chunkalign/errors.hpp"
#include "chunkalign/rng.hpp"

namespace chunkalign::encoder {

namespace {

constexpr int kMaxWordBytes = 24;

bool is_space_byte(unsigned char c) { return std::isspace(c) != 0; }
bool is_word_byte(unsigned char c) { return std::isalnum(c) != 0 && c < 128; }

int word_id(std::string_view word, int vocab_size) {
    const int slots = vocab_size - kWordBase;
    return kWordBase + int(fnv1a64(word) % uint64_t(slots));
}

// Appends tokens for one text; offsets are relative to the text start plus
// `offset_base`, or sentinel when `sentinel_offsets` (prompt path).
void segment(std::string_view text, int vocab_size, bool sentinel_offsets,
             std::vector<int>& ids, std::vector<std::pair<int, int>>& offsets) {
    size_t i = 0;
    const size_t n = text.size();
    auto push = [&](int id, int s, int e) {
        ids.push_back(id);
        offsets.push_back(sentinel_offsets ? kSentinelOffset : std::pair<int, int>{s, e});
    };
    while (i < n) {
        const unsigned char c = static_cast<unsigned char>(text[i]);
        if (is_space_byte(c)) {
            ++i;
            continue;
        }
        if (is_word_byte(c)) {
            size_t j = i + 1;
            while (j < n && is_word_byte(static_cast<unsigned char>(text[j]))) ++j;
            const size_t len = j - i;
            if (len <= kMaxWordBytes) {
                push(word_id(text.substr(i, len), vocab_size), int(i), int(j));
            } else {
                for (size_t b = i; b < j; ++b) {
                    push(kByteBase + static_cast<unsigned char>(text[b]), int(b), int(b + 1));
                }
            }
            i = j;
        } else {
            push(kByteBase + c, int(i), int(i + 1));
            ++i;
        }
    }
}

}  // namespace

TokenSequence tokenize(std::string_view text, int vocab_size, std::string_view prompt) {
    if (vocab_size <= kWordBase) {
        throw ConfigError("tokenize: vocab_size " + std::to_string(vocab_size) +
                          " must exceed " + std::to_string(kWordBase));
    }
    size_t first = text.find_first_not_of(" \t\r\n\f\v");
    if (first == std::string_view::npos) {
        throw DegenerateInputError("tokenize: empty text");
    }
    TokenSequence ts;
    ts.ids.push_back(kClsId);
    ts.char_offsets.push_back(kSentinelOffset);
    if (!prompt.empty()) {
        const size_t before = ts.ids.size();
        segment(prompt, vocab_size, /*sentinel_offsets=*/true, ts.ids, ts.char_offsets);
        ts.prompt_token_count = int(ts.ids.size() - before);
    }
    segment(text, vocab_size, /*sentinel_offsets=*/false, ts.ids, ts.char_offsets);
    ts.ids.push_back(kSepId);
    ts.char_offsets.push_back(kSentinelOffset);
    return ts;
}

TokenSequence truncate(const TokenSequence& ts, int max_len) {
    if (max_len < 3) throw ConfigError("truncate: max_len must be >= 3");
    if (ts.size() <= max_len) return ts;
    TokenSequence out;
    out.has_cls = ts.has_cls;
    out.has_sep = ts.has_sep;
    out.prompt_token_count = ts.prompt_token_count;
    const int keep = max_len - 1;  // room for SEP
    out.ids.assign(ts.ids.begin(), ts.ids.begin() + keep);
    out.char_offsets.assign(ts.char_offsets.begin(), ts.char_offsets.begin() + keep);
    out.ids.push_back(kSepId);
    out.char_offsets.push_back(kSentinelOffset);
    return out;
}

}  // namespace chunkalign::encoder
