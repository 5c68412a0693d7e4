#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cctype>
#include <set>
#include <string>

#include "chunkalign/chunker.hpp"
#include "chunkalign/errors.hpp"
#include "chunkalign/rng.hpp"
#include "chunkalign/tokenizer.hpp"

using namespace chunkalign;
using namespace chunkalign::chunker;

namespace {

std::string words_text(int n) {
    std::string out;
    for (int i = 0; i < n; ++i) {
        if (i) out += ' ';
        out += "w" + std::to_string(i);
    }
    return out;
}

// Independent sliding-window oracle in word indices.
std::vector<std::pair<int, int>> word_window_oracle(int n, int size, int overlap) {
    std::vector<std::pair<int, int>> out;
    const int stride = size - overlap;
    for (int start = 0;; start += stride) {
        const int end = std::min(start + size, n);
        out.push_back({start, end});
        if (end == n) break;
    }
    return out;
}

std::vector<std::pair<int, int>> word_extents(const std::string& text) {
    std::vector<std::pair<int, int>> words;
    size_t i = 0;
    while (i < text.size()) {
        if (std::isspace((unsigned char)text[i])) {
            ++i;
            continue;
        }
        size_t j = i + 1;
        while (j < text.size() && !std::isspace((unsigned char)text[j])) ++j;
        words.push_back({int(i), int(j)});
        i = j;
    }
    return words;
}

std::string random_text(Rng& rng, int max_words) {
    const int n = rng.uniform_int(1, max_words);
    std::string out;
    for (int i = 0; i < n; ++i) {
        if (i) {
            const double roll = rng.uniform();
            if (roll < 0.08) out += "\n\n";
            else if (roll < 0.16) out += "\n";
            else if (roll < 0.3) out += ". ";
            else out += " ";
        }
        const int len = rng.uniform_int(1, 9);
        for (int c = 0; c < len; ++c) out += char('a' + rng.uniform_int(0, 25));
    }
    return out;
}

}  // namespace

TEST_CASE("split_by_word matches the sliding-window oracle") {
    const std::string text = words_text(10);
    const auto words = word_extents(text);
    const auto spans = split_by_word(text, 4, 2);
    const auto oracle = word_window_oracle(10, 4, 2);
    REQUIRE(spans.size() == oracle.size());
    REQUIRE(oracle.size() == 4);  // [0,4) [2,6) [4,8) [6,10)
    for (size_t i = 0; i < spans.size(); ++i) {
        CHECK(spans[i].char_start == words[size_t(oracle[i].first)].first);
        CHECK(spans[i].char_end == words[size_t(oracle[i].second - 1)].second);
    }
}

TEST_CASE("split_by_word short text gives a single covering span") {
    const std::string text = words_text(3);
    const auto spans = split_by_word(text, 8, 2);
    REQUIRE(spans.size() == 1);
    CHECK(spans[0].char_start == 0);
    CHECK(spans[0].char_end == int(text.size()));
}

TEST_CASE("split_by_word zero overlap partitions the words") {
    const std::string text = words_text(11);
    const auto words = word_extents(text);
    const auto spans = split_by_word(text, 4, 0);
    std::set<int> seen;
    for (const auto& span : spans) {
        for (size_t w = 0; w < words.size(); ++w) {
            if (words[w].first >= span.char_start && words[w].second <= span.char_end) {
                CHECK(seen.insert(int(w)).second);  // no word in two spans
            }
        }
    }
    CHECK(seen.size() == words.size());
}

TEST_CASE("split_by_word rejects degenerate input") {
    CHECK_THROWS_AS(split_by_word("   \n\t ", 4, 1), DegenerateInputError);
    CHECK_THROWS_AS(split_by_word("a b", 0, 0), ConfigError);
    CHECK_THROWS_AS(split_by_word("a b", 4, 4), ConfigError);
}

TEST_CASE("recursive_split: two paragraphs under budget split at the boundary") {
    const std::string para1 = "alpha beta gamma";
    const std::string para2 = "delta epsilon zeta";
    const std::string text = para1 + "\n\n" + para2;
    // budget of 4 words = 24 chars >= each paragraph, < whole text
    const auto spans = recursive_split(text, 4, 0, default_separators());
    REQUIRE(spans.size() == 2);
    CHECK(spans[0].char_start == 0);
    CHECK(spans[0].char_end == int(para1.size()));
    CHECK(spans[1].char_start == int(para1.size() + 2));
    CHECK(spans[1].char_end == int(text.size()));
}

TEST_CASE("recursive_split: budget over text length gives one span") {
    const std::string text = "one two three. four five";
    const auto spans = recursive_split(text, 100, 10, default_separators());
    REQUIRE(spans.size() == 1);
    CHECK(spans[0].char_start == 0);
    CHECK(spans[0].char_end == int(text.size()));
}

TEST_CASE("recursive_split covers every non-whitespace character on random fixtures") {
    Rng rng(4242);
    for (int trial = 0; trial < 200; ++trial) {
        const std::string text = random_text(rng, 60);
        const int size = rng.uniform_int(2, 20);
        const int overlap = rng.uniform_int(0, size - 1);
        const auto spans = recursive_split(text, size, overlap, default_separators());
        std::vector<bool> covered(text.size(), false);
        for (const auto& span : spans) {
            for (int c = span.char_start; c < span.char_end; ++c) covered[size_t(c)] = true;
        }
        for (size_t c = 0; c < text.size(); ++c) {
            if (!std::isspace((unsigned char)text[c])) {
                INFO("trial ", trial, " char ", c, " of '", text, "'");
                REQUIRE(covered[c]);
            }
        }
    }
}

TEST_CASE("sample_chunk_plan degenerate probability and determinism") {
    ChunkerConfig config;
    config.p_recursive = 1.0;
    Rng rng(99);
    for (int i = 0; i < 50; ++i) {
        CHECK(sample_chunk_plan(rng, config).strategy == Strategy::Recursive);
    }

    ChunkerConfig defaults;
    Rng r1(123), r2(123);
    for (int i = 0; i < 100; ++i) {
        const ChunkPlan a = sample_chunk_plan(r1, defaults);
        const ChunkPlan b = sample_chunk_plan(r2, defaults);
        CHECK(a.strategy == b.strategy);
        CHECK(a.chunk_size == b.chunk_size);
        CHECK(a.overlap == b.overlap);
        CHECK(a.overlap_frac == b.overlap_frac);
    }
}

TEST_CASE("sample_chunk_plan marginals at defaults (Monte-Carlo, seeded)") {
    ChunkerConfig config;
    Rng rng(20240601);
    int recursive = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const ChunkPlan plan = sample_chunk_plan(rng, config);
        if (plan.strategy == Strategy::Recursive) ++recursive;
        CHECK(plan.chunk_size >= 64);
        CHECK(plan.chunk_size <= 500);
        CHECK(plan.overlap_frac >= 0.3);
        CHECK(plan.overlap_frac <= 0.6);
        CHECK(plan.overlap == int(plan.overlap_frac * plan.chunk_size));
    }
    const double frac = double(recursive) / n;
    CHECK(frac > 0.68);
    CHECK(frac < 0.72);
}

TEST_CASE("map_spans_to_tokens midpoint rule") {
    const std::string text = "alpha beta gamma";
    const auto tokens = encoder::tokenize(text, 4096);

    SUBCASE("whole-text span captures all content tokens") {
        std::vector<ChunkSpan> spans = {{0, int(text.size()), -1, -1}};
        const auto mapped = map_spans_to_tokens(spans, tokens);
        REQUIRE(mapped.size() == 1);
        CHECK(mapped[0].token_start == 1);
        CHECK(mapped[0].token_end == tokens.size() - 1);
    }

    SUBCASE("span inside one token maps to that token") {
        // "beta" occupies chars [6,10); its midpoint is 8
        std::vector<ChunkSpan> spans = {{7, 10, -1, -1}};
        const auto mapped = map_spans_to_tokens(spans, tokens);
        REQUIRE(mapped.size() == 1);
        CHECK(mapped[0].token_start == 2);
        CHECK(mapped[0].token_end == 3);
    }

    SUBCASE("zero-token spans are dropped and reported") {
        std::vector<ChunkSpan> spans = {{0, 2, -1, -1}, {0, int(text.size()), -1, -1}};
        std::vector<int> dropped;
        const auto mapped = map_spans_to_tokens(spans, tokens, &dropped);
        CHECK(mapped.size() == 1);
        REQUIRE(dropped.size() == 1);
        CHECK(dropped[0] == 0);
    }

    SUBCASE("unsorted spans are a contract violation") {
        std::vector<ChunkSpan> spans = {{10, 16, -1, -1}, {0, 5, -1, -1}};
        CHECK_THROWS_AS(map_spans_to_tokens(spans, tokens), ContractError);
    }
}

TEST_CASE("coverage: every content token lands in a span when chars are covered") {
    Rng rng(777);
    for (int trial = 0; trial < 100; ++trial) {
        const std::string text = random_text(rng, 40);
        const auto tokens = encoder::tokenize(text, 4096);
        ChunkerConfig config;
        config.size_min = 2;
        config.size_max = 12;
        const uint64_t doc_seed = derive_seed(555, "chunk", uint64_t(trial));
        const ChunkResult res = chunk_document(text, doc_seed, config);
        const auto mapped = map_spans_to_tokens(res.spans, tokens);

        // char coverage of the plan
        std::vector<bool> covered(text.size(), false);
        for (const auto& span : res.spans) {
            for (int c = span.char_start; c < span.char_end; ++c) covered[size_t(c)] = true;
        }
        bool full_char_cover = true;
        for (size_t c = 0; c < text.size(); ++c) {
            if (!std::isspace((unsigned char)text[c]) && !covered[c]) full_char_cover = false;
        }
        if (!full_char_cover) continue;

        for (int p = 0; p < tokens.size(); ++p) {
            if (!tokens.is_content(p)) continue;
            bool in_any = false;
            for (const auto& span : mapped) {
                if (p >= span.token_start && p < span.token_end) in_any = true;
            }
            INFO("trial ", trial, " token ", p, " text '", text, "'");
            CHECK(in_any);
        }
    }
}

TEST_CASE("chunk_document is deterministic bit-for-bit") {
    ChunkerConfig config;
    const std::string text = words_text(300);
    const auto a = chunk_document(text, 42, config);
    const auto b = chunk_document(text, 42, config);
    REQUIRE(a.spans.size() == b.spans.size());
    for (size_t i = 0; i < a.spans.size(); ++i) {
        CHECK(a.spans[i].char_start == b.spans[i].char_start);
        CHECK(a.spans[i].char_end == b.spans[i].char_end);
    }
    CHECK(a.plan.overlap_frac == b.plan.overlap_frac);
}

TEST_CASE("spans are sorted and overlap stays bounded for both strategies") {
    Rng rng(31337);
    ChunkerConfig config;
    config.size_min = 3;
    config.size_max = 15;
    for (int trial = 0; trial < 50; ++trial) {
        const std::string text = random_text(rng, 80);
        const ChunkResult res = chunk_document(text, derive_seed(1, "chunk", uint64_t(trial)),
                                               config);
        for (size_t i = 1; i < res.spans.size(); ++i) {
            CHECK(res.spans[i].char_start >= res.spans[i - 1].char_start);
            // consecutive spans overlap or abut: no uncovered gap of content
            CHECK(res.spans[i].char_start <= res.spans[i - 1].char_end + 2);
        }
    }
}
