#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace chunkalign::corpus {

struct Doc {
    std::string id;
    std::string text;
};

// Fixed lowercase word pool behind every synthetic document; training and
// evaluation corpora draw from the same pool so evaluation text is always
// in-distribution for a trained model.
std::span<const char* const> word_pool();

// Disjoint halves of the pool for synthetic retrieval tasks: filler prose
// draws from the head, distinctive target passages from the tail. Training
// documents use the whole pool, so both halves are in-distribution.
std::span<const char* const> filler_word_pool();
std::span<const char* const> target_word_pool();

// Documents of 3..12 sentences, 4..10 words each, sentence-punctuated, with
// occasional paragraph breaks so both splitting strategies see their
// separators. Ids are doc00000, doc00001, ...
std::vector<Doc> make_training_corpus(int num_docs, uint64_t seed);

}  // namespace chunkalign::corpus
