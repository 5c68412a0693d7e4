#include "chunkalign/corpus.hpp"

#include <array>
#include <cstdio>

#include "chunkalign/errors.hpp"
#include "chunkalign/rng.hpp"

namespace chunkalign::corpus {

namespace {

// 192 words; enough variety for distinct documents while keeping every word
// frequent in a few-hundred-document corpus.
constexpr std::array<const char*, 192> kWords = {
    "time",    "year",    "people",  "way",      "day",     "man",     "thing",   "woman",
    "life",    "child",   "world",   "school",   "state",   "family",  "student", "group",
    "country", "problem", "hand",    "part",     "place",   "case",    "week",    "company",
    "system",  "program", "question","work",     "number",  "night",   "point",   "home",
    "water",   "room",    "mother",  "area",     "money",   "story",   "fact",    "month",
    "lot",     "right",   "study",   "book",     "eye",     "job",     "word",    "business",
    "issue",   "side",    "kind",    "head",     "house",   "service", "friend",  "father",
    "power",   "hour",    "game",    "line",     "end",     "member",  "law",     "car",
    "city",    "name",    "team",    "minute",   "idea",    "body",    "back",    "parent",
    "face",    "others",  "level",   "office",   "door",    "health",  "person",  "art",
    "war",     "history", "party",   "result",   "change",  "morning", "reason",  "research",
    "girl",    "guy",     "moment",  "air",      "teacher", "force",   "education","foot",
    "boy",     "age",     "policy",  "music",    "market",  "sense",   "nation",  "plan",
    "college", "interest","death",   "course",   "someone", "experience","effect","use",
    "class",   "control", "care",    "field",    "development","role", "effort",  "rate",
    "heart",   "drug",    "show",    "leader",   "light",   "voice",   "wife",    "police",
    "mind",    "price",   "report",  "decision", "son",     "view",    "relationship","town",
    "road",    "arm",     "difference","value",  "building","action",  "model",   "season",
    "society", "tax",     "director","position", "player",  "record",  "paper",   "space",
    "ground",  "form",    "event",   "official", "matter",  "center",  "couple",  "site",
    "project", "activity","star",    "table",    "court",   "american","oil",     "situation",
    "cost",    "industry","figure",  "street",   "image",   "phone",   "data",    "picture",
    "practice","piece",   "land",    "product",  "doctor",  "wall",    "patient", "worker",
    "news",    "test",    "movie",   "north",    "love",    "support", "technology","glass",
};

std::string make_sentence(Rng& rng) {
    const int words = rng.uniform_int(4, 10);
    std::string out;
    for (int w = 0; w < words; ++w) {
        if (w > 0) out += ' ';
        out += kWords[size_t(rng.uniform_int(0, int(kWords.size()) - 1))];
    }
    out += '.';
    return out;
}

}  // namespace

std::span<const char* const> word_pool() { return {kWords.data(), kWords.size()}; }

std::vector<Doc> make_training_corpus(int num_docs, uint64_t seed) {
    if (num_docs < 0) throw ConfigError("make_training_corpus: negative num_docs");
    std::vector<Doc> docs;
    docs.reserve(size_t(num_docs));
    for (int d = 0; d < num_docs; ++d) {
        Rng rng(derive_seed(seed, "corpus", uint64_t(d)));
        const int sentences = rng.uniform_int(3, 12);
        std::string text;
        for (int s = 0; s < sentences; ++s) {
            if (s > 0) text += rng.bernoulli(0.25) ? "\n\n" : " ";
            text += make_sentence(rng);
        }
        char id[16];
        std::snprintf(id, sizeof(id), "doc%05d", d);
        docs.push_back({id, std::move(text)});
    }
    return docs;
}

}  // namespace chunkalign::corpus
