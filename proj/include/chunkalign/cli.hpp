#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "chunkalign/chunker.hpp"
#include "chunkalign/encoder.hpp"
#include "chunkalign/retrieval.hpp"
#include "chunkalign/trainer.hpp"

namespace chunkalign::cli {

// Everything one run needs, parsed from a line-oriented "key = value" file
// with [section] headers. All randomness derives from the single seed.
struct RunConfig {
    encoder::EncoderConfig encoder;
    chunker::ChunkerConfig chunker;
    distill::TrainConfig train;

    // [paths]
    std::string corpus;             // tsv file or "synth:<N>"
    std::string teacher = "oracle"; // jsonl file or "oracle"
    std::filesystem::path checkpoint_dir = "runs";
    std::filesystem::path report_dir = "runs";

    // [train] extras
    int holdout = 0;       // documents held out from the end of the corpus
    int teacher_dim = 0;   // oracle teacher dimension; 0 = model_dim

    // [eval]
    std::string eval_queries;
    std::string eval_corpus;
    std::string eval_qrels;
    int eval_chunk_words = retrieval::kEvalChunkWords;
    double eval_overlap_frac = retrieval::kEvalOverlapFrac;
    std::string mode = "single";  // single | multi | both

    void validate() const;
};

RunConfig parse_config_file(const std::filesystem::path& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin);

// Resolves "synth:<N>" or reads a tsv corpus.
std::vector<corpus::Doc> load_corpus(const RunConfig& config);

int cmd_chunk(const RunConfig& config);
int cmd_train(const RunConfig& config);
int cmd_encode(const RunConfig& config, const std::string& mode);
int cmd_eval(const RunConfig& config, const std::vector<std::string>& modes);
int cmd_gradcheck();

// Full argv-style entry point: subcommand [--config PATH] [--seed N]
// [--mode single|multi]. Returns the process exit code.
int run(const std::vector<std::string>& args);

}  // namespace chunkalign::cli
