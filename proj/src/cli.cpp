#include "chunkalign/cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "chunkalign/checkpoint.hpp"
#include "chunkalign/errors.hpp"
#include "chunkalign/gradcheck_suite.hpp"
#include "chunkalign/teacher.hpp"

namespace chunkalign::cli {

namespace {

std::string trim(const std::string& s) {
    const size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

int to_int(const std::string& v, const std::string& key) {
    try {
        size_t used = 0;
        const int out = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer for " + key + ": '" + v + "'");
    }
}

double to_double(const std::string& v, const std::string& key) {
    try {
        size_t used = 0;
        const double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: bad number for " + key + ": '" + v + "'");
    }
}

uint64_t to_u64(const std::string& v, const std::string& key) {
    try {
        size_t used = 0;
        const unsigned long long out = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: bad seed for " + key + ": '" + v + "'");
    }
}

void apply_key(RunConfig& cfg, const std::string& section, const std::string& key,
               const std::string& value) {
    auto& enc = cfg.encoder;
    auto& chk = cfg.chunker;
    auto& trn = cfg.train;
    const std::string where = "[" + section + "] " + key;

    if (section == "paths") {
        if (key == "corpus") cfg.corpus = value;
        else if (key == "teacher") cfg.teacher = value;
        else if (key == "checkpoint_dir") cfg.checkpoint_dir = value;
        else if (key == "report_dir") cfg.report_dir = value;
        else throw ConfigError("config: unknown key " + where);
    } else if (section == "encoder") {
        if (key == "num_layers") enc.num_layers = to_int(value, where);
        else if (key == "model_dim") enc.model_dim = to_int(value, where);
        else if (key == "num_heads") enc.num_heads = to_int(value, where);
        else if (key == "ffn_dim") enc.ffn_dim = to_int(value, where);
        else if (key == "vocab_size") enc.vocab_size = to_int(value, where);
        else if (key == "native_max_len") enc.native_max_len = to_int(value, where);
        else if (key == "target_max_len") enc.target_max_len = to_int(value, where);
        else if (key == "global_rope_theta") enc.global_rope_theta = to_double(value, where);
        else if (key == "local_rope_theta") enc.local_rope_theta = to_double(value, where);
        else if (key == "local_window") enc.local_window = to_int(value, where);
        else if (key == "global_layer_period") enc.global_layer_period = to_int(value, where);
        else throw ConfigError("config: unknown key " + where);
    } else if (section == "chunker") {
        if (key == "p_recursive") chk.p_recursive = to_double(value, where);
        else if (key == "size_min") chk.size_min = to_int(value, where);
        else if (key == "size_max") chk.size_max = to_int(value, where);
        else if (key == "overlap_frac_min") chk.overlap_frac_min = to_double(value, where);
        else if (key == "overlap_frac_max") chk.overlap_frac_max = to_double(value, where);
        else throw ConfigError("config: unknown key " + where);
    } else if (section == "train") {
        if (key == "batch_size") trn.batch_size = to_int(value, where);
        else if (key == "peak_lr") trn.peak_lr = to_double(value, where);
        else if (key == "warmup_steps") trn.warmup_steps = to_int(value, where);
        else if (key == "total_steps") trn.total_steps = to_int(value, where);
        else if (key == "epochs") trn.epochs = to_int(value, where);
        else if (key == "weight_decay") trn.weight_decay = to_double(value, where);
        else if (key == "max_len") trn.max_len = to_int(value, where);
        else if (key == "w_cos") trn.w_cos = to_double(value, where);
        else if (key == "w_sim") trn.w_sim = to_double(value, where);
        else if (key == "seed") trn.seed = to_u64(value, where);
        else if (key == "holdout") cfg.holdout = to_int(value, where);
        else if (key == "teacher_dim") cfg.teacher_dim = to_int(value, where);
        else throw ConfigError("config: unknown key " + where);
    } else if (section == "eval") {
        if (key == "queries") cfg.eval_queries = value;
        else if (key == "corpus") cfg.eval_corpus = value;
        else if (key == "qrels") cfg.eval_qrels = value;
        else if (key == "chunk_words") cfg.eval_chunk_words = to_int(value, where);
        else if (key == "overlap_frac") cfg.eval_overlap_frac = to_double(value, where);
        else if (key == "mode") cfg.mode = value;
        else throw ConfigError("config: unknown key " + where);
    } else {
        throw ConfigError("config: unknown section [" + section + "]");
    }
}

bool is_synth(const std::string& corpus, int* count) {
    if (corpus.rfind("synth:", 0) != 0) return false;
    *count = to_int(corpus.substr(6), "synth corpus count");
    return true;
}

chunker::ChunkerConfig eval_chunker_from(const RunConfig& cfg) {
    chunker::ChunkerConfig c;
    c.p_recursive = 0.0;
    c.size_min = cfg.eval_chunk_words;
    c.size_max = cfg.eval_chunk_words;
    c.overlap_frac_min = cfg.eval_overlap_frac;
    c.overlap_frac_max = cfg.eval_overlap_frac;
    return c;
}

std::unique_ptr<distill::TeacherSource> make_teacher(const RunConfig& cfg) {
    if (cfg.teacher == "oracle") {
        const int dim = cfg.teacher_dim > 0 ? cfg.teacher_dim : cfg.encoder.model_dim;
        return std::make_unique<distill::OracleTeacherSource>(dim, cfg.train.seed);
    }
    return std::make_unique<distill::FileTeacherSource>(
        distill::load_teacher_jsonl(cfg.teacher));
}

}  // namespace

void RunConfig::validate() const {
    encoder.validate();
    chunker.validate();
    if (train.batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
    if (train.peak_lr <= 0.0) throw ConfigError("config: peak_lr must be > 0");
    if (train.epochs < 1) throw ConfigError("config: epochs must be >= 1");
    if (train.max_len < 4) throw ConfigError("config: max_len must be >= 4");
    if (train.total_steps != 0 && train.warmup_steps >= train.total_steps) {
        throw ConfigError("config: warmup_steps must be < total_steps");
    }
    if (holdout < 0) throw ConfigError("config: holdout must be >= 0");
    if (teacher_dim < 0) throw ConfigError("config: teacher_dim must be >= 0");
    if (eval_chunk_words < 1) throw ConfigError("config: eval chunk_words must be >= 1");
    if (eval_overlap_frac < 0.0 || eval_overlap_frac >= 1.0) {
        throw ConfigError("config: eval overlap_frac must be in [0,1)");
    }
    if (mode != "single" && mode != "multi" && mode != "both") {
        throw ConfigError("config: mode must be single, multi or both");
    }
    if (corpus.empty()) throw ConfigError("config: [paths] corpus is required");
    int synth_count = 0;
    if (is_synth(corpus, &synth_count)) {
        if (synth_count < 1) throw ConfigError("config: synth corpus needs a positive count");
    } else if (!std::filesystem::exists(corpus)) {
        throw ConfigError("config: corpus path not found: " + corpus);
    }
    if (teacher != "oracle" && !std::filesystem::exists(teacher)) {
        throw ConfigError("config: teacher path not found: " + teacher);
    }
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[' && t.back() == ']') {
            section = t.substr(1, t.size() - 2);
            continue;
        }
        const size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config " + origin + " line " + std::to_string(line_no) +
                              ": expected key = value");
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (section.empty()) {
            throw ConfigError("config " + origin + " line " + std::to_string(line_no) +
                              ": key before any [section]");
        }
        apply_key(cfg, section, key, value);
    }
    return cfg;
}

RunConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path.string());
}

std::vector<corpus::Doc> load_corpus(const RunConfig& config) {
    int synth_count = 0;
    if (is_synth(config.corpus, &synth_count)) {
        return corpus::make_training_corpus(synth_count, config.train.seed);
    }
    return retrieval::read_tsv_docs(config.corpus);
}

int cmd_chunk(const RunConfig& config) {
    config.validate();
    const std::vector<corpus::Doc> docs = load_corpus(config);
    std::filesystem::create_directories(config.report_dir);
    const std::filesystem::path out_path = config.report_dir / "spans.csv";
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + out_path.string() + " for writing");
    out << "doc_id,strategy,chunk_index,char_start,char_end\n";
    long recursive_docs = 0;
    for (const auto& doc : docs) {
        const uint64_t doc_seed = derive_seed(config.train.seed, "chunk", fnv1a64(doc.id));
        const chunker::ChunkResult res = chunker::chunk_document(doc.text, doc_seed,
                                                                 config.chunker);
        const char* strategy =
            res.plan.strategy == chunker::Strategy::Recursive ? "recursive" : "by_word";
        if (res.plan.strategy == chunker::Strategy::Recursive) ++recursive_docs;
        for (size_t i = 0; i < res.spans.size(); ++i) {
            out << doc.id << ',' << strategy << ',' << i << ',' << res.spans[i].char_start
                << ',' << res.spans[i].char_end << '\n';
        }
    }
    out.close();
    std::printf("chunk: %zu docs -> %s (recursive %.1f%%, by_word %.1f%%)\n", docs.size(),
                out_path.c_str(), 100.0 * double(recursive_docs) / double(docs.size()),
                100.0 * double(docs.size() - recursive_docs) / double(docs.size()));
    return 0;
}

int cmd_train(const RunConfig& config) {
    config.validate();
    std::vector<corpus::Doc> docs = load_corpus(config);
    if (config.holdout >= int(docs.size())) {
        throw ConfigError("config: holdout " + std::to_string(config.holdout) +
                          " >= corpus size " + std::to_string(docs.size()));
    }
    std::vector<corpus::Doc> heldout(docs.end() - config.holdout, docs.end());
    docs.resize(docs.size() - size_t(config.holdout));

    auto teacher = make_teacher(config);
    std::filesystem::create_directories(config.checkpoint_dir);
    std::filesystem::create_directories(config.report_dir);
    const std::filesystem::path ckpt = config.checkpoint_dir / "model.ckpt";
    const std::filesystem::path metrics = config.report_dir / "metrics.csv";

    const distill::TrainResult result = distill::train(docs, heldout, config.chunker, *teacher,
                                                       config.train, config.encoder, ckpt,
                                                       metrics);
    std::printf("train: %ld steps, final loss %.6f -> %s\n", result.steps,
                result.final_total_loss, ckpt.c_str());
    if (!heldout.empty()) {
        std::printf("train: held-out cls cosine %.4f, chunk cosine %.4f (%zu docs)\n",
                    result.heldout_cls_cosine, result.heldout_chunk_cosine, heldout.size());
    }
    return 0;
}

int cmd_encode(const RunConfig& config, const std::string& mode) {
    config.validate();
    if (mode != "single" && mode != "multi") {
        throw ConfigError("encode: mode must be single or multi");
    }
    const std::filesystem::path ckpt = config.checkpoint_dir / "model.ckpt";
    if (!std::filesystem::exists(ckpt)) {
        throw IoError("encode: checkpoint not found: " + ckpt.string());
    }
    const encoder::Weights weights = encoder::load_checkpoint(ckpt);
    const std::vector<corpus::Doc> docs = load_corpus(config);
    std::filesystem::create_directories(config.report_dir);
    const std::filesystem::path out_path = config.report_dir / "embeddings.tsv";
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + out_path.string() + " for writing");

    const chunker::ChunkerConfig eval_chunker = eval_chunker_from(config);
    auto write_vec = [&out](const std::string& doc_id, const std::string& kind,
                            std::span<const double> v) {
        out << doc_id << '\t' << kind << '\t';
        char buf[32];
        for (size_t i = 0; i < v.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.8e", v[i]);
            if (i) out << ' ';
            out << buf;
        }
        out << '\n';
    };

    std::vector<retrieval::EmbedWarning> warnings;
    for (const auto& doc : docs) {
        const uint64_t doc_seed = derive_seed(config.train.seed, "chunk", fnv1a64(doc.id));
        const chunker::ChunkResult chunked = chunker::chunk_document(doc.text, doc_seed,
                                                                     eval_chunker);
        encoder::TokenSequence tokens = encoder::tokenize(doc.text, weights.config.vocab_size);
        if (tokens.size() > weights.config.target_max_len) {
            warnings.push_back({doc.id, "truncated"});
            tokens = encoder::truncate(tokens, weights.config.target_max_len);
        }
        const std::vector<chunker::ChunkSpan> spans =
            chunker::map_spans_to_tokens(chunked.spans, tokens);
        const encoder::EmbeddingSet enc = encoder::encode_document(tokens, spans, weights);
        if (mode == "single") {
            write_vec(doc.id, "cls", enc.cls);
        } else {
            write_vec(doc.id, "cls", enc.cls);
            for (size_t c = 0; c < enc.chunks.size(); ++c) {
                write_vec(doc.id, "chunk_" + std::to_string(c), enc.chunks[c].second);
            }
        }
    }
    out.close();
    std::printf("encode: %zu docs (%s mode) -> %s (%zu truncation warnings)\n", docs.size(),
                mode.c_str(), out_path.c_str(), warnings.size());
    return 0;
}

int cmd_eval(const RunConfig& config, const std::vector<std::string>& modes) {
    config.validate();
    if (config.eval_queries.empty() || config.eval_corpus.empty() ||
        config.eval_qrels.empty()) {
        throw ConfigError("eval: [eval] queries, corpus and qrels are required");
    }
    const std::filesystem::path ckpt = config.checkpoint_dir / "model.ckpt";
    if (!std::filesystem::exists(ckpt)) {
        throw IoError("eval: checkpoint not found: " + ckpt.string());
    }
    const encoder::Weights weights = encoder::load_checkpoint(ckpt);

    retrieval::EvalTask task;
    task.queries = retrieval::read_tsv_docs(config.eval_queries);
    task.corpus = retrieval::read_tsv_docs(config.eval_corpus);
    task.qrels = retrieval::read_qrels(config.eval_qrels);

    std::vector<retrieval::Mode> mode_list;
    for (const auto& m : modes) {
        if (m == "single") mode_list.push_back(retrieval::Mode::Single);
        else if (m == "multi") mode_list.push_back(retrieval::Mode::Multi);
        else throw ConfigError("eval: unknown mode " + m);
    }

    const retrieval::EvalReport report =
        retrieval::run_eval(task, weights, mode_list, eval_chunker_from(config),
                            config.train.seed);
    std::filesystem::create_directories(config.report_dir);
    const std::filesystem::path out_path = config.report_dir / "eval_report.csv";
    retrieval::write_report_csv(out_path, report);
    for (const auto& [mode, mean] : report.mean_ndcg) {
        std::printf("eval: %s mean ndcg@10 = %.4f\n", mode.c_str(), mean);
    }
    std::printf("eval: report -> %s\n", out_path.c_str());
    return 0;
}

int cmd_gradcheck() {
    const bool corrupt = std::getenv("CHUNKALIGN_GRADCHECK_CORRUPT") != nullptr;
    const auto start = std::chrono::steady_clock::now();
    const std::vector<num::CheckResult> results = num::run_gradcheck_suite(20240601, corrupt);
    int failures = 0;
    for (const auto& r : results) {
        std::printf("%s %-38s max_rel_err=%.3e tol=%.0e\n", r.pass ? "PASS" : "FAIL",
                    r.name.c_str(), r.max_rel_err, r.tolerance);
        if (!r.pass) ++failures;
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("gradcheck: %zu checks, %d failures, %.1fs\n", results.size(), failures, secs);
    return failures == 0 ? 0 : 1;
}

int run(const std::vector<std::string>& args) {
    try {
        if (args.empty()) {
            std::fprintf(stderr,
                         "usage: chunkalign <chunk|train|encode|eval|gradcheck> "
                         "[--config PATH] [--seed N] [--mode single|multi]\n");
            return 2;
        }
        const std::string& command = args[0];
        std::optional<std::string> config_path;
        std::optional<uint64_t> seed_override;
        std::optional<std::string> mode_override;
        for (size_t i = 1; i < args.size(); ++i) {
            const std::string& a = args[i];
            auto next = [&]() -> const std::string& {
                if (i + 1 >= args.size()) throw ConfigError("missing value for " + a);
                return args[++i];
            };
            if (a == "--config") config_path = next();
            else if (a == "--seed") seed_override = to_u64(next(), "--seed");
            else if (a == "--mode") mode_override = next();
            else throw ConfigError("unknown argument " + a);
        }

        if (command == "gradcheck") return cmd_gradcheck();

        if (!config_path) throw ConfigError(command + ": --config PATH is required");
        RunConfig config = parse_config_file(*config_path);
        if (seed_override) config.train.seed = *seed_override;
        if (mode_override) config.mode = *mode_override;

        if (command == "chunk") return cmd_chunk(config);
        if (command == "train") return cmd_train(config);
        if (command == "encode") {
            return cmd_encode(config, config.mode == "both" ? "multi" : config.mode);
        }
        if (command == "eval") {
            std::vector<std::string> modes;
            if (config.mode == "both") modes = {"single", "multi"};
            else modes = {config.mode};
            return cmd_eval(config, modes);
        }
        std::fprintf(stderr, "unknown command: %s\n", command.c_str());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

}  // namespace chunkalign::cli
