#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "chunkalign/checkpoint.hpp"
#include "chunkalign/cli.hpp"
#include "chunkalign/errors.hpp"
#include "chunkalign/retrieval.hpp"

using namespace chunkalign;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::trunc);
    out << text;
}

std::string base_config(const fs::path& dir, const std::string& corpus,
                        const std::string& extra = "") {
    return "[paths]\n"
           "corpus = " + corpus + "\n"
           "teacher = oracle\n"
           "checkpoint_dir = " + (dir / "ckpt").string() + "\n"
           "report_dir = " + (dir / "report").string() + "\n"
           "[train]\n"
           "batch_size = 4\n"
           "epochs = 1\n"
           "warmup_steps = 2\n"
           "seed = 99\n" + extra;
}

}  // namespace

TEST_CASE("config parsing: sections, overrides, validation failures") {
    cli::RunConfig cfg = cli::parse_config_text(
        "[paths]\ncorpus = synth:8\n[encoder]\nmodel_dim = 32\nnum_heads = 2\n"
        "[train]\nbatch_size = 2\nseed = 5\n[chunker]\np_recursive = 0.5\n"
        "[eval]\nmode = multi\n",
        "inline");
    CHECK(cfg.encoder.model_dim == 32);
    CHECK(cfg.train.batch_size == 2);
    CHECK(cfg.train.seed == 5);
    CHECK(cfg.chunker.p_recursive == 0.5);
    CHECK(cfg.mode == "multi");
    CHECK_NOTHROW(cfg.validate());

    CHECK_THROWS_AS(cli::parse_config_text("[paths]\nbogus = 1\n", "inline"), ConfigError);
    CHECK_THROWS_AS(cli::parse_config_text("corpus = x\n", "inline"), ConfigError);
    CHECK_THROWS_AS(cli::parse_config_text("[nosuch]\nx = 1\n", "inline"), ConfigError);

    // invalid schedule config fails before any work
    cli::RunConfig bad = cli::parse_config_text(
        "[paths]\ncorpus = synth:8\n[train]\ntotal_steps = 5\nwarmup_steps = 9\n", "inline");
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("cmd_chunk: two-doc fixture and byte-identical reruns") {
    TempDir tmp("chunkalign_cli_chunk");
    const fs::path corpus_path = tmp.path / "corpus.tsv";
    write_file(corpus_path, "d1\tone two three four five six seven eight\n"
                            "d2\talpha beta. gamma delta epsilon zeta\n");
    cli::RunConfig cfg = cli::parse_config_text(base_config(tmp.path, corpus_path.string()),
                                                "inline");
    REQUIRE(cli::cmd_chunk(cfg) == 0);
    const fs::path spans = tmp.path / "report" / "spans.csv";
    const std::string first = read_file(spans);
    CHECK(first.rfind("doc_id,strategy,chunk_index,char_start,char_end\n", 0) == 0);
    CHECK(first.find("d1,") != std::string::npos);
    CHECK(first.find("d2,") != std::string::npos);

    REQUIRE(cli::cmd_chunk(cfg) == 0);
    CHECK(read_file(spans) == first);
}

TEST_CASE("cmd_chunk strategy mixture approximates 70/30 over many docs") {
    TempDir tmp("chunkalign_cli_mix");
    cli::RunConfig cfg = cli::parse_config_text(base_config(tmp.path, "synth:4000"), "inline");
    REQUIRE(cli::cmd_chunk(cfg) == 0);
    const std::string spans = read_file(tmp.path / "report" / "spans.csv");

    // count strategy per doc (first chunk row of each doc)
    std::map<std::string, std::string> strategy_of;
    size_t pos = spans.find('\n') + 1;
    while (pos < spans.size()) {
        const size_t end = spans.find('\n', pos);
        const std::string line = spans.substr(pos, end - pos);
        const size_t c1 = line.find(',');
        const size_t c2 = line.find(',', c1 + 1);
        strategy_of[line.substr(0, c1)] = line.substr(c1 + 1, c2 - c1 - 1);
        pos = end + 1;
    }
    REQUIRE(strategy_of.size() == 4000);
    long recursive = 0;
    for (auto& [id, s] : strategy_of) {
        if (s == "recursive") ++recursive;
    }
    const double frac = double(recursive) / 4000.0;
    CHECK(frac > 0.68);
    CHECK(frac < 0.72);
}

TEST_CASE("cmd_train smoke run exits zero and writes artifacts") {
    TempDir tmp("chunkalign_cli_train");
    cli::RunConfig cfg = cli::parse_config_text(
        base_config(tmp.path, "synth:8", "holdout = 2\n"), "inline");
    REQUIRE(cli::cmd_train(cfg) == 0);
    CHECK(fs::exists(tmp.path / "ckpt" / "model.ckpt"));
    CHECK(fs::exists(tmp.path / "ckpt" / "model.ckpt.opt"));
    CHECK(fs::exists(tmp.path / "report" / "metrics.csv"));
}

TEST_CASE("cmd_encode: line counts and in-process agreement") {
    TempDir tmp("chunkalign_cli_encode");
    cli::RunConfig cfg = cli::parse_config_text(base_config(tmp.path, "synth:4"), "inline");
    REQUIRE(cli::cmd_train(cfg) == 0);

    SUBCASE("single mode emits one line per doc") {
        REQUIRE(cli::cmd_encode(cfg, "single") == 0);
        const std::string out = read_file(tmp.path / "report" / "embeddings.tsv");
        long lines = std::count(out.begin(), out.end(), '\n');
        CHECK(lines == 4);
        CHECK(out.find("\tcls\t") != std::string::npos);
    }

    SUBCASE("multi mode emits docs + chunks lines and matches in-process encode") {
        REQUIRE(cli::cmd_encode(cfg, "multi") == 0);
        const std::string out = read_file(tmp.path / "report" / "embeddings.tsv");

        const encoder::Weights weights =
            encoder::load_checkpoint(tmp.path / "ckpt" / "model.ckpt");
        const std::vector<corpus::Doc> docs = cli::load_corpus(cfg);
        // reproduce the embedding of the first doc's cls and compare at the
        // file's printed precision
        chunker::ChunkerConfig eval_cfg = retrieval::eval_chunker_config();
        const auto emb = retrieval::embed_corpus(docs, weights, retrieval::Mode::Multi,
                                                 eval_cfg, cfg.train.seed);
        long expected_lines = 0;
        for (const auto& de : emb) expected_lines += long(de.vectors.size());
        CHECK(std::count(out.begin(), out.end(), '\n') == expected_lines);

        const size_t tab1 = out.find('\t');
        const size_t tab2 = out.find('\t', tab1 + 1);
        const size_t eol = out.find('\n');
        std::istringstream floats(out.substr(tab2 + 1, eol - tab2 - 1));
        double v = 0.0;
        size_t idx = 0;
        while (floats >> v) {
            CHECK(std::abs(v - emb[0].vectors[0][idx]) < 1e-7);
            ++idx;
        }
        CHECK(idx == emb[0].vectors[0].size());
    }
}

TEST_CASE("cmd_eval produces the report CSV") {
    TempDir tmp("chunkalign_cli_eval");
    const retrieval::EvalTask task = retrieval::make_needle_task(4, 256, 3);
    retrieval::write_tsv_docs(tmp.path / "queries.tsv", task.queries);
    retrieval::write_tsv_docs(tmp.path / "task_corpus.tsv", task.corpus);
    retrieval::write_qrels(tmp.path / "qrels.tsv", task.qrels);

    cli::RunConfig cfg = cli::parse_config_text(
        base_config(tmp.path, "synth:4",
                    "[encoder]\ntarget_max_len = 512\n"
                    "[eval]\nqueries = " + (tmp.path / "queries.tsv").string() +
                        "\ncorpus = " + (tmp.path / "task_corpus.tsv").string() +
                        "\nqrels = " + (tmp.path / "qrels.tsv").string() + "\n"),
        "inline");
    REQUIRE(cli::cmd_train(cfg) == 0);
    REQUIRE(cli::cmd_eval(cfg, {"single", "multi"}) == 0);
    const std::string report = read_file(tmp.path / "report" / "eval_report.csv");
    CHECK(report.rfind("mode,query_id,ndcg_at_10\n", 0) == 0);
    CHECK(report.find("single,mean,") != std::string::npos);
    CHECK(report.find("multi,mean,") != std::string::npos);

    // malformed qrels -> parse error with line number
    write_file(tmp.path / "qrels.tsv", "q0001 no tabs here\n");
    CHECK_THROWS_WITH_AS(cli::cmd_eval(cfg, {"single"}), doctest::Contains("line 1"),
                         ParseError);
}

TEST_CASE("cli::run dispatch and fail-fast validation") {
    TempDir tmp("chunkalign_cli_run");
    write_file(tmp.path / "bad.cfg", "[train]\nwarmup_steps = 9\ntotal_steps = 5\n"
                                     "[paths]\ncorpus = synth:4\n");
    CHECK(cli::run({"train", "--config", (tmp.path / "bad.cfg").string()}) == 1);
    CHECK(cli::run({"nosuchcommand"}) == 2);
    CHECK(cli::run({}) == 2);
    CHECK(cli::run({"train"}) == 1);  // missing --config

    write_file(tmp.path / "ok.cfg", base_config(tmp.path, "synth:6"));
    CHECK(cli::run({"chunk", "--config", (tmp.path / "ok.cfg").string()}) == 0);

    // --seed overrides the config seed: artifacts differ
    const std::string spans_a = read_file(tmp.path / "report" / "spans.csv");
    CHECK(cli::run({"chunk", "--config", (tmp.path / "ok.cfg").string(), "--seed", "7"}) == 0);
    const std::string spans_b = read_file(tmp.path / "report" / "spans.csv");
    CHECK(spans_a != spans_b);
}

TEST_CASE("gradcheck command passes clean and fails when corrupted") {
    CHECK(cli::cmd_gradcheck() == 0);
    setenv("CHUNKALIGN_GRADCHECK_CORRUPT", "1", 1);
    CHECK(cli::cmd_gradcheck() == 1);
    unsetenv("CHUNKALIGN_GRADCHECK_CORRUPT");
}
