#include "chunkalign/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "chunkalign/errors.hpp"

namespace chunkalign::encoder {

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void encode_f32_le(float f, unsigned char out[4]) {
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    out[0] = bits & 0xff;
    out[1] = (bits >> 8) & 0xff;
    out[2] = (bits >> 16) & 0xff;
    out[3] = (bits >> 24) & 0xff;
}

float decode_f32_le(const unsigned char in[4]) {
    const uint32_t bits = uint32_t(in[0]) | (uint32_t(in[1]) << 8) | (uint32_t(in[2]) << 16) |
                          (uint32_t(in[3]) << 24);
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

std::vector<std::string> config_header_lines(const EncoderConfig& c) {
    return {
        "num_layers = " + std::to_string(c.num_layers),
        "model_dim = " + std::to_string(c.model_dim),
        "num_heads = " + std::to_string(c.num_heads),
        "ffn_dim = " + std::to_string(c.ffn_dim),
        "vocab_size = " + std::to_string(c.vocab_size),
        "native_max_len = " + std::to_string(c.native_max_len),
        "target_max_len = " + std::to_string(c.target_max_len),
        "global_rope_theta = " + format_double(c.global_rope_theta),
        "local_rope_theta = " + format_double(c.local_rope_theta),
        "local_window = " + std::to_string(c.local_window),
        "global_layer_period = " + std::to_string(c.global_layer_period),
    };
}

EncoderConfig config_from_header(const std::vector<std::string>& lines,
                                 const std::filesystem::path& path) {
    std::map<std::string, std::string> kv;
    for (const auto& line : lines) {
        const size_t eq = line.find(" = ");
        if (eq == std::string::npos) {
            throw ParseError("checkpoint " + path.string() + ": bad header line '" + line + "'");
        }
        kv[line.substr(0, eq)] = line.substr(eq + 3);
    }
    auto want = [&](const std::string& key) -> std::string {
        auto it = kv.find(key);
        if (it == kv.end()) {
            throw ParseError("checkpoint " + path.string() + ": missing header key " + key);
        }
        return it->second;
    };
    EncoderConfig c;
    c.num_layers = std::stoi(want("num_layers"));
    c.model_dim = std::stoi(want("model_dim"));
    c.num_heads = std::stoi(want("num_heads"));
    c.ffn_dim = std::stoi(want("ffn_dim"));
    c.vocab_size = std::stoi(want("vocab_size"));
    c.native_max_len = std::stoi(want("native_max_len"));
    c.target_max_len = std::stoi(want("target_max_len"));
    c.global_rope_theta = std::stod(want("global_rope_theta"));
    c.local_rope_theta = std::stod(want("local_rope_theta"));
    c.local_window = std::stoi(want("local_window"));
    c.global_layer_period = std::stoi(want("global_layer_period"));
    return c;
}

}  // namespace

void write_block_file(const std::filesystem::path& path,
                      const std::vector<std::string>& header_lines,
                      const std::vector<std::pair<std::string, const Tensor2D*>>& blocks) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
    for (const auto& line : header_lines) out << line << '\n';
    out << "blocks = " << blocks.size() << '\n';
    std::vector<unsigned char> payload;
    for (const auto& [name, tensor] : blocks) {
        out << name << ' ' << tensor->rows << ' ' << tensor->cols << '\n';
        payload.resize(tensor->size() * 4);
        for (size_t i = 0; i < tensor->size(); ++i) {
            encode_f32_le(float(tensor->data[i]), payload.data() + i * 4);
        }
        out.write(reinterpret_cast<const char*>(payload.data()),
                  std::streamsize(payload.size()));
    }
    if (!out) throw IoError("write failed for " + path.string());
}

BlockFile read_block_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    const uintmax_t file_size = std::filesystem::file_size(path);
    uintmax_t consumed = 0;

    auto read_line = [&]() -> std::string {
        std::string line;
        if (!std::getline(in, line)) {
            throw ParseError("checkpoint " + path.string() + ": unexpected end of header");
        }
        consumed += line.size() + 1;
        return line;
    };

    const std::string magic_line = read_line();
    std::istringstream magic(magic_line);
    std::string word;
    int version = 0;
    magic >> word >> version;
    if (word != kCheckpointMagic || version != kCheckpointVersion) {
        throw ParseError("checkpoint " + path.string() + ": bad magic line '" + magic_line +
                         "'");
    }

    BlockFile bf;
    long block_count = -1;
    while (true) {
        const std::string line = read_line();
        if (line.rfind("blocks = ", 0) == 0) {
            block_count = std::stol(line.substr(9));
            break;
        }
        bf.header_lines.push_back(line);
    }
    if (block_count < 0) throw ParseError("checkpoint " + path.string() + ": no blocks line");

    for (long b = 0; b < block_count; ++b) {
        const std::string line = read_line();
        std::istringstream hdr(line);
        std::string name;
        int rows = 0, cols = 0;
        if (!(hdr >> name >> rows >> cols) || rows < 0 || cols < 0) {
            throw ParseError("checkpoint " + path.string() + ": bad block line '" + line + "'");
        }
        Tensor2D t(rows, cols);
        std::vector<unsigned char> payload(t.size() * 4);
        in.read(reinterpret_cast<char*>(payload.data()), std::streamsize(payload.size()));
        if (in.gcount() != std::streamsize(payload.size())) {
            throw ParseError("checkpoint " + path.string() + ": truncated block " + name);
        }
        consumed += payload.size();
        for (size_t i = 0; i < t.size(); ++i) {
            t.data[i] = double(decode_f32_le(payload.data() + i * 4));
        }
        bf.blocks.emplace_back(name, std::move(t));
    }
    if (consumed != file_size) {
        throw ParseError("checkpoint " + path.string() + ": byte length " +
                         std::to_string(file_size) + " != expected " + std::to_string(consumed));
    }
    return bf;
}

void save_checkpoint(const std::filesystem::path& path, const Weights& weights) {
    std::vector<std::pair<std::string, const Tensor2D*>> blocks;
    for (const auto& [name, tensor] : weights.named_params()) blocks.emplace_back(name, tensor);
    write_block_file(path, config_header_lines(weights.config), blocks);
}

Weights load_checkpoint(const std::filesystem::path& path) {
    BlockFile bf = read_block_file(path);
    const EncoderConfig config = config_from_header(bf.header_lines, path);
    config.validate();

    Weights w;
    w.config = config;
    w.tok_embed = Tensor2D();
    w.layers.resize(size_t(config.num_layers));

    std::map<std::string, Tensor2D*> slots;
    w.tok_embed = Tensor2D(config.vocab_size, config.model_dim);
    const int d = config.model_dim;
    for (auto& l : w.layers) {
        l.ln1_gain = Tensor2D(1, d);
        l.ln1_bias = Tensor2D(1, d);
        l.wq = Tensor2D(d, d);
        l.wk = Tensor2D(d, d);
        l.wv = Tensor2D(d, d);
        l.wo = Tensor2D(d, d);
        l.ln2_gain = Tensor2D(1, d);
        l.ln2_bias = Tensor2D(1, d);
        l.w1 = Tensor2D(d, config.ffn_dim);
        l.w2 = Tensor2D(config.ffn_dim, d);
    }
    for (auto& [name, tensor] : w.named_params()) slots[name] = tensor;

    size_t assigned = 0;
    for (auto& [name, tensor] : bf.blocks) {
        auto it = slots.find(name);
        if (it == slots.end()) {
            throw ParseError("checkpoint " + path.string() + ": unknown block " + name);
        }
        if (!it->second->same_shape(tensor)) {
            throw ParseError("checkpoint " + path.string() + ": block " + name + " shape " +
                             tensor.shape_str() + " != expected " + it->second->shape_str());
        }
        *it->second = std::move(tensor);
        ++assigned;
    }
    if (assigned != slots.size()) {
        throw ParseError("checkpoint " + path.string() + ": " + std::to_string(assigned) +
                         " blocks for " + std::to_string(slots.size()) + " parameters");
    }
    return w;
}

}  // namespace chunkalign::encoder
