#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "chunkalign/encoder.hpp"
#include "chunkalign/tensor.hpp"

namespace chunkalign::encoder {

// Checkpoint layout: a text header ("CHUNKALIGN-CKPT 1", every EncoderConfig
// field as "key = value" decimal text, then "blocks = N"), followed by N
// named blocks: one "name rows cols" line, then rows*cols float32
// little-endian payload. The loader validates the total byte length.
constexpr const char* kCheckpointMagic = "CHUNKALIGN-CKPT";
constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Weights& weights);
Weights load_checkpoint(const std::filesystem::path& path);

// Shared block writer/reader, reused by the optimizer-state sidecar.
void write_block_file(const std::filesystem::path& path,
                      const std::vector<std::string>& header_lines,
                      const std::vector<std::pair<std::string, const Tensor2D*>>& blocks);

struct BlockFile {
    std::vector<std::string> header_lines;  // between magic and "blocks = N"
    std::vector<std::pair<std::string, Tensor2D>> blocks;
};
BlockFile read_block_file(const std::filesystem::path& path);

}  // namespace chunkalign::encoder
