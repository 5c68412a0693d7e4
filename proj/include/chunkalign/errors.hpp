#pragma once

#include <stdexcept>
#include <string>

namespace chunkalign {

// Shape disagreement between tensors (matmul, losses, optimizer state).
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Structurally valid input that the operation cannot act on (empty text,
// zero-norm row, empty row slice).
struct DegenerateInputError : std::runtime_error {
    explicit DegenerateInputError(const std::string& msg) : std::runtime_error(msg) {}
};

// EncoderConfig / ChunkerConfig / TrainConfig invariant violation.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Chunk span outside sequence bounds or covering only special tokens.
struct SpanError : std::runtime_error {
    explicit SpanError(const std::string& msg) : std::runtime_error(msg) {}
};

// Caller broke a documented precondition (e.g. unsorted spans).
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed record in an external file.
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Teacher record count disagrees with the chunk plan.
struct AlignmentError : std::runtime_error {
    explicit AlignmentError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ScheduleError : std::runtime_error {
    explicit ScheduleError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// grad_check hit a non-finite function value.
struct OracleFailureError : std::runtime_error {
    explicit OracleFailureError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace chunkalign
