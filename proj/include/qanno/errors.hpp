#pragma once

#include <stdexcept>
#include <string>

namespace qanno {

// Bad configuration or violated call contract. CLI maps this to exit code 1.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem trouble (missing input, unwritable output). CLI maps this to exit code 2.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed corpus or question file; message carries the offending line number.
struct IngestError : std::runtime_error {
    IngestError(const std::string& file, std::size_t line, const std::string& what)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + what), line_number(line) {}
    std::size_t line_number;
};

}  // namespace qanno
