#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace doph {

/// Densification strategy applied to the empty bins of a one-permutation sketch.
enum class Scheme : std::uint8_t {
    /// Every empty bin borrows from the nearest non-empty bin in one fixed
    /// circular direction, offset by t*C for a rotation distance t.
    Rotation = 0,
    /// Every empty bin borrows left or right according to a per-bin random
    /// direction bit that is part of the hash family.
    Bidirectional = 1,
};

inline const char* to_string(Scheme s) {
    return s == Scheme::Rotation ? "rotation" : "bidirectional";
}

/// Thrown when an operation receives an empty set or an all-empty sketch.
class EmptyInputError : public std::invalid_argument {
  public:
    explicit EmptyInputError(const std::string& what) : std::invalid_argument(what) {}
};

/// Thrown for structurally invalid parameters (k = 0, mismatched universes, ...).
class ConfigError : public std::invalid_argument {
  public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Thrown when text input cannot be parsed; carries a 1-based line number.
class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string& what, std::uint64_t line)
        : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

    std::uint64_t line() const { return line_; }

  private:
    std::uint64_t line_;
};

/// Thrown when a file cannot be opened, read, or written.
class IoError : public std::runtime_error {
  public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace doph
