#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sentprobe {

// Base for every precondition violation reported by the library.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A correlation was requested over a constant sequence. Kept distinct from
// InvalidInput so evaluation can flag degenerate providers separately.
class ZeroVariance : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

// An EmbeddingStore was asked for a sentence it does not hold.
class MissingEmbedding : public InvalidInput {
 public:
  explicit MissingEmbedding(const std::string& sentence)
      : InvalidInput("no embedding for sentence: \"" + sentence + "\""),
        sentence_(sentence) {}

  const std::string& sentence() const noexcept { return sentence_; }

 private:
  std::string sentence_;
};

// Malformed input file. Line numbers are 1-based; 0 means "whole file".
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace sentprobe
