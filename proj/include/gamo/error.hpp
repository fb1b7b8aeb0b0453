#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace gamo {

enum class Errc {
  invalid_scores,
  invalid_image,
  invalid_config,
  backend_load,
  no_face,
  incomplete_registration,
  unregistered_player,
  illegal_state,
  session_over,
  io,
  parse,
  dangling_record,
  empty_dataset,
  incomplete_study,
};

const char* to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Raised while reading a weight or template file; offset is the first byte
// that did not match the expected layout.
class BackendLoadError : public Error {
 public:
  BackendLoadError(const std::string& message, std::uint64_t offset)
      : Error(Errc::backend_load,
              message + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line)
      : Error(Errc::parse, "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace gamo
