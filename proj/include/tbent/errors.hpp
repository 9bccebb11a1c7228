#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tbent {

// Bad configuration or arguments (CLI exit code 2).
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent input data (CLI exit code 3).
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& what, std::int64_t byte_offset = -1)
      : std::runtime_error(byte_offset < 0 ? what
                                           : what + " at byte offset " + std::to_string(byte_offset)),
        offset_(byte_offset) {}

  std::int64_t byte_offset() const noexcept { return offset_; }

private:
  std::int64_t offset_;
};

}  // namespace tbent
