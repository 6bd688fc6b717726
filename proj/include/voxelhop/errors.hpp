#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace voxelhop {

// Error hierarchy shared by the library and the CLI. Each category carries
// the process exit code the CLI maps it to (0 ok, 2 io, 3 config, 4 shape,
// 5 data degeneracy).
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message, int exit_code)
      : std::runtime_error(message), kind_(std::move(kind)), exit_code_(exit_code) {}

  const std::string& kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return exit_code_; }

 private:
  std::string kind_;
  int exit_code_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message, std::string path = {})
      : Error("io", message, 2), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("config", message, 3) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& message) : Error("shape", message, 4) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& message) : Error("data", message, 5) {}
};

}  // namespace voxelhop
