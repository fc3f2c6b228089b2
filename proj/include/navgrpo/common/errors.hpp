#pragma once

#include <stdexcept>
#include <string>

namespace navgrpo {

// Invalid sizes, bounds or settings supplied by the caller or a config file.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// API misuse: wrong tape, mismatched gradient names, out-of-range indices.
class UsageError : public std::logic_error {
 public:
  explicit UsageError(const std::string& what) : std::logic_error(what) {}
};

class GenerationError : public std::runtime_error {
 public:
  explicit GenerationError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

class TrainingAborted : public std::runtime_error {
 public:
  explicit TrainingAborted(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace navgrpo
