#pragma once

#include <stdexcept>
#include <string>

namespace navguard {

struct NoPath : std::runtime_error {
  explicit NoPath(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidScenario : std::runtime_error {
  explicit InvalidScenario(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeMismatch : std::runtime_error {
  explicit ShapeMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

struct InsufficientData : std::runtime_error {
  explicit InsufficientData(const std::string& msg) : std::runtime_error(msg) {}
};

// Checkpoint I/O failures, discriminated by kind.
struct CheckpointError : std::runtime_error {
  enum Kind { kBadMagic, kVersionMismatch, kTruncatedFile, kBadCrc, kIo };
  Kind kind;
  CheckpointError(Kind k, const std::string& msg)
      : std::runtime_error(msg), kind(k) {}
};

}  // namespace navguard
