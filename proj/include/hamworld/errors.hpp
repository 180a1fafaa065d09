#pragma once

#include <stdexcept>
#include <string>

namespace hamworld {

// Base of everything the core throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad shapes, invalid hyperparameters, malformed run configs.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or other numerical breakdown.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Checkpoint was produced for a different model configuration.
class CheckpointMismatch : public Error {
 public:
  CheckpointMismatch(std::string expected, std::string found)
      : Error("checkpoint hash mismatch: expected " + expected + ", found " + found),
        expected_(std::move(expected)),
        found_(std::move(found)) {}

  const std::string& expected() const { return expected_; }
  const std::string& found() const { return found_; }

 private:
  std::string expected_;
  std::string found_;
};

// File exists but cannot be decoded (truncated, wrong schema, ...).
class CorruptFile : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Retriable: e.g. the replay buffer does not yet hold a long enough episode.
class NotReady : public Error {
 public:
  using Error::Error;
};

}  // namespace hamworld
