#pragma once

#include <stdexcept>
#include <string>

namespace bogen {

// Error taxonomy shared by the library, the HTTP service (status codes) and
// the CLI (exit codes).

class InvalidArgument : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

class InvalidData : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DegenerateShape : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class FileError : public std::runtime_error {
public:
  FileError(const std::string& path, const std::string& what)
      : std::runtime_error(what + ": " + path), path_(path) {}
  const std::string& path() const noexcept { return path_; }

private:
  std::string path_;
};

/// A required artifact (corpus, checkpoint, landmarks) could not be found.
class MissingArtifact : public FileError {
public:
  explicit MissingArtifact(const std::string& path)
      : FileError(path, "missing artifact") {}
};

class NumericalFailure : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class TrainingFailure : public NumericalFailure {
public:
  TrainingFailure(int epoch, const std::string& what)
      : NumericalFailure(what + " (epoch " + std::to_string(epoch) + ")"),
        epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

private:
  int epoch_;
};

class StateError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

class NotFound : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class FeatureDisabled : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class PreconditionFailed : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace bogen
