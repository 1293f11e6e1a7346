#ifndef IAMSEQ_ERRORS_HPP_
#define IAMSEQ_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace iamseq {

// Every failure surfaced by the library derives from Error and carries a
// short machine-readable category ("dimension", "numeric", ...). The CLI
// prints it as "ERR:<category>: <message>".
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}

  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

// Incompatible shapes or an invalid axis.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& m) : Error("dimension", m) {}
};

// A NaN or Inf was produced or consumed.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& m) : Error("numeric", m) {}
};

// Training loss diverged; message carries epoch/step context.
class DivergenceError : public NumericError {
 public:
  explicit DivergenceError(const std::string& m) : NumericError(m) {}
};

// A precondition of an operation was violated.
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& m) : Error("contract", m) {}
};

// A numeric hyperparameter is out of its admissible range.
class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& m) : Error("parameter", m) {}
};

// Malformed input data (CSV files, sidecars).
class LoadError : public Error {
 public:
  explicit LoadError(const std::string& m) : Error("data", m) {}
};

// A checkpoint file is corrupt or truncated.
class IntegrityError : public Error {
 public:
  explicit IntegrityError(const std::string& m) : Error("integrity", m) {}
};

// A checkpoint was written by an unknown format version.
class VersionError : public Error {
 public:
  explicit VersionError(const std::string& m) : Error("version", m) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& m) : Error("io", m) {}
};

// Invalid run configuration.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& m) : Error("config", m) {}
};

}  // namespace iamseq

#endif  // IAMSEQ_ERRORS_HPP_
