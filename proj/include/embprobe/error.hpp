#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace embprobe {

// Broad failure classes. The CLI maps these onto its exit codes.
enum class ErrorKind {
  kValidation,  // bad parameters, config, or data violating an invariant on input
  kIo,          // filesystem / stream failures
  kFormat,      // malformed on-disk artifact
  kInvariant,   // internal consistency check failed
  kQuery,       // bad query against loaded statistics
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(ErrorKind::kValidation, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

class InvariantError : public Error {
 public:
  explicit InvariantError(const std::string& what)
      : Error(ErrorKind::kInvariant, what) {}
};

class QueryError : public Error {
 public:
  explicit QueryError(const std::string& what) : Error(ErrorKind::kQuery, what) {}
};

// Distinct reasons a binary artifact can fail to parse.
enum class FormatErrorCode {
  kBadMagic,
  kVersionMismatch,
  kTruncated,
  kCountMismatch,
  kDimMismatch,
  kInvalidRecord,
};

class FormatError : public Error {
 public:
  FormatError(FormatErrorCode code, const std::string& what)
      : Error(ErrorKind::kFormat, what), code_(code) {}

  FormatErrorCode code() const noexcept { return code_; }

 private:
  FormatErrorCode code_;
};

// Raised while decoding corpus text. offset is the byte offset of the first
// invalid byte in the input stream.
class EncodingError : public ValidationError {
 public:
  EncodingError(std::size_t offset, const std::string& what)
      : ValidationError(what), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace embprobe
