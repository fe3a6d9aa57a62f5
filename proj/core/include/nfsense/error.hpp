#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nfsense {

enum class ErrorKind {
  InvalidArgument,
  MissingFile,
  SizeMismatch,
  UnknownDtype,
  VersionMismatch,
  Io,
  Numerical,
  MemoryBudget,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so front ends can map
// it onto distinct diagnostics and exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string const& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, std::string const& what) { throw Error(kind, what); }

inline void require(bool condition, std::string const& what) {
  if (!condition) fail(ErrorKind::InvalidArgument, what);
}

} // namespace nfsense
