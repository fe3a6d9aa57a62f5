#include "nfsense/error.hpp"

namespace nfsense {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::MissingFile: return "missing file";
    case ErrorKind::SizeMismatch: return "size mismatch";
    case ErrorKind::UnknownDtype: return "unknown dtype";
    case ErrorKind::VersionMismatch: return "version mismatch";
    case ErrorKind::Io: return "i/o failure";
    case ErrorKind::Numerical: return "numerical failure";
    case ErrorKind::MemoryBudget: return "memory budget exceeded";
  }
  return "unknown";
}

} // namespace nfsense
