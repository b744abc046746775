#include "lookback/error.hpp"

namespace lookback {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::Config: return "config";
    case ErrorKind::Transport: return "transport";
    case ErrorKind::Protocol: return "protocol";
    case ErrorKind::DataIntegrity: return "data-integrity";
    case ErrorKind::Stream: return "stream";
    case ErrorKind::Alignment: return "alignment";
    case ErrorKind::InsufficientData: return "insufficient-data";
    case ErrorKind::EmptyInput: return "empty-input";
    case ErrorKind::Coverage: return "coverage";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace lookback
