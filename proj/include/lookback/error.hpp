#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lookback {

enum class ErrorKind {
  Precondition,     // caller violated an operation's contract
  Config,           // bad configuration or run file
  Transport,        // network-level failure talking to the backend
  Protocol,         // server answered but broke the wire contract
  DataIntegrity,    // server data that cannot be trusted (NaN logprob etc.)
  Stream,           // generation stream died part way through
  Alignment,        // score responses do not line up with a trace
  InsufficientData, // too few records to estimate something
  EmptyInput,
  Coverage,         // record sets disagree on which questions they cover
  Domain,           // math domain error (pass@k with k > n, ...)
  Io,
};

std::string_view to_string(ErrorKind kind);

/// Base error for everything thrown by this library. Only Transport errors are
/// retryable; everything else signals a problem that retrying will not fix.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  bool retryable() const noexcept { return kind_ == ErrorKind::Transport; }

 private:
  ErrorKind kind_;
};

class TransportError : public Error {
 public:
  TransportError(const std::string& what, int attempts)
      : Error(ErrorKind::Transport, what + " (after " + std::to_string(attempts) + " attempt(s))"),
        attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool ok, ErrorKind kind, const std::string& what) {
  if (!ok) fail(kind, what);
}

}  // namespace lookback
