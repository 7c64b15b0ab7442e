#pragma once

#include <stdexcept>
#include <string>

namespace piperecon {

// Broad failure classes; the CLI maps them onto process exit codes.
enum class ErrorKind {
  invalid_input,   // malformed files, bad parameters, violated preconditions
  infeasible,      // reconstruction cannot proceed on this data
  solver_failure,  // numerical failure inside a stage
  mismatch,        // evaluation inputs that do not line up
};

class PipeError : public std::runtime_error {
 public:
  PipeError(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline PipeError invalid_input(const std::string& what) {
  return PipeError(ErrorKind::invalid_input, what);
}

}  // namespace piperecon
