#pragma once

#include <stdexcept>
#include <string>

namespace debiaskit {

// Error domains map onto the CLI exit-code contract:
// usage -> 1, data -> 2, io -> 3.
enum class ErrorKind { usage, data, io };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  int exit_code() const noexcept {
    switch (kind_) {
      case ErrorKind::usage: return 1;
      case ErrorKind::data: return 2;
      case ErrorKind::io: return 3;
    }
    return 2;
  }

 private:
  ErrorKind kind_;
};

inline Error usage_error(const std::string& msg) {
  return Error(ErrorKind::usage, msg);
}
inline Error data_error(const std::string& msg) {
  return Error(ErrorKind::data, msg);
}
inline Error io_error(const std::string& msg) {
  return Error(ErrorKind::io, msg);
}

}  // namespace debiaskit
