#pragma once

#include <stdexcept>
#include <string>

namespace cscache {

// Thrown by exhaustive routines (RIP enumeration) when the requested size
// exceeds what they are willing to enumerate.
class UnsupportedSize : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A synchronous round was closed while some cache had not posted its
// message to a neighbor.
class ProtocolViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

}  // namespace detail
}  // namespace cscache
