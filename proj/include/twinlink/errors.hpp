#pragma once

#include <stdexcept>
#include <string>

namespace twinlink {

// Bad or unreadable configuration/data file. Message carries path and reason.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  ConfigError(const std::string& path, const std::string& reason)
      : std::runtime_error(path + ": " + reason) {}
};

// Malformed or out-of-order message on the pilot/command channel.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace twinlink
