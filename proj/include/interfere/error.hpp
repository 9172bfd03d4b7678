#pragma once

#include <stdexcept>
#include <string>

namespace interfere {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed geometry, workload or experiment description.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Host-side failure while running natively (pinning, allocation, topology).
class HostError : public Error {
 public:
  using Error::Error;
};

}  // namespace interfere
