#pragma once

#include <stdexcept>
#include <string>

namespace maskinject {

/// Raised for contract violations: shape mismatches, empty inputs where a
/// non-empty one is required, malformed files.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace maskinject
