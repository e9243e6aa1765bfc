// Core shared definitions: complex scalar type, error handling, numeric
// constants used across the library.
#pragma once

#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace higgsflow {

using cd = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr cd kI{0.0, 1.0};

// Thrown on invalid inputs or violated runtime contracts.  All library
// entry points validate their inputs and throw with a descriptive message
// rather than proceeding on garbage.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

}  // namespace higgsflow
