// Common types and error classes shared by every uvsel module.

#ifndef UVSEL_CORE_HPP
#define UVSEL_CORE_HPP

#include <Eigen/Core>
#include <stdexcept>
#include <string>
#include <vector>

namespace uvsel {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inputs violate a documented precondition (bad dimensions, bad parameter).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A file or bundle is missing, unreadable, or inconsistent.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Configuration failed validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

inline double squared_distance(const Vec3& a, const Vec3& b) {
  return (a - b).squaredNorm();
}

}  // namespace uvsel

#endif  // UVSEL_CORE_HPP
