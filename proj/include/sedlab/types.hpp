#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sedlab {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Kernel evaluated at (or numerically at) the origin.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Two particles came within 2R of each other during time integration.
class ContactError : public std::runtime_error {
 public:
  ContactError(double time, std::size_t i, std::size_t j, double distance)
      : std::runtime_error("particle contact at t=" + std::to_string(time) + " between " + std::to_string(i) +
                           " and " + std::to_string(j) + " (|X_i-X_j|=" + std::to_string(distance) + ")"),
        time_(time),
        first_(i),
        second_(j) {}
  double time() const { return time_; }
  std::size_t first() const { return first_; }
  std::size_t second() const { return second_; }

 private:
  double time_;
  std::size_t first_;
  std::size_t second_;
};

/// The effective-viscosity fixed point failed to contract.
class NonContractionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A transport problem exceeded the configured size budget.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Marginals of a transport problem cannot be matched.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sedlab
