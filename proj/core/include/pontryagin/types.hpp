#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

namespace pontryagin {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Absolute tolerance for set membership and active-constraint detection.
inline constexpr double kMembershipTol = 1e-9;

/// Relative rank tolerance (times the largest singular value).
inline constexpr double kDefaultRankTol = 1e-10;

/// Absolute floor below which a singular value is never counted.
inline constexpr double kSingularValueFloor = 1e-12;

// Error hierarchy. Every library failure derives from Error so callers can
// catch one type; the subclasses carry the failure category.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// A state left its domain X_t.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A control (or point) is not a member of the set it must belong to.
class MembershipError : public Error {
 public:
  using Error::Error;
};

class InfeasibleReferenceError : public Error {
 public:
  using Error::Error;
};

/// A structural hypothesis required by a construction does not hold.
class HypothesisError : public Error {
 public:
  using Error::Error;
};

/// Neither the normal nor the abnormal branch produced multipliers.
class NoMultiplierError : public Error {
 public:
  using Error::Error;
};

class DegenerateMultiplierError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  SchemaError(const std::string& field, int line, const std::string& what)
      : Error(format(field, line, what)), field_(field), line_(line) {}

  const std::string& field() const { return field_; }
  int line() const { return line_; }

 private:
  static std::string format(const std::string& field, int line,
                            const std::string& what) {
    std::string out = "schema error";
    if (line >= 0) out += " at line " + std::to_string(line);
    if (!field.empty()) out += " in field '" + field + "'";
    return out + ": " + what;
  }

  std::string field_;
  int line_;
};

class UnknownInstanceError : public Error {
 public:
  using Error::Error;
};

}  // namespace pontryagin
