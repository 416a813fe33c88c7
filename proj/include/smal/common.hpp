#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace smal {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Rigid/affine part transform: x -> rot * x + trans.
struct Affine {
  Mat3 rot = Mat3::Identity();
  Vec3 trans = Vec3::Zero();

  Vec3 operator()(const Vec3& x) const { return rot * x + trans; }

  Affine inverse() const {
    Affine inv;
    inv.rot = rot.inverse();
    inv.trans = -inv.rot * trans;
    return inv;
  }
};

enum class ErrorKind { Validation, Solver, Io };

/// Error with a coarse category so the CLI can map failures to exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error validation_error(const std::string& what) {
  return Error(ErrorKind::Validation, what);
}
inline Error solver_error(const std::string& what) {
  return Error(ErrorKind::Solver, what);
}
inline Error io_error(const std::string& what) {
  return Error(ErrorKind::Io, what);
}

}  // namespace smal
