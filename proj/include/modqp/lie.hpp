#pragma once

#include <Eigen/Dense>

namespace modqp {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat36 = Eigen::Matrix<double, 3, 6>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Rigid-body pose in SE(3): rotation + translation, meters/radians.
struct Transform {
  Mat3 R = Mat3::Identity();
  Vec3 p = Vec3::Zero();

  static Transform Identity() { return {}; }
  static Transform FromTranslation(const Vec3& t) { return {Mat3::Identity(), t}; }
  static Transform FromRotation(const Mat3& R) { return {R, Vec3::Zero()}; }

  Mat4 matrix() const;
  Vec3 apply(const Vec3& point) const { return R * point + p; }
};

Transform compose(const Transform& a, const Transform& b);
Transform inverse(const Transform& g);
bool approx_equal(const Transform& a, const Transform& b, double tol = 1e-9);

/// Orthonormality defect ||R^T R - I||_inf.
double orthonormality_defect(const Mat3& R);

/// Nearest rotation via polar decomposition (SVD).
Mat3 reorthonormalize(const Mat3& R);

/// Re-orthonormalizes the rotation block in place when its defect
/// exceeds 1e-7. Returns the (possibly cleaned) transform.
Transform cleaned(const Transform& g);

Mat3 rot_x(double a);
Mat3 rot_y(double a);
Mat3 rot_z(double a);
/// Roll-pitch-yaw (X then Y then Z, extrinsic): Rz(yaw)*Ry(pitch)*Rx(roll).
Mat3 rot_rpy(double roll, double pitch, double yaw);

/// Twist coordinates xi = (v, omega). For a unit revolute screw
/// ||omega|| = 1; for a unit prismatic screw omega = 0, ||v|| = 1.
struct TwistCoords {
  Vec3 v = Vec3::Zero();
  Vec3 omega = Vec3::Zero();

  Vec6 vector() const {
    Vec6 x;
    x << v, omega;
    return x;
  }
  static TwistCoords FromVector(const Vec6& x) { return {x.head<3>(), x.tail<3>()}; }

  /// Unit revolute screw about `axis` through point `origin`.
  static TwistCoords Revolute(const Vec3& axis, const Vec3& origin);
  /// Unit prismatic screw along `axis`.
  static TwistCoords Prismatic(const Vec3& axis);
};

/// Spatial velocity of a frame, world coordinates, (v, omega).
struct SpatialVelocity {
  Vec6 coords = Vec6::Zero();
};

Mat3 skew(const Vec3& w);
Vec3 unskew(const Mat3& m);

/// hat: twist coordinates -> 4x4 se(3) matrix.
Mat4 hat(const TwistCoords& x);

/// vee: 4x4 se(3) matrix -> twist coordinates. Throws std::invalid_argument
/// if the rotation block is not skew-symmetric within 1e-9 or the bottom
/// row is nonzero.
TwistCoords vee(const Mat4& m);

/// exp of a unit screw scaled by theta (radians for revolute,
/// meters for prismatic). Closed-form Rodrigues, no series.
Transform exp_twist(const TwistCoords& x, double theta);

/// 6x6 adjoint of g: maps twist coordinates between frames,
/// [[R, p^ R], [0, R]] for the (v, omega) ordering.
Mat6 adjoint(const Transform& g);

/// L(p) = [I3 | -p^], so that L(p) * V is the velocity of the point p
/// rigidly attached to a body moving with spatial velocity V.
Mat36 point_velocity_map(const Vec3& p);

}  // namespace modqp
