#include "modqp/lie.hpp"

#include <cmath>
#include <stdexcept>

namespace modqp {

Mat4 Transform::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = R;
  m.topRightCorner<3, 1>() = p;
  return m;
}

Transform compose(const Transform& a, const Transform& b) {
  return cleaned({a.R * b.R, a.R * b.p + a.p});
}

Transform inverse(const Transform& g) {
  Mat3 Rt = g.R.transpose();
  return {Rt, -(Rt * g.p)};
}

bool approx_equal(const Transform& a, const Transform& b, double tol) {
  return (a.R - b.R).cwiseAbs().maxCoeff() <= tol &&
         (a.p - b.p).cwiseAbs().maxCoeff() <= tol;
}

double orthonormality_defect(const Mat3& R) {
  return (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
}

Mat3 reorthonormalize(const Mat3& R) {
  Eigen::JacobiSVD<Mat3> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 Q = svd.matrixU() * svd.matrixV().transpose();
  if (Q.determinant() < 0) {
    Mat3 U = svd.matrixU();
    U.col(2) *= -1.0;
    Q = U * svd.matrixV().transpose();
  }
  return Q;
}

Transform cleaned(const Transform& g) {
  if (orthonormality_defect(g.R) > 1e-7) {
    return {reorthonormalize(g.R), g.p};
  }
  return g;
}

Mat3 rot_x(double a) {
  Mat3 R;
  R << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return R;
}

Mat3 rot_y(double a) {
  Mat3 R;
  R << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return R;
}

Mat3 rot_z(double a) {
  Mat3 R;
  R << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return R;
}

Mat3 rot_rpy(double roll, double pitch, double yaw) {
  return rot_z(yaw) * rot_y(pitch) * rot_x(roll);
}

TwistCoords TwistCoords::Revolute(const Vec3& axis, const Vec3& origin) {
  Vec3 w = axis.normalized();
  return {-w.cross(origin), w};
}

TwistCoords TwistCoords::Prismatic(const Vec3& axis) {
  return {axis.normalized(), Vec3::Zero()};
}

Mat3 skew(const Vec3& w) {
  Mat3 m;
  m << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return m;
}

Vec3 unskew(const Mat3& m) { return {m(2, 1), m(0, 2), m(1, 0)}; }

Mat4 hat(const TwistCoords& x) {
  Mat4 m = Mat4::Zero();
  m.topLeftCorner<3, 3>() = skew(x.omega);
  m.topRightCorner<3, 1>() = x.v;
  return m;
}

TwistCoords vee(const Mat4& m) {
  const Mat3 W = m.topLeftCorner<3, 3>();
  if ((W + W.transpose()).cwiseAbs().maxCoeff() > 1e-9 ||
      m.bottomRows<1>().cwiseAbs().maxCoeff() > 1e-9) {
    throw std::invalid_argument("vee: matrix is not in se(3)");
  }
  return {m.topRightCorner<3, 1>(), unskew(W)};
}

Transform exp_twist(const TwistCoords& x, double theta) {
  if (x.omega.isZero(0.0)) {
    return {Mat3::Identity(), x.v * theta};
  }
  const Vec3& w = x.omega;
  const Mat3 K = skew(w);
  const double s = std::sin(theta);
  const double c = std::cos(theta);
  Mat3 R = Mat3::Identity() + s * K + (1.0 - c) * (K * K);
  Vec3 p = (Mat3::Identity() - R) * w.cross(x.v) + w * (w.dot(x.v)) * theta;
  return {R, p};
}

Mat6 adjoint(const Transform& g) {
  Mat6 A = Mat6::Zero();
  A.topLeftCorner<3, 3>() = g.R;
  A.topRightCorner<3, 3>() = skew(g.p) * g.R;
  A.bottomRightCorner<3, 3>() = g.R;
  return A;
}

Mat36 point_velocity_map(const Vec3& p) {
  Mat36 L;
  L.leftCols<3>() = Mat3::Identity();
  L.rightCols<3>() = -skew(p);
  return L;
}

}  // namespace modqp
