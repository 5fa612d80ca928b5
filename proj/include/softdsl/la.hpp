#pragma once

// Small fixed-size linear algebra for the simulator and geometry kernels.
// Everything is double precision; the adjoint helpers mirror the forward
// functions and are checked against finite differences in the test suite.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

namespace sdsl {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  constexpr Vec3() = default;
  constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}
  static constexpr Vec3 all(double s) { return {s, s, s}; }

  double& operator[](int i) { return (&x)[i]; }
  double operator[](int i) const { return (&x)[i]; }

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3 operator*(const Vec3& o) const { return {x * o.x, y * o.y, z * o.z}; }
  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
  bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }
inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm2(const Vec3& v) { return dot(v, v); }
inline double norm(const Vec3& v) { return std::sqrt(norm2(v)); }
inline Vec3 normalized(const Vec3& v) { double n = norm(v); return n > 0 ? v / n : Vec3{}; }
inline Vec3 cwise_min(const Vec3& a, const Vec3& b) {
  return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)};
}
inline Vec3 cwise_max(const Vec3& a, const Vec3& b) {
  return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)};
}
inline Vec3 cwise_abs(const Vec3& v) { return {std::fabs(v.x), std::fabs(v.y), std::fabs(v.z)}; }
inline bool is_finite(const Vec3& v) {
  return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

// Row-major 3x3 matrix.
struct Mat3 {
  std::array<double, 9> m{};

  constexpr Mat3() = default;
  static Mat3 identity() { Mat3 r; r.m = {1, 0, 0, 0, 1, 0, 0, 0, 1}; return r; }
  static Mat3 zero() { return {}; }
  static Mat3 diag(const Vec3& d) { Mat3 r; r(0, 0) = d.x; r(1, 1) = d.y; r(2, 2) = d.z; return r; }
  static Mat3 outer(const Vec3& a, const Vec3& b) {
    Mat3 r;
    for (int i = 0; i < 3; i++)
      for (int j = 0; j < 3; j++) r(i, j) = a[i] * b[j];
    return r;
  }

  double& operator()(int i, int j) { return m[static_cast<size_t>(i) * 3 + j]; }
  double operator()(int i, int j) const { return m[static_cast<size_t>(i) * 3 + j]; }

  Vec3 row(int i) const { return {(*this)(i, 0), (*this)(i, 1), (*this)(i, 2)}; }
  Vec3 col(int j) const { return {(*this)(0, j), (*this)(1, j), (*this)(2, j)}; }
  void set_col(int j, const Vec3& v) { (*this)(0, j) = v.x; (*this)(1, j) = v.y; (*this)(2, j) = v.z; }

  Mat3 operator+(const Mat3& o) const { Mat3 r; for (int i = 0; i < 9; i++) r.m[i] = m[i] + o.m[i]; return r; }
  Mat3 operator-(const Mat3& o) const { Mat3 r; for (int i = 0; i < 9; i++) r.m[i] = m[i] - o.m[i]; return r; }
  Mat3 operator*(double s) const { Mat3 r; for (int i = 0; i < 9; i++) r.m[i] = m[i] * s; return r; }
  Mat3& operator+=(const Mat3& o) { for (int i = 0; i < 9; i++) m[i] += o.m[i]; return *this; }
  Mat3& operator-=(const Mat3& o) { for (int i = 0; i < 9; i++) m[i] -= o.m[i]; return *this; }
  bool operator==(const Mat3& o) const { return m == o.m; }

  Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }
  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; i++)
      for (int j = 0; j < 3; j++) {
        double s = 0;
        for (int k = 0; k < 3; k++) s += (*this)(i, k) * o(k, j);
        r(i, j) = s;
      }
    return r;
  }
  Mat3 transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; i++)
      for (int j = 0; j < 3; j++) r(i, j) = (*this)(j, i);
    return r;
  }
  double trace() const { return m[0] + m[4] + m[8]; }
};

inline Mat3 operator*(double s, const Mat3& a) { return a * s; }
// Multiply by transposed right factor: a * b^T.
inline Mat3 mul_abt(const Mat3& a, const Mat3& b) {
  Mat3 r;
  for (int i = 0; i < 3; i++)
    for (int j = 0; j < 3; j++)
      r(i, j) = a(i, 0) * b(j, 0) + a(i, 1) * b(j, 1) + a(i, 2) * b(j, 2);
  return r;
}
// a^T * b.
inline Mat3 mul_atb(const Mat3& a, const Mat3& b) {
  Mat3 r;
  for (int i = 0; i < 3; i++)
    for (int j = 0; j < 3; j++)
      r(i, j) = a(0, i) * b(0, j) + a(1, i) * b(1, j) + a(2, i) * b(2, j);
  return r;
}
// Transposed matrix-vector product a^T v.
inline Vec3 mul_tv(const Mat3& a, const Vec3& v) {
  return {a(0, 0) * v.x + a(1, 0) * v.y + a(2, 0) * v.z,
          a(0, 1) * v.x + a(1, 1) * v.y + a(2, 1) * v.z,
          a(0, 2) * v.x + a(1, 2) * v.y + a(2, 2) * v.z};
}
inline double ddot(const Mat3& a, const Mat3& b) {
  double s = 0;
  for (int i = 0; i < 9; i++) s += a.m[i] * b.m[i];
  return s;
}
inline double det(const Mat3& a) {
  return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) -
         a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
         a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
}
// Cofactor matrix; d(det A)/dA = cofactor(A).
inline Mat3 cofactor(const Mat3& a) {
  Mat3 c;
  c(0, 0) = a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1);
  c(0, 1) = a(1, 2) * a(2, 0) - a(1, 0) * a(2, 2);
  c(0, 2) = a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0);
  c(1, 0) = a(0, 2) * a(2, 1) - a(0, 1) * a(2, 2);
  c(1, 1) = a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0);
  c(1, 2) = a(0, 1) * a(2, 0) - a(0, 0) * a(2, 1);
  c(2, 0) = a(0, 1) * a(1, 2) - a(0, 2) * a(1, 1);
  c(2, 1) = a(0, 2) * a(1, 0) - a(0, 0) * a(1, 2);
  c(2, 2) = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
  return c;
}
inline bool is_finite(const Mat3& a) {
  for (double v : a.m)
    if (!std::isfinite(v)) return false;
  return true;
}

// Unit quaternion (w, x, y, z) representing a rotation.
struct Quat {
  double w = 1, x = 0, y = 0, z = 0;

  constexpr Quat() = default;
  constexpr Quat(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {}

  double& operator[](int i) { return (&w)[i]; }
  double operator[](int i) const { return (&w)[i]; }
  bool operator==(const Quat& o) const { return w == o.w && x == o.x && y == o.y && z == o.z; }
  Quat operator+(const Quat& o) const { return {w + o.w, x + o.x, y + o.y, z + o.z}; }
  Quat operator*(double s) const { return {w * s, x * s, y * s, z * s}; }
  Quat& operator+=(const Quat& o) { w += o.w; x += o.x; y += o.y; z += o.z; return *this; }
};

inline double dot(const Quat& a, const Quat& b) {
  return a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
}
inline double norm(const Quat& q) { return std::sqrt(dot(q, q)); }
inline Quat conj(const Quat& q) { return {q.w, -q.x, -q.y, -q.z}; }

inline Quat qmul(const Quat& a, const Quat& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}
// Adjoint of qmul: given out_bar, accumulate into a_bar and b_bar.
inline void qmul_adj(const Quat& a, const Quat& b, const Quat& out_bar, Quat& a_bar, Quat& b_bar) {
  a_bar.w += out_bar.w * b.w + out_bar.x * b.x + out_bar.y * b.y + out_bar.z * b.z;
  a_bar.x += -out_bar.w * b.x + out_bar.x * b.w - out_bar.y * b.z + out_bar.z * b.y;
  a_bar.y += -out_bar.w * b.y + out_bar.x * b.z + out_bar.y * b.w - out_bar.z * b.x;
  a_bar.z += -out_bar.w * b.z - out_bar.x * b.y + out_bar.y * b.x + out_bar.z * b.w;
  b_bar.w += out_bar.w * a.w + out_bar.x * a.x + out_bar.y * a.y + out_bar.z * a.z;
  b_bar.x += -out_bar.w * a.x + out_bar.x * a.w + out_bar.y * a.z - out_bar.z * a.y;
  b_bar.y += -out_bar.w * a.y - out_bar.x * a.z + out_bar.y * a.w + out_bar.z * a.x;
  b_bar.z += -out_bar.w * a.z + out_bar.x * a.y - out_bar.y * a.x + out_bar.z * a.w;
}

inline Quat qnormalize(const Quat& q) {
  double n = norm(q);
  return {q.w / n, q.x / n, q.y / n, q.z / n};
}
inline void qnormalize_adj(const Quat& q, const Quat& out_bar, Quat& q_bar) {
  double n = norm(q);
  double inv = 1.0 / n;
  double d = dot(q, out_bar) * inv * inv * inv;
  q_bar.w += out_bar.w * inv - q.w * d;
  q_bar.x += out_bar.x * inv - q.x * d;
  q_bar.y += out_bar.y * inv - q.y * d;
  q_bar.z += out_bar.z * inv - q.z * d;
}

// Rotation quaternion for angular velocity w applied over time dt.
inline Quat quat_exp(const Vec3& w, double dt) {
  Vec3 half = w * (0.5 * dt);
  double th = norm(half);
  double c = std::cos(th);
  double s;  // sin(th)/th, with series fallback near zero
  if (th < 1e-8) {
    s = 1.0 - th * th / 6.0;
  } else {
    s = std::sin(th) / th;
  }
  return {c, half.x * s, half.y * s, half.z * s};
}
inline void quat_exp_adj(const Vec3& w, double dt, const Quat& out_bar, Vec3& w_bar) {
  Vec3 half = w * (0.5 * dt);
  double th2 = norm2(half);
  double th = std::sqrt(th2);
  double s, ds;  // s = sin(th)/th, ds = d s / d(th^2)
  if (th < 1e-8) {
    s = 1.0 - th2 / 6.0;
    ds = -1.0 / 6.0 + th2 / 60.0;
  } else {
    s = std::sin(th) / th;
    ds = (std::cos(th) - s) / (2.0 * th2);
  }
  // out = (cos th, half * s); d cos(th)/d half = -s * half ; d s/d half = 2 ds half
  Vec3 half_bar = Vec3{out_bar.x, out_bar.y, out_bar.z} * s;
  double vdot = out_bar.x * half.x + out_bar.y * half.y + out_bar.z * half.z;
  half_bar += half * (2.0 * ds * vdot - s * out_bar.w);
  w_bar += half_bar * (0.5 * dt);
}

inline Mat3 quat_to_mat(const Quat& q) {
  double w = q.w, x = q.x, y = q.y, z = q.z;
  Mat3 r;
  r(0, 0) = 1 - 2 * (y * y + z * z);
  r(0, 1) = 2 * (x * y - w * z);
  r(0, 2) = 2 * (x * z + w * y);
  r(1, 0) = 2 * (x * y + w * z);
  r(1, 1) = 1 - 2 * (x * x + z * z);
  r(1, 2) = 2 * (y * z - w * x);
  r(2, 0) = 2 * (x * z - w * y);
  r(2, 1) = 2 * (y * z + w * x);
  r(2, 2) = 1 - 2 * (x * x + y * y);
  return r;
}
// Pull an adjoint on the rotation matrix back to the quaternion components.
inline void quat_to_mat_adj(const Quat& q, const Mat3& r_bar, Quat& q_bar) {
  double w = q.w, x = q.x, y = q.y, z = q.z;
  q_bar.w += 2 * (-z * r_bar(0, 1) + y * r_bar(0, 2) + z * r_bar(1, 0) - x * r_bar(1, 2) -
                  y * r_bar(2, 0) + x * r_bar(2, 1));
  q_bar.x += 2 * (y * r_bar(0, 1) + z * r_bar(0, 2) + y * r_bar(1, 0) - 2 * x * r_bar(1, 1) -
                  w * r_bar(1, 2) + z * r_bar(2, 0) + w * r_bar(2, 1) - 2 * x * r_bar(2, 2));
  q_bar.y += 2 * (-2 * y * r_bar(0, 0) + x * r_bar(0, 1) + w * r_bar(0, 2) + x * r_bar(1, 0) +
                  z * r_bar(1, 2) - w * r_bar(2, 0) + z * r_bar(2, 1) - 2 * y * r_bar(2, 2));
  q_bar.z += 2 * (-2 * z * r_bar(0, 0) - w * r_bar(0, 1) + x * r_bar(0, 2) + w * r_bar(1, 0) -
                  2 * z * r_bar(1, 1) + y * r_bar(1, 2) + x * r_bar(2, 0) + y * r_bar(2, 1));
}

inline Vec3 rotate(const Quat& q, const Vec3& v) { return quat_to_mat(q) * v; }

// Intrinsic XYZ Euler angles (roll about x, pitch about y, yaw about z).
inline Vec3 quat_to_euler(const Quat& q) {
  Mat3 r = quat_to_mat(q);
  double pitch = std::asin(std::clamp(r(0, 2), -1.0, 1.0));
  double roll, yaw;
  if (std::fabs(r(0, 2)) < 1.0 - 1e-9) {
    roll = std::atan2(-r(1, 2), r(2, 2));
    yaw = std::atan2(-r(0, 1), r(0, 0));
  } else {  // gimbal lock
    roll = std::atan2(r(2, 1), r(1, 1));
    yaw = 0;
  }
  return {roll, pitch, yaw};
}

struct Svd3 {
  Mat3 u, v;
  Vec3 sigma;  // descending by magnitude; sigma.z may be negative if det < 0
};

// Signed SVD with u, v in SO(3); see la.cpp.
Svd3 svd3(const Mat3& a);

// Adjoint of svd3; accumulates into a_bar. Denominators between close
// singular values are clamped, matching common differentiable-MPM practice.
void svd3_adj(const Mat3& a, const Svd3& s, const Mat3& u_bar, const Vec3& sigma_bar,
              const Mat3& v_bar, Mat3& a_bar);

}  // namespace sdsl
