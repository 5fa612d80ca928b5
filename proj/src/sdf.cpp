#include "softdsl/sdf.hpp"

namespace sdsl {

LocalSdf box_sdf_local(const Vec3& half, const Vec3& xi) {
  LocalSdf out;
  Vec3 sgn{xi.x < 0 ? -1.0 : 1.0, xi.y < 0 ? -1.0 : 1.0, xi.z < 0 ? -1.0 : 1.0};
  Vec3 q = cwise_abs(xi) - half;
  Vec3 qp = cwise_max(q, Vec3{});
  double r2 = norm2(qp);
  if (r2 > 0) {
    double r = std::sqrt(r2);
    double inside = std::min(std::max(q.x, std::max(q.y, q.z)), 0.0);  // 0 here
    out.s = r + inside;
    for (int i = 0; i < 3; i++) out.g[i] = sgn[i] * qp[i] / r;
    // H_ij over xi: active coordinates contribute (delta/r - qp qp^T / r^3)
    for (int i = 0; i < 3; i++) {
      bool ai = q[i] > 0;
      for (int j = 0; j < 3; j++) {
        bool aj = q[j] > 0;
        double v = 0;
        if (ai && aj) v = ((i == j ? 1.0 : 0.0) - qp[i] * qp[j] / r2) / r;
        else if (i == j && ai) v = 1.0 / r;
        out.h(i, j) = sgn[i] * sgn[j] * v;
      }
    }
  } else {
    int axis = 0;
    if (q.y > q[axis]) axis = 1;
    if (q.z > q[axis]) axis = 2;
    out.s = q[axis];
    out.g = {};
    out.g[axis] = sgn[axis];
    // interior: piecewise linear, zero curvature
  }
  return out;
}

LocalSdf capsule_sdf_local(double radius, double half_length, const Vec3& xi) {
  LocalSdf out;
  double t = std::clamp(xi.x, -half_length, half_length);
  Vec3 u{xi.x - t, xi.y, xi.z};
  double dist = norm(u);
  out.s = dist - radius;
  if (dist < 1e-9) {
    out.g = {0, 1, 0};  // on the axis: arbitrary but deterministic
    return out;
  }
  Vec3 gu = u / dist;
  out.g = gu;
  bool interior = std::fabs(xi.x) < half_length;
  // distance to a segment: radial curvature 1/dist in the normal complement
  Mat3 p = Mat3::identity();
  if (interior) p(0, 0) = 0;
  out.h = (p - Mat3::outer(gu, gu)) * (1.0 / std::max(dist, 1e-6));
  return out;
}

namespace {

struct LocalQuery {
  LocalSdf sdf;
  Vec3 xi;       // local point fed to the primitive (finger offset removed)
  int part = 0;
};

LocalQuery local_query(const ActuatorSpec& a, const Mat3& rt_unused, const Vec3& xi) {
  (void)rt_unused;
  LocalQuery q;
  switch (a.kind) {
    case ActuatorKind::Knife:
    case ActuatorKind::Board:
      q.xi = xi;
      q.sdf = box_sdf_local(a.box_half, xi);
      return q;
    case ActuatorKind::RollingPin:
      q.xi = xi;
      q.sdf = capsule_sdf_local(a.radius, a.half_length, xi);
      return q;
    case ActuatorKind::Gripper: {
      Vec3 xi0 = xi, xi1 = xi;
      xi0.x -= gripper_finger_offset(a, 0);
      xi1.x -= gripper_finger_offset(a, 1);
      LocalSdf s0 = box_sdf_local(a.finger_half, xi0);
      LocalSdf s1 = box_sdf_local(a.finger_half, xi1);
      if (s0.s <= s1.s) {
        q.sdf = s0;
        q.xi = xi0;
        q.part = 0;
      } else {
        q.sdf = s1;
        q.xi = xi1;
        q.part = 1;
      }
      return q;
    }
  }
  return q;
}

}  // namespace

SdfHit sdf_query(const ActuatorSpec& a, const Vec3& p) {
  Mat3 r = quat_to_mat(a.rot);
  Vec3 xi = mul_tv(r, p - a.pos);
  LocalQuery q = local_query(a, r, xi);
  SdfHit hit;
  hit.d = q.sdf.s;
  hit.normal = r * q.sdf.g;
  hit.part = q.part;
  return hit;
}

void sdf_query_adj(const ActuatorSpec& a, const Vec3& p, double d_bar, const Vec3& n_bar,
                   Vec3* p_bar, Vec3* pos_bar, Quat* rot_bar, double* gap_bar) {
  Mat3 r = quat_to_mat(a.rot);
  Vec3 rel = p - a.pos;
  Vec3 xi = mul_tv(r, rel);
  LocalQuery q = local_query(a, r, xi);

  Mat3 r_bar = Mat3::zero();
  Vec3 n_bar_local = mul_tv(r, n_bar);
  // n = R g: explicit R factor
  r_bar += Mat3::outer(n_bar, q.sdf.g);
  // total adjoint on the local point fed to the primitive
  Vec3 xi_bar = q.sdf.g * d_bar + q.sdf.h * n_bar_local;

  // xi = R^T rel (minus a constant finger offset)
  if (p_bar) *p_bar += r * xi_bar;
  if (pos_bar) *pos_bar -= r * xi_bar;
  r_bar += Mat3::outer(rel, xi_bar);
  if (rot_bar) quat_to_mat_adj(a.rot, r_bar, *rot_bar);
  if (gap_bar && a.kind == ActuatorKind::Gripper)
    *gap_bar += (q.part == 0 ? -0.5 : 0.5) * xi_bar.x;
}

}  // namespace sdsl
