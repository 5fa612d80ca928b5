#pragma once

#include "softdsl/la.hpp"
#include "softdsl/scene.hpp"

namespace sdsl {

// Signed distance query against an actuator at its current pose. Exact for
// boxes and capsules; the gripper takes the min over its two finger boxes.
struct SdfHit {
  double d = 0;
  Vec3 normal;  // d(d)/d(query point), unit except on medial loci
  int part = 0; // gripper finger index that attained the min
};

SdfHit sdf_query(const ActuatorSpec& a, const Vec3& p);

// Accumulates adjoints for d and for the world normal into the query point
// and the pose (position, quaternion, gripper gap). Uses analytic local
// Hessians, so contact normals stay differentiable w.r.t. pose.
void sdf_query_adj(const ActuatorSpec& a, const Vec3& p, double d_bar, const Vec3& n_bar,
                   Vec3* p_bar, Vec3* pos_bar, Quat* rot_bar, double* gap_bar);

// Local-frame pieces, exposed for tests.
struct LocalSdf {
  double s = 0;
  Vec3 g;   // local gradient
  Mat3 h;   // local hessian
};
LocalSdf box_sdf_local(const Vec3& half, const Vec3& xi);
LocalSdf capsule_sdf_local(double radius, double half_length, const Vec3& xi);

// Local offset of a gripper finger center along the local x axis.
inline double gripper_finger_offset(const ActuatorSpec& a, int finger) {
  double off = a.gap * 0.5 + a.finger_half.x;
  return finger == 0 ? off : -off;
}

}  // namespace sdsl
