#pragma once

// Shared internals of the differentiable MPM stepper. The forward substep
// optionally records a Stash with everything the adjoint needs; sim_grad.cpp
// consumes stashes in reverse order.

#include <vector>

#include "softdsl/config.hpp"
#include "softdsl/la.hpp"
#include "softdsl/scene.hpp"
#include "softdsl/sim.hpp"

namespace sdsl {
namespace mpm {

// Clipped per-frame actuator velocities with clip masks for the adjoint.
struct Motion {
  Vec3 lin, ang;
  double gap_v = 0;
  Vec3 lin_mask, ang_mask;
  double gap_mask = 1;
};

Motion clip_action(const Action& a, const ActionConfig& b);

// Singular value bounds keeping det(F) inside [0.05, 20].
constexpr double kSigLo = 0.36840314986403866;  // cbrt(0.05)
constexpr double kSigHi = 2.7144176165949063;   // cbrt(20)

Vec3 plastic_forward(const Vec3& sigma, const MaterialParams& m, long long* clamp_events);
// Pulls an adjoint on the projected values back to the raw singular values.
Vec3 plastic_adjoint(const Vec3& sigma, const MaterialParams& m, const Vec3& out_bar);

struct GridBox {
  int lo[3] = {0, 0, 0};
  int n[3] = {0, 0, 0};
  size_t count = 0;
  size_t idx(int gx, int gy, int gz) const {
    return (static_cast<size_t>(gx - lo[0]) * static_cast<size_t>(n[1]) +
            static_cast<size_t>(gy - lo[1])) *
               static_cast<size_t>(n[2]) +
           static_cast<size_t>(gz - lo[2]);
  }
};

struct Stash {
  // substep entry values
  std::vector<Vec3> x, v;
  std::vector<Mat3> F, C;
  std::vector<ActuatorSpec> acts;
  // per-particle intermediates
  std::vector<Mat3> f_tmp, svd_u, svd_v, a_mat;
  std::vector<Vec3> sigma;
  // grid
  GridBox box;
  std::vector<double> gmass;
  std::vector<Vec3> gv0;  // node velocities after gravity, before contact
};

struct Workspace {
  std::vector<double> scatter;   // chunk-major: [chunk][node][mass, mom xyz]
  std::vector<double> gmass;
  std::vector<Vec3> gmom;
  std::vector<Vec3> gvel;
  std::vector<char> blow_flags;  // per chunk
  std::vector<long long> clamp_counts;
  // adjoint buffers
  std::vector<Vec3> gvel_bar;
  std::vector<Vec3> vbar_scatter;  // [chunk][node]
  std::vector<Vec3> gmom_bar;
  std::vector<double> gmass_bar;
};

Workspace& tls_workspace();

// Quadratic B-spline kernel around one particle.
struct Kernel {
  int base[3];
  double w[3][3];   // [axis][offset]
  double dw[3][3];  // d w / d x, world units
};

inline Kernel make_kernel(const Vec3& x, double inv_dx) {
  Kernel k;
  for (int a = 0; a < 3; a++) {
    double xs = x[a] * inv_dx;
    int b = static_cast<int>(std::floor(xs - 0.5));
    k.base[a] = b;
    double fx = xs - b;
    k.w[a][0] = 0.5 * (1.5 - fx) * (1.5 - fx);
    k.w[a][1] = 0.75 - (fx - 1.0) * (fx - 1.0);
    k.w[a][2] = 0.5 * (fx - 0.5) * (fx - 0.5);
    k.dw[a][0] = (fx - 1.5) * inv_dx;
    k.dw[a][1] = -2.0 * (fx - 1.0) * inv_dx;
    k.dw[a][2] = (fx - 0.5) * inv_dx;
  }
  return k;
}

// One substep. Uses entry actuator poses for contact, then advances them.
void substep_fwd(const EngineConfig& cfg, const std::vector<MaterialParams>& mats,
                 ParticleState& st, std::vector<ActuatorSpec>& acts,
                 const std::vector<Motion>& mots, Stash* stash, SimStats* stats, int frame,
                 int sub);

// Adjoint accumulators threaded backward through frames.
struct BackwardAcc {
  std::vector<Vec3> x_bar, v_bar;
  std::vector<Mat3> f_bar, c_bar;
  std::vector<Vec3> act_pos_bar;
  std::vector<Quat> act_rot_bar;
  std::vector<double> act_gap_bar;
  // per-frame motion gradients (reset every frame)
  std::vector<Vec3> lin_bar, ang_bar;
  std::vector<double> gapv_bar;
};

// mass / material_id are rollout constants shared by every substep.
void substep_adj(const EngineConfig& cfg, const std::vector<MaterialParams>& mats,
                 const std::vector<double>& mass, const std::vector<int>& material_id,
                 const Stash& stash, const std::vector<Motion>& mots, BackwardAcc& acc);

// Contact projection against one actuator; used by the grid op and its
// adjoint. rot_mat caches quat_to_mat(act.rot).
Vec3 contact_apply(const ActuatorSpec& act, const Motion& mot, const Mat3& rot_mat,
                   const Vec3& node_pos, const Vec3& v_in, double margin, double mu);

struct ContactAdjOut {
  Vec3 v_in_bar;
  Vec3 pos_bar, lin_bar, ang_bar;
  Quat rot_bar{0, 0, 0, 0};
  double gap_bar = 0, gapv_bar = 0;
};

ContactAdjOut contact_adjoint(const ActuatorSpec& act, const Motion& mot, const Mat3& rot_mat,
                              const Vec3& node_pos, const Vec3& v_in, double margin, double mu,
                              const Vec3& v_out_bar);

inline bool sticky_node(int gx, int gy, int gz, int grid, int bound) {
  return gx < bound || gy < bound || gz < bound || gx > grid - bound || gy > grid - bound ||
         gz > grid - bound;
}

}  // namespace mpm
}  // namespace sdsl
