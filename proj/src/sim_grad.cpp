#include <cmath>

#include "sim_internal.hpp"
#include "softdsl/error.hpp"
#include "softdsl/sdf.hpp"
#include "softdsl/threading.hpp"

namespace sdsl {
namespace mpm {

ContactAdjOut contact_adjoint(const ActuatorSpec& act, const Motion& mot, const Mat3& rot_mat,
                              const Vec3& node_pos, const Vec3& v_in, double margin, double mu,
                              const Vec3& v_out_bar) {
  ContactAdjOut out;
  SdfHit hit = sdf_query(act, node_pos);
  if (hit.d >= margin) {
    out.v_in_bar = v_out_bar;
    return out;
  }
  Vec3 r = node_pos - act.pos;
  bool gripper = act.kind == ActuatorKind::Gripper;
  Vec3 gap_axis = rot_mat.col(0);
  double gap_sign = hit.part == 0 ? 0.5 : -0.5;
  Vec3 v_a = mot.lin + cross(mot.ang, r);
  if (gripper) v_a += gap_axis * (gap_sign * mot.gap_v);
  Vec3 v_rel = v_in - v_a;
  double vn = dot(v_rel, hit.normal);

  Vec3 v_rel_bar{}, n_bar{};
  Vec3 v_a_bar = v_out_bar;  // v_out = v_rel_new + v_a
  if (vn < 0) {
    Vec3 v_t = v_rel - hit.normal * vn;
    double vt_norm = norm(v_t);
    if (vt_norm >= 1e-12) {
      double frac = 1.0 + mu * vn / vt_norm;  // vn < 0
      if (frac > 0) {
        const Vec3& vrn_bar = v_out_bar;
        double frac_bar = dot(vrn_bar, v_t);
        Vec3 v_t_bar = vrn_bar * frac;
        double vn_bar = frac_bar * mu / vt_norm;
        v_t_bar += v_t * (-frac_bar * mu * vn / (vt_norm * vt_norm * vt_norm));
        v_rel_bar += v_t_bar;
        vn_bar -= dot(v_t_bar, hit.normal);
        n_bar -= v_t_bar * vn;
        v_rel_bar += hit.normal * vn_bar;
        n_bar += v_rel * vn_bar;
      }
    }
  } else {
    v_rel_bar = v_out_bar;
  }
  out.v_in_bar = v_rel_bar;
  v_a_bar -= v_rel_bar;

  out.lin_bar += v_a_bar;
  out.ang_bar += cross(r, v_a_bar);
  out.pos_bar -= cross(v_a_bar, mot.ang);
  if (gripper) {
    out.gapv_bar += gap_sign * dot(v_a_bar, gap_axis);
    Mat3 r_bar_mat = Mat3::outer(v_a_bar * (gap_sign * mot.gap_v), Vec3{1, 0, 0});
    quat_to_mat_adj(act.rot, r_bar_mat, out.rot_bar);
  }
  // contact distance only gates the branch; the normal carries pose adjoints
  sdf_query_adj(act, node_pos, 0.0, n_bar, nullptr, &out.pos_bar, &out.rot_bar,
                gripper ? &out.gap_bar : nullptr);
  return out;
}

namespace {

struct AdjBuffers {
  std::vector<Mat3> u_bar, v_bar;
  std::vector<Vec3> sig_bar;
  std::vector<Vec3> nx_bar, nv_bar;
  std::vector<Mat3> nf_bar, nc_bar;
  std::vector<double> act_acc;  // [chunk][actuator][15]
};

AdjBuffers& tls_adj_buffers() {
  thread_local AdjBuffers b;
  return b;
}

}  // namespace

void substep_adj(const EngineConfig& cfg, const std::vector<MaterialParams>& mats,
                 const std::vector<double>& mass, const std::vector<int>& material_id,
                 const Stash& stash, const std::vector<Motion>& mots, BackwardAcc& acc) {
  const SimConfig& sc = cfg.sim;
  const size_t n = stash.x.size();
  const size_t n_act = stash.acts.size();
  const double dx = sc.dx();
  const double inv_dx = static_cast<double>(sc.grid);
  const double dt = sc.dt;
  const double vol = dx * dx * dx / static_cast<double>(sc.particles_per_cell);
  const double kappa = 4.0 * dt * vol * inv_dx * inv_dx;
  const double margin = sc.contact_inflate_cells * dx;
  const GridBox& box = stash.box;
  const size_t chunk_count = static_cast<size_t>(thread_count());

  Workspace& ws = tls_workspace();
  AdjBuffers& ab = tls_adj_buffers();

  // ---- reverse the actuator pose updates (exit poses -> entry poses) ----
  for (size_t k = 0; k < n_act; k++) {
    const ActuatorSpec& entry = stash.acts[k];
    const Motion& mot = mots[k];
    acc.lin_bar[k] += acc.act_pos_bar[k] * dt;
    Quat e = quat_exp(mot.ang, dt);
    Quat qtmp = qmul(e, entry.rot);
    Quat qtmp_bar{0, 0, 0, 0};
    qnormalize_adj(qtmp, acc.act_rot_bar[k], qtmp_bar);
    Quat e_bar{0, 0, 0, 0}, rot_entry_bar{0, 0, 0, 0};
    qmul_adj(e, entry.rot, qtmp_bar, e_bar, rot_entry_bar);
    quat_exp_adj(mot.ang, dt, e_bar, acc.ang_bar[k]);
    acc.act_rot_bar[k] = rot_entry_bar;
    if (entry.kind == ActuatorKind::Gripper) {
      double unc = entry.gap + mot.gap_v * dt;
      if (unc <= cfg.gripper.gap_min || unc >= cfg.gripper.gap_max) acc.act_gap_bar[k] = 0;
      acc.gapv_bar[k] += acc.act_gap_bar[k] * dt;
    }
  }

  // ---- recompute final grid velocities from the stash ----
  std::vector<Mat3> rot_mats(n_act);
  for (size_t k = 0; k < n_act; k++) rot_mats[k] = quat_to_mat(stash.acts[k].rot);
  ws.gvel.resize(box.count);
  ws.gvel_bar.resize(box.count);
  ws.gmom_bar.resize(box.count);
  ws.gmass_bar.resize(box.count);
  parallel_for_chunks(box.count, [&](size_t b, size_t e, int) {
    for (size_t ni = b; ni < e; ni++) {
      if (stash.gmass[ni] <= 0) {
        ws.gvel[ni] = {};
        continue;
      }
      size_t rem = ni;
      int lz = static_cast<int>(rem % static_cast<size_t>(box.n[2]));
      rem /= static_cast<size_t>(box.n[2]);
      int ly = static_cast<int>(rem % static_cast<size_t>(box.n[1]));
      int lx = static_cast<int>(rem / static_cast<size_t>(box.n[1]));
      int gx = box.lo[0] + lx, gy = box.lo[1] + ly, gz = box.lo[2] + lz;
      if (sticky_node(gx, gy, gz, sc.grid, sc.boundary_cells)) {
        ws.gvel[ni] = {};
        continue;
      }
      Vec3 v = stash.gv0[ni];
      Vec3 npos{gx * dx, gy * dx, gz * dx};
      for (size_t k = 0; k < n_act; k++)
        v = contact_apply(stash.acts[k], mots[k], rot_mats[k], npos, v, margin, sc.tool_friction);
      ws.gvel[ni] = v;
    }
  });

  // ---- phase A: plasticity, advection and G2P adjoints ----
  ab.u_bar.resize(n);
  ab.v_bar.resize(n);
  ab.sig_bar.resize(n);
  ab.nx_bar.assign(n, Vec3{});
  ab.nv_bar.resize(n);
  ab.nf_bar.resize(n);
  ab.nc_bar.resize(n);
  ws.vbar_scatter.assign(chunk_count * box.count, Vec3{});
  const double xlo = 1.0 * dx, xhi = 1.0 - 1.0 * dx;

  parallel_for_chunks(n, [&](size_t b, size_t e, int chunk) {
    Vec3* vbar_buf = &ws.vbar_scatter[static_cast<size_t>(chunk) * box.count];
    for (size_t p = b; p < e; p++) {
      const MaterialParams& mp = mats[static_cast<size_t>(material_id[p])];

      // plasticity adjoint: F' = U diag(sig_p) V^T
      const Mat3& fbar = acc.f_bar[p];
      const Mat3& u = stash.svd_u[p];
      const Mat3& v = stash.svd_v[p];
      Vec3 sig_p = plastic_forward(stash.sigma[p], mp, nullptr);
      Mat3 sig_diag = Mat3::diag(sig_p);
      ab.u_bar[p] = (fbar * v) * sig_diag;
      ab.v_bar[p] = mul_atb(fbar, u) * sig_diag;
      Mat3 ufv = mul_atb(u, fbar) * v;
      ab.sig_bar[p] = plastic_adjoint(stash.sigma[p], mp, {ufv(0, 0), ufv(1, 1), ufv(2, 2)});

      // advection clamp mask needs the recomputed new velocity
      Kernel k = make_kernel(stash.x[p], inv_dx);
      Vec3 v_new{};
      for (int i = 0; i < 3; i++)
        for (int j = 0; j < 3; j++) {
          double wij = k.w[0][i] * k.w[1][j];
          for (int l = 0; l < 3; l++)
            v_new += ws.gvel[box.idx(k.base[0] + i, k.base[1] + j, k.base[2] + l)] *
                     (wij * k.w[2][l]);
        }
      Vec3 x_unc = stash.x[p] + v_new * dt;
      Vec3 mask{x_unc.x > xlo && x_unc.x < xhi ? 1.0 : 0.0,
                x_unc.y > xlo && x_unc.y < xhi ? 1.0 : 0.0,
                x_unc.z > xlo && x_unc.z < xhi ? 1.0 : 0.0};
      Vec3 xbar = acc.x_bar[p] * mask;
      ab.nx_bar[p] += xbar;
      Vec3 vprime_bar = acc.v_bar[p] + xbar * dt;
      Mat3 bbar = acc.c_bar[p] * (4.0 * inv_dx * inv_dx);

      for (int i = 0; i < 3; i++)
        for (int j = 0; j < 3; j++) {
          double wij = k.w[0][i] * k.w[1][j];
          for (int l = 0; l < 3; l++) {
            double w = wij * k.w[2][l];
            size_t ni = box.idx(k.base[0] + i, k.base[1] + j, k.base[2] + l);
            Vec3 gv = ws.gvel[ni];
            Vec3 npos{(k.base[0] + i) * dx, (k.base[1] + j) * dx, (k.base[2] + l) * dx};
            Vec3 dpos = npos - stash.x[p];
            Vec3 bd = bbar * dpos;
            vbar_buf[ni] += (vprime_bar + bd) * w;
            double scal = dot(gv, vprime_bar) + dot(gv, bd);
            Vec3 grad_w{k.dw[0][i] * k.w[1][j] * k.w[2][l], k.w[0][i] * k.dw[1][j] * k.w[2][l],
                        k.w[0][i] * k.w[1][j] * k.dw[2][l]};
            ab.nx_bar[p] += grad_w * scal - mul_tv(bbar, gv) * w;
          }
        }
    }
  });

  parallel_for_chunks(box.count, [&](size_t b, size_t e, int) {
    for (size_t ni = b; ni < e; ni++) {
      Vec3 s{};
      for (size_t c = 0; c < chunk_count; c++) s += ws.vbar_scatter[c * box.count + ni];
      ws.gvel_bar[ni] = s;
    }
  });

  // ---- grid reverse ----
  constexpr int kActSlots = 15;
  ab.act_acc.assign(chunk_count * std::max<size_t>(1, n_act) * kActSlots, 0.0);
  Vec3 gravity_dv = sc.gravity * dt;
  parallel_for_chunks(box.count, [&](size_t b, size_t e, int chunk) {
    double* aacc = &ab.act_acc[static_cast<size_t>(chunk) * std::max<size_t>(1, n_act) * kActSlots];
    for (size_t ni = b; ni < e; ni++) {
      double m = stash.gmass[ni];
      if (m <= 0) {
        ws.gmom_bar[ni] = {};
        ws.gmass_bar[ni] = 0;
        continue;
      }
      size_t rem = ni;
      int lz = static_cast<int>(rem % static_cast<size_t>(box.n[2]));
      rem /= static_cast<size_t>(box.n[2]);
      int ly = static_cast<int>(rem % static_cast<size_t>(box.n[1]));
      int lx = static_cast<int>(rem / static_cast<size_t>(box.n[1]));
      int gx = box.lo[0] + lx, gy = box.lo[1] + ly, gz = box.lo[2] + lz;
      Vec3 vbar = ws.gvel_bar[ni];
      if (sticky_node(gx, gy, gz, sc.grid, sc.boundary_cells)) {
        ws.gmom_bar[ni] = {};
        ws.gmass_bar[ni] = 0;
        continue;
      }
      if (n_act > 0) {
        Vec3 npos{gx * dx, gy * dx, gz * dx};
        Vec3 v_stage[8];
        v_stage[0] = stash.gv0[ni];
        for (size_t k = 0; k < n_act; k++)
          v_stage[k + 1] = contact_apply(stash.acts[k], mots[k], rot_mats[k], npos, v_stage[k],
                                         margin, sc.tool_friction);
        for (size_t k = n_act; k-- > 0;) {
          ContactAdjOut o = contact_adjoint(stash.acts[k], mots[k], rot_mats[k], npos, v_stage[k],
                                            margin, sc.tool_friction, vbar);
          vbar = o.v_in_bar;
          double* slot = aacc + k * kActSlots;
          slot[0] += o.pos_bar.x;
          slot[1] += o.pos_bar.y;
          slot[2] += o.pos_bar.z;
          slot[3] += o.rot_bar.w;
          slot[4] += o.rot_bar.x;
          slot[5] += o.rot_bar.y;
          slot[6] += o.rot_bar.z;
          slot[7] += o.gap_bar;
          slot[8] += o.lin_bar.x;
          slot[9] += o.lin_bar.y;
          slot[10] += o.lin_bar.z;
          slot[11] += o.ang_bar.x;
          slot[12] += o.ang_bar.y;
          slot[13] += o.ang_bar.z;
          slot[14] += o.gapv_bar;
        }
      }
      Vec3 v_div = stash.gv0[ni] - gravity_dv;
      ws.gmom_bar[ni] = vbar / m;
      ws.gmass_bar[ni] = -dot(vbar, v_div) / m;
    }
  });
  for (size_t c = 0; c < chunk_count; c++) {
    for (size_t k = 0; k < n_act; k++) {
      const double* slot = &ab.act_acc[(c * std::max<size_t>(1, n_act) + k) * kActSlots];
      acc.act_pos_bar[k] += Vec3{slot[0], slot[1], slot[2]};
      acc.act_rot_bar[k] += Quat{slot[3], slot[4], slot[5], slot[6]};
      acc.act_gap_bar[k] += slot[7];
      acc.lin_bar[k] += Vec3{slot[8], slot[9], slot[10]};
      acc.ang_bar[k] += Vec3{slot[11], slot[12], slot[13]};
      acc.gapv_bar[k] += slot[14];
    }
  }

  // ---- phase B: P2G and stress adjoints ----
  parallel_for_chunks(n, [&](size_t b, size_t e, int) {
    for (size_t p = b; p < e; p++) {
      const MaterialParams& mp = mats[static_cast<size_t>(material_id[p])];
      double m = mass[p];
      const Mat3& a_mat = stash.a_mat[p];
      Kernel k = make_kernel(stash.x[p], inv_dx);
      Vec3 mom0 = stash.v[p] * m;
      Vec3 vbar_p{};
      Mat3 abar = Mat3::zero();
      Vec3 xbar_add{};
      for (int i = 0; i < 3; i++)
        for (int j = 0; j < 3; j++) {
          double wij = k.w[0][i] * k.w[1][j];
          for (int l = 0; l < 3; l++) {
            double w = wij * k.w[2][l];
            size_t ni = box.idx(k.base[0] + i, k.base[1] + j, k.base[2] + l);
            Vec3 mom_bar = ws.gmom_bar[ni];
            double mass_bar = ws.gmass_bar[ni];
            Vec3 npos{(k.base[0] + i) * dx, (k.base[1] + j) * dx, (k.base[2] + l) * dx};
            Vec3 dpos = npos - stash.x[p];
            vbar_p += mom_bar * (w * m);
            abar += Mat3::outer(mom_bar * w, dpos);
            double scal = dot(mom_bar, mom0 + a_mat * dpos) + mass_bar * m;
            Vec3 grad_w{k.dw[0][i] * k.w[1][j] * k.w[2][l], k.w[0][i] * k.dw[1][j] * k.w[2][l],
                        k.w[0][i] * k.w[1][j] * k.dw[2][l]};
            xbar_add += grad_w * scal - mul_tv(a_mat, mom_bar) * w;
          }
        }
      ab.nx_bar[p] += xbar_add;
      ab.nv_bar[p] = vbar_p;

      Mat3 sbar = abar * (-kappa);
      if (cfg.debug_corrupt_adjoint) sbar = sbar * 1.5;
      const Mat3& f_tmp = stash.f_tmp[p];
      const Mat3& u = stash.svd_u[p];
      const Mat3& v = stash.svd_v[p];
      Mat3 r = mul_abt(u, v);
      double mu2 = 2.0 * mp.mu();
      Mat3 fbar_tmp = (sbar * f_tmp + mul_atb(sbar, f_tmp - r)) * mu2;
      Mat3 rbar = (sbar * f_tmp) * (-mu2);
      double jdet = det(f_tmp);
      double jbar = mp.lambda() * (2.0 * jdet - 1.0) * sbar.trace();
      fbar_tmp += cofactor(f_tmp) * jbar;
      Mat3 u_bar = ab.u_bar[p] + rbar * v;
      Mat3 v_bar = ab.v_bar[p] + mul_atb(rbar, u);
      Svd3 sv{u, v, stash.sigma[p]};
      svd3_adj(f_tmp, sv, u_bar, ab.sig_bar[p], v_bar, fbar_tmp);
      Mat3 ic = Mat3::identity() + stash.C[p] * dt;
      ab.nf_bar[p] = mul_atb(ic, fbar_tmp);
      ab.nc_bar[p] = abar * m + mul_abt(fbar_tmp, stash.F[p]) * dt;
    }
  });

  acc.x_bar.swap(ab.nx_bar);
  acc.v_bar.swap(ab.nv_bar);
  acc.f_bar.swap(ab.nf_bar);
  acc.c_bar.swap(ab.nc_bar);
}

}  // namespace mpm

std::vector<std::vector<Action>> Simulator::backward(const Tape& tape,
                                                     const std::vector<FrameAdjoint>& seeds) const {
  using namespace mpm;
  const size_t t_frames = tape.num_frames();
  const size_t n = tape.state0.size();
  const size_t n_act = tape.actuators0.size();
  if (seeds.size() != t_frames)
    fail(ErrorCode::TapeMismatch, "expected one adjoint seed per recorded frame");
  for (const FrameAdjoint& s : seeds) {
    if (!s.x_bar.empty() && s.x_bar.size() != n)
      fail(ErrorCode::TapeMismatch, "adjoint particle count does not match the tape");
    if (!s.act_pos_bar.empty() && s.act_pos_bar.size() != n_act)
      fail(ErrorCode::TapeMismatch, "adjoint actuator count does not match the tape");
  }

  BackwardAcc acc;
  acc.x_bar.assign(n, Vec3{});
  acc.v_bar.assign(n, Vec3{});
  acc.f_bar.assign(n, Mat3::zero());
  acc.c_bar.assign(n, Mat3::zero());
  acc.act_pos_bar.assign(n_act, Vec3{});
  acc.act_rot_bar.assign(n_act, Quat{0, 0, 0, 0});
  acc.act_gap_bar.assign(n_act, 0.0);
  acc.lin_bar.assign(n_act, Vec3{});
  acc.ang_bar.assign(n_act, Vec3{});
  acc.gapv_bar.assign(n_act, 0.0);

  std::vector<std::vector<Action>> grads(t_frames, std::vector<Action>(n_act));
  std::vector<Stash> stashes;
  const int sub_count = cfg_.sim.substeps_per_frame;
  stashes.resize(static_cast<size_t>(sub_count));

  for (size_t f = t_frames; f-- > 0;) {
    // loss seeds at this frame boundary
    const FrameAdjoint& seed = seeds[f];
    if (!seed.x_bar.empty())
      for (size_t p = 0; p < n; p++) acc.x_bar[p] += seed.x_bar[p];
    for (size_t k = 0; k < seed.act_pos_bar.size(); k++) acc.act_pos_bar[k] += seed.act_pos_bar[k];
    for (size_t k = 0; k < seed.act_rot_bar.size(); k++) acc.act_rot_bar[k] += seed.act_rot_bar[k];
    for (size_t k = 0; k < seed.act_gap_bar.size(); k++) acc.act_gap_bar[k] += seed.act_gap_bar[k];

    std::vector<Motion> mots(n_act);
    for (size_t k = 0; k < n_act; k++) mots[k] = clip_action(tape.actions[f][k], cfg_.actions);

    // recompute the frame's substeps, stashing intermediates
    ParticleState st = f == 0 ? tape.state0 : tape.frames[f - 1].state;
    std::vector<ActuatorSpec> acts = f == 0 ? tape.actuators0 : tape.frames[f - 1].actuators;
    for (int s = 0; s < sub_count; s++)
      substep_fwd(cfg_, mats_, st, acts, mots, &stashes[static_cast<size_t>(s)], nullptr,
                  static_cast<int>(f), s);

    for (size_t k = 0; k < n_act; k++) {
      acc.lin_bar[k] = {};
      acc.ang_bar[k] = {};
      acc.gapv_bar[k] = 0;
    }
    for (int s = sub_count; s-- > 0;)
      substep_adj(cfg_, mats_, tape.state0.mass, tape.state0.material_id,
                  stashes[static_cast<size_t>(s)], mots, acc);

    for (size_t k = 0; k < n_act; k++) {
      grads[f][k].lin = acc.lin_bar[k] * mots[k].lin_mask;
      grads[f][k].ang = acc.ang_bar[k] * mots[k].ang_mask;
      grads[f][k].gap_v = acc.gapv_bar[k] * mots[k].gap_mask;
    }
  }
  return grads;
}

}  // namespace sdsl
