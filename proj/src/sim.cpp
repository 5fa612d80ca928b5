#include "softdsl/sim.hpp"

#include <cmath>
#include <cstring>

#include "sim_internal.hpp"
#include "softdsl/error.hpp"
#include "softdsl/sdf.hpp"
#include "softdsl/threading.hpp"

namespace sdsl {
namespace mpm {

Motion clip_action(const Action& a, const ActionConfig& b) {
  Motion m;
  for (int i = 0; i < 3; i++) {
    m.lin[i] = std::clamp(a.lin[i], -b.lin_bound, b.lin_bound);
    m.lin_mask[i] = std::fabs(a.lin[i]) <= b.lin_bound ? 1.0 : 0.0;
    m.ang[i] = std::clamp(a.ang[i], -b.ang_bound, b.ang_bound);
    m.ang_mask[i] = std::fabs(a.ang[i]) <= b.ang_bound ? 1.0 : 0.0;
  }
  m.gap_v = std::clamp(a.gap_v, -b.gap_bound, b.gap_bound);
  m.gap_mask = std::fabs(a.gap_v) <= b.gap_bound ? 1.0 : 0.0;
  return m;
}

Vec3 plastic_forward(const Vec3& sigma, const MaterialParams& m, long long* clamp_events) {
  Vec3 s;
  for (int i = 0; i < 3; i++) {
    s[i] = std::clamp(sigma[i], kSigLo, kSigHi);
    if (s[i] != sigma[i] && clamp_events) (*clamp_events)++;
  }
  if (m.yield_stress >= 1e29) return s;
  Vec3 e{std::log(s.x), std::log(s.y), std::log(s.z)};
  double tr = e.x + e.y + e.z;
  Vec3 dev = e - Vec3::all(tr / 3.0);
  double nrm = norm(dev);
  double dg = nrm - m.yield_stress / (2.0 * m.mu());
  if (dg <= 0 || nrm < 1e-12) return s;
  Vec3 e_out = e - dev * (dg / nrm);
  return {std::exp(e_out.x), std::exp(e_out.y), std::exp(e_out.z)};
}

Vec3 plastic_adjoint(const Vec3& sigma, const MaterialParams& m, const Vec3& out_bar) {
  Vec3 mask;
  Vec3 s;
  for (int i = 0; i < 3; i++) {
    s[i] = std::clamp(sigma[i], kSigLo, kSigHi);
    mask[i] = s[i] == sigma[i] ? 1.0 : 0.0;
  }
  if (m.yield_stress >= 1e29) return out_bar * mask;
  Vec3 e{std::log(s.x), std::log(s.y), std::log(s.z)};
  double tr = e.x + e.y + e.z;
  Vec3 dev = e - Vec3::all(tr / 3.0);
  double nrm = norm(dev);
  double dg = nrm - m.yield_stress / (2.0 * m.mu());
  if (dg <= 0 || nrm < 1e-12) return out_bar * mask;

  double alpha = dg / nrm;
  Vec3 e_out = e - dev * alpha;
  Vec3 sig_out{std::exp(e_out.x), std::exp(e_out.y), std::exp(e_out.z)};
  // chain exp
  Vec3 eo_bar = out_bar * sig_out;
  // J^T = I - alpha P - (1 - alpha)/nrm^2 dev dev^T, P = I - (1/3) ones
  double mean_eo = (eo_bar.x + eo_bar.y + eo_bar.z) / 3.0;
  Vec3 p_eo = eo_bar - Vec3::all(mean_eo);
  Vec3 e_bar = eo_bar - p_eo * alpha - dev * ((1.0 - alpha) / (nrm * nrm) * dot(dev, eo_bar));
  // chain log and clamp
  return Vec3{e_bar.x / s.x, e_bar.y / s.y, e_bar.z / s.z} * mask;
}

Vec3 contact_apply(const ActuatorSpec& act, const Motion& mot, const Mat3& rot_mat,
                   const Vec3& node_pos, const Vec3& v_in, double margin, double mu) {
  SdfHit hit = sdf_query(act, node_pos);
  if (hit.d >= margin) return v_in;
  Vec3 v_a = mot.lin + cross(mot.ang, node_pos - act.pos);
  if (act.kind == ActuatorKind::Gripper) {
    double sign = hit.part == 0 ? 0.5 : -0.5;
    v_a += rot_mat.col(0) * (sign * mot.gap_v);
  }
  Vec3 v_rel = v_in - v_a;
  double vn = dot(v_rel, hit.normal);
  if (vn < 0) {
    Vec3 v_t = v_rel - hit.normal * vn;
    double vt_norm = norm(v_t);
    if (vt_norm < 1e-12) {
      v_rel = {};
    } else {
      double frac = 1.0 + mu * vn / vt_norm;  // vn < 0
      v_rel = frac > 0 ? v_t * frac : Vec3{};
    }
  }
  return v_rel + v_a;
}

Workspace& tls_workspace() {
  thread_local Workspace ws;
  return ws;
}

void substep_fwd(const EngineConfig& cfg, const std::vector<MaterialParams>& mats,
                 ParticleState& st, std::vector<ActuatorSpec>& acts,
                 const std::vector<Motion>& mots, Stash* stash, SimStats* stats, int frame,
                 int sub) {
  const SimConfig& sc = cfg.sim;
  const size_t n = st.size();
  const double dx = sc.dx();
  const double inv_dx = static_cast<double>(sc.grid);
  const double dt = sc.dt;
  const double vol = dx * dx * dx / static_cast<double>(sc.particles_per_cell);
  const double kappa = 4.0 * dt * vol * inv_dx * inv_dx;
  const double margin = sc.contact_inflate_cells * dx;
  const int nt = thread_count();

  Workspace& ws = tls_workspace();

  if (stash) {
    stash->x = st.x;
    stash->v = st.v;
    stash->F = st.F;
    stash->C = st.C;
    stash->acts = acts;
    stash->f_tmp.resize(n);
    stash->svd_u.resize(n);
    stash->svd_v.resize(n);
    stash->a_mat.resize(n);
    stash->sigma.resize(n);
  }

  // active grid box from the particle bounding box
  Vec3 lo = st.x[0], hi = st.x[0];
  for (size_t i = 1; i < n; i++) {
    lo = cwise_min(lo, st.x[i]);
    hi = cwise_max(hi, st.x[i]);
  }
  GridBox box;
  for (int a = 0; a < 3; a++) {
    int blo = static_cast<int>(std::floor(lo[a] * inv_dx - 0.5));
    int bhi = static_cast<int>(std::floor(hi[a] * inv_dx - 0.5)) + 2;
    box.lo[a] = std::max(0, blo);
    int top = std::min(sc.grid, bhi);
    box.n[a] = top - box.lo[a] + 1;
    if (box.n[a] < 1)
      fail(ErrorCode::NumericalBlowup, "particles left the workspace at frame " +
                                           std::to_string(frame) + " substep " +
                                           std::to_string(sub));
  }
  box.count = static_cast<size_t>(box.n[0]) * static_cast<size_t>(box.n[1]) *
              static_cast<size_t>(box.n[2]);

  size_t chunk_count = static_cast<size_t>(nt);
  ws.scatter.assign(chunk_count * box.count * 4, 0.0);
  ws.gmass.resize(box.count);
  ws.gmom.resize(box.count);
  ws.gvel.resize(box.count);
  ws.blow_flags.assign(chunk_count, 0);
  ws.clamp_counts.assign(chunk_count, 0);

  // ---- P2G ----
  parallel_for_chunks(n, [&](size_t b, size_t e, int chunk) {
    double* buf = &ws.scatter[static_cast<size_t>(chunk) * box.count * 4];
    for (size_t p = b; p < e; p++) {
      const MaterialParams& mp = mats[static_cast<size_t>(st.material_id[p])];
      Mat3 f_tmp = (Mat3::identity() + st.C[p] * dt) * st.F[p];
      Svd3 sv = svd3(f_tmp);
      Mat3 r = mul_abt(sv.u, sv.v);
      double jdet = det(f_tmp);
      Mat3 stress = (f_tmp - r) * (2.0 * mp.mu());
      stress = mul_abt(stress, f_tmp);
      double lam_term = mp.lambda() * jdet * (jdet - 1.0);
      stress(0, 0) += lam_term;
      stress(1, 1) += lam_term;
      stress(2, 2) += lam_term;
      Mat3 a_mat = stress * (-kappa) + st.C[p] * st.mass[p];
      if (stash) {
        stash->f_tmp[p] = f_tmp;
        stash->svd_u[p] = sv.u;
        stash->svd_v[p] = sv.v;
        stash->sigma[p] = sv.sigma;
        stash->a_mat[p] = a_mat;
      }

      Kernel k = make_kernel(st.x[p], inv_dx);
      double mv = st.mass[p];
      Vec3 mom0 = st.v[p] * mv;
      for (int i = 0; i < 3; i++)
        for (int j = 0; j < 3; j++) {
          double wij = k.w[0][i] * k.w[1][j];
          for (int l = 0; l < 3; l++) {
            double w = wij * k.w[2][l];
            Vec3 npos{(k.base[0] + i) * dx, (k.base[1] + j) * dx, (k.base[2] + l) * dx};
            Vec3 dpos = npos - st.x[p];
            Vec3 contrib = (mom0 + a_mat * dpos) * w;
            size_t ni = box.idx(k.base[0] + i, k.base[1] + j, k.base[2] + l) * 4;
            buf[ni] += w * mv;
            buf[ni + 1] += contrib.x;
            buf[ni + 2] += contrib.y;
            buf[ni + 3] += contrib.z;
          }
        }
    }
  });

  // deterministic reduction over chunk buffers
  parallel_for_chunks(box.count, [&](size_t b, size_t e, int) {
    for (size_t ni = b; ni < e; ni++) {
      double m = 0;
      Vec3 mom{};
      for (size_t c = 0; c < chunk_count; c++) {
        const double* buf = &ws.scatter[(c * box.count + ni) * 4];
        m += buf[0];
        mom += Vec3{buf[1], buf[2], buf[3]};
      }
      ws.gmass[ni] = m;
      ws.gmom[ni] = mom;
    }
  });

  // ---- grid op ----
  std::vector<Mat3> rot_mats(acts.size());
  for (size_t k = 0; k < acts.size(); k++) rot_mats[k] = quat_to_mat(acts[k].rot);
  if (stash) {
    stash->box = box;
    stash->gmass = ws.gmass;
    stash->gv0.resize(box.count);
  }
  Vec3 gravity_dv = sc.gravity * dt;
  parallel_for_chunks(box.count, [&](size_t b, size_t e, int) {
    for (size_t ni = b; ni < e; ni++) {
      double m = ws.gmass[ni];
      if (m <= 0) {
        ws.gvel[ni] = {};
        if (stash) stash->gv0[ni] = {};
        continue;
      }
      size_t rem = ni;
      int lz = static_cast<int>(rem % static_cast<size_t>(box.n[2]));
      rem /= static_cast<size_t>(box.n[2]);
      int ly = static_cast<int>(rem % static_cast<size_t>(box.n[1]));
      int lx = static_cast<int>(rem / static_cast<size_t>(box.n[1]));
      int gx = box.lo[0] + lx, gy = box.lo[1] + ly, gz = box.lo[2] + lz;

      Vec3 v = ws.gmom[ni] / m + gravity_dv;
      if (stash) stash->gv0[ni] = v;
      if (sticky_node(gx, gy, gz, sc.grid, sc.boundary_cells)) {
        ws.gvel[ni] = {};
        continue;
      }
      Vec3 npos{gx * dx, gy * dx, gz * dx};
      for (size_t k = 0; k < acts.size(); k++)
        v = contact_apply(acts[k], mots[k], rot_mats[k], npos, v, margin, sc.tool_friction);
      ws.gvel[ni] = v;
    }
  });

  // ---- G2P ----
  const double xlo = 1.0 * dx, xhi = 1.0 - 1.0 * dx;
  parallel_for_chunks(n, [&](size_t b, size_t e, int chunk) {
    long long clamps = 0;
    bool blown = false;
    for (size_t p = b; p < e; p++) {
      Kernel k = make_kernel(st.x[p], inv_dx);
      Vec3 v_new{};
      Mat3 bmat = Mat3::zero();
      for (int i = 0; i < 3; i++)
        for (int j = 0; j < 3; j++) {
          double wij = k.w[0][i] * k.w[1][j];
          for (int l = 0; l < 3; l++) {
            double w = wij * k.w[2][l];
            size_t ni = box.idx(k.base[0] + i, k.base[1] + j, k.base[2] + l);
            Vec3 gv = ws.gvel[ni];
            Vec3 npos{(k.base[0] + i) * dx, (k.base[1] + j) * dx, (k.base[2] + l) * dx};
            v_new += gv * w;
            bmat += Mat3::outer(gv * w, npos - st.x[p]);
          }
        }
      Mat3 c_new = bmat * (4.0 * inv_dx * inv_dx);
      Vec3 x_new = st.x[p] + v_new * dt;
      x_new = cwise_max(cwise_min(x_new, Vec3::all(xhi)), Vec3::all(xlo));

      const MaterialParams& mp = mats[static_cast<size_t>(st.material_id[p])];
      Vec3 sigma = stash ? stash->sigma[p] : Vec3{};
      Mat3 u, vm;
      if (stash) {
        u = stash->svd_u[p];
        vm = stash->svd_v[p];
      } else {
        Mat3 f_tmp = (Mat3::identity() + st.C[p] * dt) * st.F[p];
        Svd3 sv = svd3(f_tmp);
        u = sv.u;
        vm = sv.v;
        sigma = sv.sigma;
      }
      Vec3 sig_p = plastic_forward(sigma, mp, &clamps);
      Mat3 f_new = mul_abt(u * Mat3::diag(sig_p), vm);

      if (!is_finite(v_new) || !is_finite(f_new)) blown = true;
      st.v[p] = v_new;
      st.C[p] = c_new;
      st.x[p] = x_new;
      st.F[p] = f_new;
    }
    ws.clamp_counts[static_cast<size_t>(chunk)] += clamps;
    if (blown) ws.blow_flags[static_cast<size_t>(chunk)] = 1;
  });

  for (size_t c = 0; c < chunk_count; c++) {
    if (ws.blow_flags[c])
      fail(ErrorCode::NumericalBlowup, "non-finite state at frame " + std::to_string(frame) +
                                           " substep " + std::to_string(sub));
    if (stats) stats->sigma_clamp_events += ws.clamp_counts[c];
  }

  // ---- actuator pose update ----
  for (size_t k = 0; k < acts.size(); k++) {
    ActuatorSpec& a = acts[k];
    a.pos += mots[k].lin * dt;
    a.rot = qnormalize(qmul(quat_exp(mots[k].ang, dt), a.rot));
    if (a.kind == ActuatorKind::Gripper)
      a.gap = std::clamp(a.gap + mots[k].gap_v * dt, cfg.gripper.gap_min, cfg.gripper.gap_max);
  }
}

}  // namespace mpm

Simulator::Simulator(EngineConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.threads > 0) set_thread_count(cfg_.threads);
}

int Simulator::material_index(const std::string& name) {
  auto it = mat_index_.find(name);
  if (it != mat_index_.end()) return it->second;
  const MaterialParams& m = cfg_.material(name);
  int id = static_cast<int>(mats_.size());
  mats_.push_back(m);
  mat_index_[name] = id;
  return id;
}

ParticleState Simulator::init_state(const Keyframe& kf,
                                    const std::map<std::string, std::string>& materials) {
  ParticleState st;
  size_t n = kf.particle_count();
  st.x = kf.positions;
  st.v.assign(n, Vec3{});
  st.F.assign(n, Mat3::identity());
  st.C.assign(n, Mat3::zero());
  st.mass.resize(n);
  st.material_id.resize(n);
  double vol = particle_volume();
  for (const SceneObject& o : kf.objects) {
    auto it = materials.find(o.name);
    if (it == materials.end())
      fail(ErrorCode::Validation, "object '" + o.name + "' has no material");
    int id = material_index(it->second);
    for (size_t i = o.span.begin; i < o.span.end(); i++) {
      st.material_id[i] = id;
      st.mass[i] = mats_[static_cast<size_t>(id)].density * vol;
    }
  }
  return st;
}

void Simulator::substep(ParticleState& st, std::vector<ActuatorSpec>& acts,
                        const std::vector<Action>& actions, SimStats* stats, int frame,
                        int sub) const {
  if (actions.size() != acts.size())
    fail(ErrorCode::InvalidArgument, "one action per actuator required");
  std::vector<mpm::Motion> mots(actions.size());
  for (size_t k = 0; k < actions.size(); k++) mots[k] = mpm::clip_action(actions[k], cfg_.actions);
  mpm::substep_fwd(cfg_, mats_, st, acts, mots, nullptr, stats, frame, sub);
}

void Simulator::step_frame(ParticleState& st, std::vector<ActuatorSpec>& acts,
                           const std::vector<Action>& actions, SimStats* stats,
                           int frame) const {
  if (actions.size() != acts.size())
    fail(ErrorCode::InvalidArgument, "one action per actuator required");
  std::vector<mpm::Motion> mots(actions.size());
  for (size_t k = 0; k < actions.size(); k++) mots[k] = mpm::clip_action(actions[k], cfg_.actions);
  for (int s = 0; s < cfg_.sim.substeps_per_frame; s++)
    mpm::substep_fwd(cfg_, mats_, st, acts, mots, nullptr, stats, frame, s);
}

Tape Simulator::rollout(const ParticleState& s0, const std::vector<ActuatorSpec>& acts0,
                        const std::vector<std::vector<Action>>& actions) const {
  Tape tape;
  tape.state0 = s0;
  tape.actuators0 = acts0;
  tape.actions = actions;
  ParticleState st = s0;
  std::vector<ActuatorSpec> acts = acts0;
  tape.frames.reserve(actions.size());
  for (size_t f = 0; f < actions.size(); f++) {
    step_frame(st, acts, actions[f], &tape.stats, static_cast<int>(f));
    tape.frames.push_back({st, acts});
  }
  return tape;
}

}  // namespace sdsl
