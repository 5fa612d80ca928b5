#pragma once

#include <map>
#include <string>
#include <vector>

#include "softdsl/config.hpp"
#include "softdsl/la.hpp"
#include "softdsl/scene.hpp"

namespace sdsl {

// Full differentiable simulation state at one substep boundary.
struct ParticleState {
  std::vector<Vec3> x, v;
  std::vector<Mat3> F, C;
  std::vector<double> mass;
  std::vector<int> material_id;

  size_t size() const { return x.size(); }
  bool operator==(const ParticleState&) const = default;
};

// Per control frame, per actuator: linear and angular velocity plus the
// gripper gap closing velocity (ignored by single-body tools). Components
// are clipped to the configured bounds when applied.
struct Action {
  Vec3 lin, ang;
  double gap_v = 0;
  bool operator==(const Action&) const = default;
};

struct SimStats {
  long long sigma_clamp_events = 0;  // det(F) clamps bias gradients; keep visible
};

struct FrameRecord {
  ParticleState state;
  std::vector<ActuatorSpec> actuators;
};

// Per-frame checkpoints sufficient to recompute substeps during the backward
// pass. Replaying the tape forward reproduces the rollout bitwise.
struct Tape {
  ParticleState state0;
  std::vector<ActuatorSpec> actuators0;
  std::vector<std::vector<Action>> actions;  // [frame][actuator]
  std::vector<FrameRecord> frames;           // [frame], states after each frame
  SimStats stats;

  size_t num_frames() const { return frames.size(); }
};

// Loss gradients w.r.t. one recorded frame. Empty vectors mean zero.
struct FrameAdjoint {
  std::vector<Vec3> x_bar;
  std::vector<Vec3> act_pos_bar;
  std::vector<Quat> act_rot_bar;
  std::vector<double> act_gap_bar;
};

class Simulator {
 public:
  explicit Simulator(EngineConfig cfg);

  // v = 0, F = I, C = 0; mass = material density x particle volume.
  ParticleState init_state(const Keyframe& kf,
                           const std::map<std::string, std::string>& materials);

  double particle_volume() const {
    double dx = cfg_.sim.dx();
    return dx * dx * dx / static_cast<double>(cfg_.sim.particles_per_cell);
  }

  // One MLS-MPM substep; actuator poses advance by their clipped velocities.
  void substep(ParticleState& st, std::vector<ActuatorSpec>& acts,
               const std::vector<Action>& actions, SimStats* stats = nullptr,
               int frame = 0, int sub = 0) const;

  // One control frame (substeps_per_frame substeps).
  void step_frame(ParticleState& st, std::vector<ActuatorSpec>& acts,
                  const std::vector<Action>& actions, SimStats* stats = nullptr,
                  int frame = 0) const;

  Tape rollout(const ParticleState& s0, const std::vector<ActuatorSpec>& acts0,
               const std::vector<std::vector<Action>>& actions) const;

  // Reverse-mode adjoint through every substep, recomputed from the per-frame
  // checkpoints. Returns d(loss)/d(action) in the same shape as tape.actions.
  std::vector<std::vector<Action>> backward(const Tape& tape,
                                            const std::vector<FrameAdjoint>& seeds) const;

  const EngineConfig& config() const { return cfg_; }
  const std::vector<MaterialParams>& material_table() const { return mats_; }
  int material_index(const std::string& name);

 private:
  EngineConfig cfg_;
  std::vector<MaterialParams> mats_;
  std::map<std::string, int> mat_index_;
};

}  // namespace sdsl
