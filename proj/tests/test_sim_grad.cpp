#include <functional>
#include <random>

#include "doctest.h"
#include "softdsl/error.hpp"
#include "softdsl/sim.hpp"
#include "support/scenes.hpp"

using namespace sdsl;
using test::blob_scene;

namespace {

// Shared gradcheck scaffolding: a blob under a board or gripper, a scalar
// loss over recorded frames, analytic gradient vs central differences.
struct GradScene {
  EngineConfig cfg;
  ParticleState state0;
  std::vector<ActuatorSpec> acts0;
  std::vector<std::vector<Action>> actions;
};

GradScene make_press_scene(int frames, double spacing = 0.035) {
  GradScene g;
  g.cfg.sim.grid = 16;
  g.cfg.sim.substeps_per_frame = 10;
  g.cfg.threads = 1;
  Simulator sim(g.cfg);
  auto scene = blob_scene({0.5, 0.42, 0.5}, 0.07, spacing);
  g.state0 = sim.init_state(scene.kf, scene.materials);
  ActuatorSpec board = ActuatorSpec::from_config(ActuatorKind::Board, g.cfg);
  board.box_half = {0.1, 0.015, 0.1};
  board.pos = {0.5, 0.56, 0.5};
  g.acts0 = {board};
  g.actions.assign(static_cast<size_t>(frames), std::vector<Action>(1));
  for (auto& fa : g.actions) fa[0].lin = {0.05, -0.6, 0.02};
  return g;
}

// loss = sum over frames of w_f . com(x_f) + u_f . actuator_pos_f
struct LinearLoss {
  std::vector<Vec3> w_state, w_act;

  double eval(const Tape& tape) const {
    double total = 0;
    for (size_t f = 0; f < tape.num_frames(); f++) {
      const auto& st = tape.frames[f].state;
      Vec3 com{};
      for (const Vec3& p : st.x) com += p;
      com = com / static_cast<double>(st.size());
      total += dot(w_state[f], com);
      total += dot(w_act[f], tape.frames[f].actuators[0].pos);
    }
    return total;
  }

  std::vector<FrameAdjoint> seeds(const Tape& tape) const {
    std::vector<FrameAdjoint> s(tape.num_frames());
    size_t n = tape.state0.size();
    for (size_t f = 0; f < tape.num_frames(); f++) {
      s[f].x_bar.assign(n, w_state[f] / static_cast<double>(n));
      s[f].act_pos_bar.assign(1, w_act[f]);
      s[f].act_rot_bar.assign(1, Quat{0, 0, 0, 0});
      s[f].act_gap_bar.assign(1, 0.0);
    }
    return s;
  }
};

}  // namespace

TEST_CASE("zero loss gradients give zero action gradients") {
  GradScene g = make_press_scene(3);
  Simulator sim(g.cfg);
  Tape tape = sim.rollout(g.state0, g.acts0, g.actions);
  std::vector<FrameAdjoint> seeds(tape.num_frames());
  auto grads = sim.backward(tape, seeds);
  for (const auto& fg : grads)
    for (const auto& a : fg) {
      CHECK(a.lin == Vec3{});
      CHECK(a.ang == Vec3{});
      CHECK(a.gap_v == 0.0);
    }
}

TEST_CASE("tape mismatch is rejected") {
  GradScene g = make_press_scene(2);
  Simulator sim(g.cfg);
  Tape tape = sim.rollout(g.state0, g.acts0, g.actions);
  std::vector<FrameAdjoint> seeds(1);  // wrong frame count
  CHECK_THROWS_AS(sim.backward(tape, seeds), Error);
  seeds.assign(tape.num_frames(), {});
  seeds[0].x_bar.assign(3, Vec3{});  // wrong particle count
  CHECK_THROWS_AS(sim.backward(tape, seeds), Error);
}

TEST_CASE("action gradients match finite differences through contact") {
  GradScene g = make_press_scene(4);
  Simulator sim(g.cfg);

  LinearLoss loss;
  std::mt19937_64 gen(77);
  std::uniform_real_distribution<double> u(-1, 1);
  for (size_t f = 0; f < g.actions.size(); f++) {
    loss.w_state.push_back({u(gen), u(gen), u(gen)});
    loss.w_act.push_back({u(gen), u(gen), u(gen)});
  }

  Tape tape = sim.rollout(g.state0, g.acts0, g.actions);
  auto grads = sim.backward(tape, loss.seeds(tape));

  double h = 1e-4;
  int total = 0, good = 0;
  double worst = 0;
  for (size_t f = 0; f < g.actions.size(); f++) {
    for (int c = 0; c < 6; c++) {
      auto plus = g.actions, minus = g.actions;
      double* pp = c < 3 ? &plus[f][0].lin[c] : &plus[f][0].ang[c - 3];
      double* pm = c < 3 ? &minus[f][0].lin[c] : &minus[f][0].ang[c - 3];
      *pp += h;
      *pm -= h;
      double fd = (loss.eval(sim.rollout(g.state0, g.acts0, plus)) -
                   loss.eval(sim.rollout(g.state0, g.acts0, minus))) /
                  (2 * h);
      double an = c < 3 ? grads[f][0].lin[c] : grads[f][0].ang[c - 3];
      double scale = std::max({std::fabs(fd), std::fabs(an), 1e-6});
      double rel = std::fabs(fd - an) / scale;
      worst = std::max(worst, rel);
      total++;
      if (rel < 1e-2) good++;
    }
  }
  INFO("worst rel err ", worst, " good ", good, "/", total);
  CHECK(good >= total * 95 / 100);
}

TEST_CASE("gripper gap gradients flow") {
  EngineConfig cfg;
  cfg.sim.grid = 16;
  cfg.sim.substeps_per_frame = 10;
  cfg.threads = 1;
  Simulator sim(cfg);
  auto scene = blob_scene({0.5, 0.4, 0.5}, 0.05, 0.035, "rubber");
  ParticleState st0 = sim.init_state(scene.kf, scene.materials);
  ActuatorSpec grip = ActuatorSpec::from_config(ActuatorKind::Gripper, cfg);
  grip.pos = {0.5, 0.42, 0.5};
  grip.gap = 0.13;
  std::vector<std::vector<Action>> actions(4, std::vector<Action>(1));
  for (auto& fa : actions) fa[0].gap_v = -0.4;  // close on the blob

  LinearLoss loss;
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-1, 1);
  for (size_t f = 0; f < actions.size(); f++) {
    loss.w_state.push_back({u(gen), u(gen), u(gen)});
    loss.w_act.push_back({0, 0, 0});
  }

  Tape tape = sim.rollout(st0, {grip}, actions);
  auto grads = sim.backward(tape, loss.seeds(tape));

  double h = 1e-4;
  int good = 0, total = 0;
  for (size_t f = 0; f < actions.size(); f++) {
    auto plus = actions, minus = actions;
    plus[f][0].gap_v += h;
    minus[f][0].gap_v -= h;
    double fd = (loss.eval(sim.rollout(st0, {grip}, plus)) -
                 loss.eval(sim.rollout(st0, {grip}, minus))) /
                (2 * h);
    double an = grads[f][0].gap_v;
    double scale = std::max({std::fabs(fd), std::fabs(an), 1e-6});
    total++;
    if (std::fabs(fd - an) / scale < 1e-2) good++;
  }
  CHECK(good == total);
}

TEST_CASE("lifting gradient has the right sign for a squeezing gripper") {
  EngineConfig cfg;
  cfg.sim.grid = 16;
  cfg.sim.substeps_per_frame = 10;
  cfg.threads = 1;
  Simulator sim(cfg);
  auto scene = blob_scene({0.5, 0.4, 0.5}, 0.04, 0.03, "rubber");
  ParticleState st0 = sim.init_state(scene.kf, scene.materials);
  ActuatorSpec grip = ActuatorSpec::from_config(ActuatorKind::Gripper, cfg);
  grip.pos = {0.5, 0.4, 0.5};
  grip.gap = 0.085;  // just around the 0.08-wide blob
  std::vector<std::vector<Action>> actions(5, std::vector<Action>(1));
  for (auto& fa : actions) fa[0].gap_v = -0.5;

  Tape tape = sim.rollout(st0, {grip}, actions);
  // loss = -final com height: pushing the gripper up at a contact frame must
  // have negative gradient (raising the blob lowers the loss)
  std::vector<FrameAdjoint> seeds(tape.num_frames());
  size_t n = st0.size();
  seeds.back().x_bar.assign(n, Vec3{0, -1.0 / static_cast<double>(n), 0});
  auto grads = sim.backward(tape, seeds);
  CHECK(grads[3][0].lin.y < 0);
}
