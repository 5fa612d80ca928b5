#include "softdsl/sdf.hpp"

#include <random>

#include "doctest.h"

using namespace sdsl;

namespace {

ActuatorSpec make_board() {
  ActuatorSpec a;
  a.kind = ActuatorKind::Board;
  a.box_half = {0.1, 0.02, 0.08};
  a.pos = {0.5, 0.5, 0.5};
  return a;
}

ActuatorSpec make_pin() {
  ActuatorSpec a;
  a.kind = ActuatorKind::RollingPin;
  a.radius = 0.03;
  a.half_length = 0.1;
  a.pos = {0.5, 0.5, 0.5};
  return a;
}

ActuatorSpec make_gripper() {
  ActuatorSpec a;
  a.kind = ActuatorKind::Gripper;
  a.finger_half = {0.01, 0.05, 0.02};
  a.gap = 0.06;
  a.pos = {0.5, 0.5, 0.5};
  return a;
}

}  // namespace

TEST_CASE("sdf values on canonical points") {
  ActuatorSpec board = make_board();
  // face center, outside by 0.1 along +y
  CHECK(sdf_query(board, {0.5, 0.5 + 0.02 + 0.1, 0.5}).d == doctest::Approx(0.1));
  // inside the box
  CHECK(sdf_query(board, {0.5, 0.5, 0.5}).d == doctest::Approx(-0.02));

  ActuatorSpec pin = make_pin();
  // a point on the capsule axis
  CHECK(sdf_query(pin, {0.5, 0.5, 0.5}).d == doctest::Approx(-0.03));
  CHECK(sdf_query(pin, {0.5 + 0.05, 0.5 + 0.08, 0.5}).d == doctest::Approx(0.05));
  // beyond the end cap
  CHECK(sdf_query(pin, {0.5 + 0.1 + 0.07, 0.5, 0.5}).d == doctest::Approx(0.04));

  ActuatorSpec grip = make_gripper();
  // midpoint between fingers: distance to the inner face of either finger
  CHECK(sdf_query(grip, {0.5, 0.5, 0.5}).d == doctest::Approx(0.03));
  // inside finger 0 (+x side)
  double off = gripper_finger_offset(grip, 0);
  CHECK(sdf_query(grip, {0.5 + off, 0.5, 0.5}).d == doctest::Approx(-0.01));
  CHECK(sdf_query(grip, {0.5 + off, 0.5, 0.5}).part == 0);
  CHECK(sdf_query(grip, {0.5 - off, 0.5, 0.5}).part == 1);
}

TEST_CASE("sdf rotation consistency") {
  ActuatorSpec board = make_board();
  board.rot = qnormalize({0.9, 0.2, 0.3, -0.1});
  Mat3 r = quat_to_mat(board.rot);
  // a point placed at local (0, half.y + 0.05, 0) must be 0.05 outside
  Vec3 p = board.pos + r * Vec3{0, board.box_half.y + 0.05, 0};
  CHECK(sdf_query(board, p).d == doctest::Approx(0.05));
  // the normal is the rotated +y axis
  Vec3 n = sdf_query(board, p).normal;
  CHECK(norm(n - r * Vec3{0, 1, 0}) < 1e-9);
}

TEST_CASE("sdf is 1-Lipschitz in the query point") {
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(0.3, 0.7);
  for (const ActuatorSpec& a : {make_board(), make_pin(), make_gripper()}) {
    for (int i = 0; i < 200; i++) {
      Vec3 p{u(gen), u(gen), u(gen)}, q{u(gen), u(gen), u(gen)};
      double dd = std::fabs(sdf_query(a, p).d - sdf_query(a, q).d);
      CHECK(dd <= norm(p - q) + 1e-12);
    }
  }
}

TEST_CASE("sdf gradients match finite differences away from medial loci") {
  std::mt19937_64 gen(10);
  std::uniform_real_distribution<double> u(0.25, 0.75);
  for (ActuatorSpec a : {make_board(), make_pin(), make_gripper()}) {
    a.rot = qnormalize({0.95, 0.1, -0.2, 0.15});
    int checked = 0;
    for (int i = 0; i < 120 && checked < 40; i++) {
      Vec3 p{u(gen), u(gen), u(gen)};
      SdfHit hit = sdf_query(a, p);
      if (std::fabs(hit.d) < 0.005) continue;  // too close to the surface for FD
      double h = 1e-6;
      // query-point gradient
      Vec3 fd;
      bool smooth = true;
      for (int axis = 0; axis < 3; axis++) {
        Vec3 pp = p, pm = p;
        pp[axis] += h;
        pm[axis] -= h;
        double f2 = sdf_query(a, pp).d, f1 = sdf_query(a, pm).d;
        fd[axis] = (f2 - f1) / (2 * h);
        // detect kink crossings (medial axis / part switches)
        if (std::fabs(f2 + f1 - 2 * hit.d) > 1e-9) smooth = false;
      }
      if (!smooth) continue;
      CHECK(norm(fd - hit.normal) < 1e-5 * std::max(1.0, norm(fd)));
      checked++;

      // pose adjoints: d w.r.t. position, quaternion, gap
      Vec3 p_bar{}, pos_bar{};
      Quat rot_bar{0, 0, 0, 0};
      double gap_bar = 0;
      sdf_query_adj(a, p, 1.0, Vec3{}, &p_bar, &pos_bar, &rot_bar, &gap_bar);
      for (int axis = 0; axis < 3; axis++) {
        ActuatorSpec ap = a, am = a;
        ap.pos[axis] += h;
        am.pos[axis] -= h;
        double fdp = (sdf_query(ap, p).d - sdf_query(am, p).d) / (2 * h);
        CHECK(pos_bar[axis] == doctest::Approx(fdp).epsilon(1e-4).scale(0.01));
      }
      for (int k = 0; k < 4; k++) {
        ActuatorSpec ap = a, am = a;
        ap.rot[k] += h;
        am.rot[k] -= h;
        double fdq = (sdf_query(ap, p).d - sdf_query(am, p).d) / (2 * h);
        CHECK(rot_bar[k] == doctest::Approx(fdq).epsilon(1e-4).scale(0.01));
      }
      if (a.kind == ActuatorKind::Gripper) {
        ActuatorSpec ap = a, am = a;
        ap.gap += h;
        am.gap -= h;
        double fdg = (sdf_query(ap, p).d - sdf_query(am, p).d) / (2 * h);
        CHECK(gap_bar == doctest::Approx(fdg).epsilon(1e-4).scale(0.01));
      }
    }
    CHECK(checked >= 20);
  }
}

TEST_CASE("sdf normal adjoint (hessian path) matches finite differences") {
  std::mt19937_64 gen(12);
  std::uniform_real_distribution<double> u(0.25, 0.75);
  std::uniform_real_distribution<double> w(-1, 1);
  for (ActuatorSpec a : {make_pin(), make_board()}) {
    a.rot = qnormalize({0.9, -0.1, 0.25, 0.05});
    int checked = 0;
    for (int i = 0; i < 200 && checked < 15; i++) {
      Vec3 p{u(gen), u(gen), u(gen)};
      SdfHit hit = sdf_query(a, p);
      if (std::fabs(hit.d) < 0.01) continue;
      Vec3 n_bar{w(gen), w(gen), w(gen)};
      double h = 1e-6;
      // functional: <n_bar, normal(p, pose)>
      auto f = [&](const ActuatorSpec& spec, const Vec3& q) {
        return dot(n_bar, sdf_query(spec, q).normal);
      };
      // smoothness probe: skip active-set boundaries where the hessian jumps
      bool smooth = true;
      for (int axis = 0; axis < 3 && smooth; axis++) {
        Vec3 pp = p, pm = p;
        pp[axis] += 50 * h;
        pm[axis] -= 50 * h;
        if (norm(sdf_query(a, pp).normal - sdf_query(a, pm).normal) > 0.2) smooth = false;
      }
      if (!smooth) continue;

      Vec3 p_bar{}, pos_bar{};
      Quat rot_bar{0, 0, 0, 0};
      sdf_query_adj(a, p, 0.0, n_bar, &p_bar, &pos_bar, &rot_bar, nullptr);
      bool ok = true;
      for (int axis = 0; axis < 3; axis++) {
        Vec3 pp = p, pm = p;
        pp[axis] += h;
        pm[axis] -= h;
        double fd = (f(a, pp) - f(a, pm)) / (2 * h);
        if (std::fabs(p_bar[axis] - fd) > 1e-3 * (1 + std::fabs(fd))) ok = false;
        CHECK(p_bar[axis] == doctest::Approx(fd).epsilon(1e-3).scale(1.0));
      }
      for (int k = 0; k < 4; k++) {
        ActuatorSpec ap = a, am = a;
        ap.rot[k] += h;
        am.rot[k] -= h;
        double fd = (f(ap, p) - f(am, p)) / (2 * h);
        CHECK(rot_bar[k] == doctest::Approx(fd).epsilon(1e-3).scale(1.0));
      }
      if (ok) checked++;
    }
    CHECK(checked >= 10);
  }
}
