#include "softdsl/geom.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "doctest.h"
#include "softdsl/error.hpp"

using namespace sdsl;

namespace {

std::vector<Vec3> random_cloud(std::mt19937_64& gen, size_t n, Vec3 lo = {0, 0, 0},
                               Vec3 hi = {1, 1, 1}) {
  std::uniform_real_distribution<double> ux(lo.x, hi.x), uy(lo.y, hi.y), uz(lo.z, hi.z);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = {ux(gen), uy(gen), uz(gen)};
  return pts;
}

// Brute-force oracle: all-permutations assignment for tiny clouds.
double brute_force_emd(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  std::vector<size_t> perm(a.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = 1e300;
  do {
    double total = 0;
    for (size_t i = 0; i < a.size(); i++) total += norm(a[i] - b[perm[i]]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(a.size());
}

}  // namespace

TEST_CASE("reductions") {
  Vec3 c{0.4, 0.5, 0.6};
  std::vector<Vec3> cube;
  for (int i = 0; i < 8; i++)
    cube.push_back(c + Vec3{i & 1 ? 0.1 : -0.1, i & 2 ? 0.1 : -0.1, i & 4 ? 0.1 : -0.1});
  Vec3 com = cloud_com(cube);
  CHECK(norm(com - c) < 1e-12);

  std::mt19937_64 gen(1);
  auto dough = random_cloud(gen, 50, {0.2, 0.1, 0.2}, {0.5, 0.3, 0.5});
  dough[17].y = 0.3;  // make the bound tight
  CHECK(cloud_max(dough).y == doctest::Approx(0.3));

  // gradient of com is (1/N) I: finite differences on a linear functional
  Vec3 w{0.3, -1.2, 0.7};
  double h = 1e-6;
  for (size_t i : {size_t{0}, size_t{5}}) {
    for (int axis = 0; axis < 3; axis++) {
      auto plus = dough, minus = dough;
      plus[i][axis] += h;
      minus[i][axis] -= h;
      double fd = (dot(w, cloud_com(plus)) - dot(w, cloud_com(minus))) / (2 * h);
      CHECK(fd == doctest::Approx(w[axis] / static_cast<double>(dough.size())).epsilon(1e-4));
    }
  }
}

TEST_CASE("part selectors") {
  std::mt19937_64 gen(2);

  SUBCASE("frontend of a straight rope keeps the 20% smallest z") {
    size_t n = 40;
    std::vector<Vec3> rope(n);
    for (size_t i = 0; i < n; i++)
      rope[i] = {0.5, 0.5, 0.1 + 0.8 * static_cast<double>(i) / static_cast<double>(n - 1)};
    // shuffle so index order does not encode z order
    std::shuffle(rope.begin(), rope.end(), gen);
    auto idx = select_part_indices(rope, PartSel::FrontEnd);
    // brute-force quantile oracle
    std::vector<double> zs;
    for (const auto& p : rope) zs.push_back(p.z);
    std::sort(zs.begin(), zs.end());
    double cutoff = zs[7];  // 8 = round(0.2 * 40) points expected
    CHECK(idx.size() == 8);
    for (size_t i : idx) CHECK(rope[i].z <= cutoff + 1e-12);
  }

  SUBCASE("leftpart and rightpart partition the cloud") {
    auto pts = random_cloud(gen, 31);
    auto left = select_part_indices(pts, PartSel::LeftPart);
    auto right = select_part_indices(pts, PartSel::RightPart);
    CHECK(left.size() + right.size() == pts.size());
    std::vector<size_t> all;
    all.insert(all.end(), left.begin(), left.end());
    all.insert(all.end(), right.begin(), right.end());
    std::sort(all.begin(), all.end());
    for (size_t i = 0; i < all.size(); i++) CHECK(all[i] == i);
    double max_left = -1, min_right = 2;
    for (size_t i : left) max_left = std::max(max_left, pts[i].x);
    for (size_t i : right) min_right = std::min(min_right, pts[i].x);
    CHECK(max_left <= min_right);
  }

  SUBCASE("degenerate slab with equal coordinates still selects") {
    std::vector<Vec3> slab(10, Vec3{0.5, 0.5, 0.5});
    auto idx = select_part_indices(slab, PartSel::LeftPart);
    CHECK(!idx.empty());
    auto end = select_part_indices(slab, PartSel::RightEnd);
    CHECK(end.size() == 2);
  }
}

TEST_CASE("emd") {
  EmdConfig cfg;
  std::mt19937_64 gen(3);

  SUBCASE("identity is zero") {
    auto a = random_cloud(gen, 60);
    CHECK(std::fabs(emd(a, a, EmdMode::Sinkhorn, cfg).value) < 1e-6);
  }

  SUBCASE("two single points at distance d") {
    std::vector<Vec3> a{{0.2, 0.2, 0.2}}, b{{0.2, 0.7, 0.2}};
    CHECK(emd(a, b, EmdMode::Exact, cfg).value == doctest::Approx(0.5));
    CHECK(emd(a, b, EmdMode::Sinkhorn, cfg).value == doctest::Approx(0.5).epsilon(1e-3));
  }

  SUBCASE("exact mode matches all-permutation oracle") {
    for (int trial = 0; trial < 5; trial++) {
      auto a = random_cloud(gen, 6), b = random_cloud(gen, 6);
      CHECK(emd(a, b, EmdMode::Exact, cfg).value ==
            doctest::Approx(brute_force_emd(a, b)).epsilon(1e-10));
    }
  }

  SUBCASE("sinkhorn within 2% of the exact assignment oracle on 16-point clouds") {
    for (int trial = 0; trial < 10; trial++) {
      auto a = random_cloud(gen, 16), b = random_cloud(gen, 16);
      double exact = emd(a, b, EmdMode::Exact, cfg).value;
      double sk = emd(a, b, EmdMode::Sinkhorn, cfg).value;
      CHECK(std::fabs(sk - exact) / exact < 0.02);
    }
  }

  SUBCASE("symmetric and nonnegative") {
    for (int trial = 0; trial < 5; trial++) {
      auto a = random_cloud(gen, 24), b = random_cloud(gen, 18);
      double ab = emd(a, b, EmdMode::Sinkhorn, cfg).value;
      double ba = emd(b, a, EmdMode::Sinkhorn, cfg).value;
      CHECK(ab == doctest::Approx(ba).epsilon(1e-6));
      CHECK(ab > -1e-9);
    }
  }

  SUBCASE("gradients match finite differences") {
    auto a = random_cloud(gen, 12), b = random_cloud(gen, 12);
    EmdResult r = emd(a, b, EmdMode::Sinkhorn, cfg, true);
    double h = 1e-6;
    for (size_t i : {size_t{0}, size_t{7}}) {
      for (int axis = 0; axis < 3; axis++) {
        auto plus = a, minus = a;
        plus[i][axis] += h;
        minus[i][axis] -= h;
        double fd = (emd(plus, b, EmdMode::Sinkhorn, cfg).value -
                     emd(minus, b, EmdMode::Sinkhorn, cfg).value) /
                    (2 * h);
        CHECK(r.grad_a[i][axis] == doctest::Approx(fd).epsilon(2e-3).scale(0.1));
      }
    }
  }

  SUBCASE("exact mode rejects mismatched sizes") {
    auto a = random_cloud(gen, 4), b = random_cloud(gen, 5);
    CHECK_THROWS_AS(emd(a, b, EmdMode::Exact, cfg), Error);
  }
}

TEST_CASE("voxel iou") {
  double h = 1.0 / 64.0;
  std::mt19937_64 gen(4);
  auto a = random_cloud(gen, 500, {0.2, 0.2, 0.2}, {0.4, 0.4, 0.4});

  CHECK(voxel_iou(a, a, h) == doctest::Approx(1.0));

  auto far = random_cloud(gen, 500, {0.7, 0.7, 0.7}, {0.9, 0.9, 0.9});
  CHECK(voxel_iou(a, far, h) == doctest::Approx(0.0));

  // two equal slabs overlapping on half their volume: IoU = 1/3, checked
  // against the analytic occupancy count with a one-voxel-layer tolerance
  std::vector<Vec3> s1, s2;
  for (double x = 0.25; x < 0.5; x += h / 2)
    for (double y = 0.25; y < 0.375; y += h / 2)
      for (double z = 0.25; z < 0.5; z += h / 2) {
        s1.push_back({x, y, z});
        s2.push_back({x + 0.125, y, z});
      }
  double iou = voxel_iou(s1, s2, h);
  // slabs are 16 voxels long with 8 shared: IoU = 8/24; a one-layer error on
  // the moving face shifts it by at most 1/24
  CHECK(iou > 1.0 / 3.0 - 1.0 / 24.0 - 1e-9);
  CHECK(iou < 1.0 / 3.0 + 1.0 / 24.0 + 1e-9);
}

TEST_CASE("particle graph") {
  std::mt19937_64 gen(5);

  SUBCASE("two far blobs give two components") {
    double r = 0.02;
    auto blob1 = random_cloud(gen, 100, {0.1, 0.1, 0.1}, {0.15, 0.15, 0.15});
    auto blob2 = random_cloud(gen, 80, {0.8, 0.8, 0.8}, {0.85, 0.85, 0.85});
    auto pts = blob1;
    pts.insert(pts.end(), blob2.begin(), blob2.end());
    auto g = particle_graph(pts, r);
    CHECK(g.num_components == 2);
  }

  SUBCASE("a connected rope is one component") {
    std::vector<Vec3> rope;
    for (int i = 0; i < 50; i++) rope.push_back({0.1 + 0.01 * i, 0.5, 0.5});
    auto g = particle_graph(rope, 0.015);
    CHECK(g.num_components == 1);
    // nearest neighbor of an interior particle is one of its rope neighbors
    CHECK(g.nn_dist[25] == doctest::Approx(0.01));
  }

  SUBCASE("components match a brute-force union-find on 300 points") {
    auto pts = random_cloud(gen, 300);
    double r = 0.08;
    auto g = particle_graph(pts, r);

    // O(n^2) oracle
    std::vector<size_t> parent(pts.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<size_t(size_t)> find = [&](size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (size_t i = 0; i < pts.size(); i++)
      for (size_t j = i + 1; j < pts.size(); j++)
        if (norm(pts[i] - pts[j]) <= r) {
          size_t a = find(i), b = find(j);
          if (a != b) parent[std::max(a, b)] = std::min(a, b);
        }
    std::unordered_map<size_t, int> roots;
    for (size_t i = 0; i < pts.size(); i++) roots.emplace(find(i), static_cast<int>(roots.size()));
    CHECK(g.num_components == static_cast<int>(roots.size()));
    // same partition: points share a component iff the oracle agrees
    for (size_t i = 0; i < 50; i++)
      for (size_t j = i + 1; j < 50; j++)
        CHECK((g.component[i] == g.component[j]) == (find(i) == find(j)));

    // nearest neighbors match an exhaustive scan
    for (size_t i = 0; i < 40; i++) {
      double best = 1e300;
      for (size_t j = 0; j < pts.size(); j++)
        if (j != i) best = std::min(best, norm(pts[i] - pts[j]));
      CHECK(g.nn_dist[i] == doctest::Approx(best).epsilon(1e-12));
    }
  }
}
