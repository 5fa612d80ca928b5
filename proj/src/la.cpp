#include "softdsl/la.hpp"

#include <algorithm>

namespace sdsl {

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric 3x3 matrix.
// Produces eigenvalues in `eval` and orthonormal eigenvectors as columns of `evec`.
void jacobi_eigen_sym3(const Mat3& b, Vec3& eval, Mat3& evec) {
  Mat3 a = b;
  Mat3 v = Mat3::identity();
  for (int sweep = 0; sweep < 50; sweep++) {
    double off = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
    if (off < 1e-60) break;
    for (int p = 0; p < 2; p++) {
      for (int q = p + 1; q < 3; q++) {
        double apq = a(p, q);
        if (std::fabs(apq) == 0.0) continue;
        double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t = std::copysign(1.0, theta) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        double app = a(p, p), aqq = a(q, q);
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = a(q, p) = 0.0;
        int r = 3 - p - q;  // the remaining index
        double arp = a(r, p), arq = a(r, q);
        a(r, p) = a(p, r) = c * arp - s * arq;
        a(r, q) = a(q, r) = s * arp + c * arq;
        for (int k = 0; k < 3; k++) {
          double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  eval = {a(0, 0), a(1, 1), a(2, 2)};
  evec = v;
}

Vec3 any_unit_orthogonal(const Vec3& u) {
  Vec3 t = std::fabs(u.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
  return normalized(cross(u, t));
}

}  // namespace

Svd3 svd3(const Mat3& a) {
  Mat3 ata = mul_atb(a, a);
  Vec3 lam;
  Mat3 v;
  jacobi_eigen_sym3(ata, lam, v);

  // Sort eigenpairs descending.
  int idx[3] = {0, 1, 2};
  std::sort(idx, idx + 3, [&](int i, int j) { return lam[i] > lam[j]; });
  Mat3 vs;
  for (int j = 0; j < 3; j++) vs.set_col(j, v.col(idx[j]));
  // Right-handed V.
  vs.set_col(2, cross(vs.col(0), vs.col(1)));

  Svd3 out;
  out.v = vs;
  Vec3 w0 = a * vs.col(0);
  double n0 = norm(w0);
  Vec3 u0 = n0 > 1e-12 ? w0 / n0 : Vec3{1, 0, 0};
  Vec3 w1 = a * vs.col(1);
  w1 -= u0 * dot(w1, u0);
  double n1 = norm(w1);
  Vec3 u1 = n1 > 1e-12 ? w1 / n1 : any_unit_orthogonal(u0);
  Vec3 u2 = cross(u0, u1);
  out.u.set_col(0, u0);
  out.u.set_col(1, u1);
  out.u.set_col(2, u2);
  out.sigma = {dot(u0, a * vs.col(0)), dot(u1, a * vs.col(1)), dot(u2, a * vs.col(2))};
  return out;
}

void svd3_adj(const Mat3& a, const Svd3& s, const Mat3& u_bar, const Vec3& sigma_bar,
              const Mat3& v_bar, Mat3& a_bar) {
  (void)a;
  const Mat3& u = s.u;
  const Mat3& v = s.v;
  const Vec3& sg = s.sigma;
  Mat3 utu = mul_atb(u, u_bar);  // U^T * U_bar
  Mat3 vtv = mul_atb(v, v_bar);  // V^T * V_bar
  Mat3 g;
  for (int i = 0; i < 3; i++) g(i, i) = sigma_bar[i];
  for (int i = 0; i < 3; i++) {
    for (int j = i + 1; j < 3; j++) {
      double d = sg[j] * sg[j] - sg[i] * sg[i];
      double inv_d = d / (d * d + 1e-12);  // clamped reciprocal near repeated values
      double uu = utu(i, j) - utu(j, i);
      double vv = vtv(i, j) - vtv(j, i);
      g(i, j) = (uu * sg[j] + vv * sg[i]) * inv_d;
      g(j, i) = (uu * sg[i] + vv * sg[j]) * inv_d;
    }
  }
  a_bar += u * mul_abt(g, v);
}

}  // namespace sdsl
