#include "iia/forms6.hpp"

#include <random>
#include <sstream>

namespace iia::forms6 {

namespace detail {

double minor_det(const Mat6& m, const int* rows, const int* cols, int k) {
  switch (k) {
    case 0:
      return 1.0;
    case 1:
      return m(rows[0], cols[0]);
    case 2:
      return m(rows[0], cols[0]) * m(rows[1], cols[1]) - m(rows[0], cols[1]) * m(rows[1], cols[0]);
    case 3: {
      const double a = m(rows[0], cols[0]), b = m(rows[0], cols[1]), c = m(rows[0], cols[2]);
      const double d = m(rows[1], cols[0]), e = m(rows[1], cols[1]), f = m(rows[1], cols[2]);
      const double g = m(rows[2], cols[0]), h = m(rows[2], cols[1]), i = m(rows[2], cols[2]);
      return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g);
    }
    default: {
      Eigen::MatrixXd sub(k, k);
      for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) sub(r, c) = m(rows[r], cols[c]);
      return sub.determinant();
    }
  }
}

const std::vector<DualTerm>& dual_table() {
  static const std::vector<DualTerm> table = [] {
    std::vector<DualTerm> t;
    for (int o = 0; o < kSize<3>; ++o) {
      const auto& ix = kIndexList<3>[o];
      for (int a = 0; a < kDim; ++a) {
        const std::array<int, 3> idx{a, ix[1], ix[2]};
        int mask = 0;
        const int s = sort_sign(idx, mask);
        if (s == 0) continue;
        t.push_back({o, ix[0], a, mask_position(mask), s});
      }
    }
    return t;
  }();
  return table;
}

}  // namespace detail

namespace {

using Tensor3 = std::array<double, 216>;

inline int t3(int i, int j, int k) { return (i * 6 + j) * 6 + k; }

Tensor3 full_tensor(const Form<3>& a) {
  Tensor3 t{};
  for (int p = 0; p < kSize<3>; ++p) {
    const auto& ix = kIndexList<3>[p];
    const double v = a.c[p];
    const int i = ix[0], j = ix[1], k = ix[2];
    t[t3(i, j, k)] = v;
    t[t3(j, k, i)] = v;
    t[t3(k, i, j)] = v;
    t[t3(j, i, k)] = -v;
    t[t3(i, k, j)] = -v;
    t[t3(k, j, i)] = -v;
  }
  return t;
}

std::string fmt_double(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

}  // namespace

Mat6 to_matrix(const Form<2>& w) {
  Mat6 m = Mat6::Zero();
  for (int p = 0; p < kSize<2>; ++p) {
    const int i = kIndexList<2>[p][0], j = kIndexList<2>[p][1];
    m(i, j) = w.c[p];
    m(j, i) = -w.c[p];
  }
  return m;
}

Form<2> from_matrix(const Mat6& w) {
  Form<2> f;
  for (int p = 0; p < kSize<2>; ++p) {
    const int i = kIndexList<2>[p][0], j = kIndexList<2>[p][1];
    f.c[p] = 0.5 * (w(i, j) - w(j, i));
  }
  return f;
}

double volume_coefficient(const Form<2>& omega) {
  return wedge(omega, wedge(omega, omega)).c[0] / 6.0;
}

HitchinInvariants hitchin_invariants(const Form<3>& phi) {
  // K(e_j) = −w with ι_w vol = ½ ι_{e_j}φ ∧ φ. For a 5-form β the vector w with
  // ι_w e¹²³⁴⁵⁶ = β has w^i = (−1)^i β_{complement(i)} (0-based). The overall
  // sign is fixed by the normal form, where J e₁ = e₂.
  HitchinInvariants out;
  for (int j = 0; j < kDim; ++j) {
    Vec6 e = Vec6::Zero();
    e[j] = 1.0;
    const Form<5> beta = wedge(interior(e, phi), phi);
    for (int i = 0; i < kDim; ++i) {
      const double sign = (i % 2) ? 1.0 : -1.0;
      out.k(i, j) = 0.5 * sign * beta.c[mask_position(63 & ~(1 << i))];
    }
  }
  out.lambda = (out.k * out.k).trace() / 6.0;
  return out;
}

AcStructure almost_complex(const Form<3>& phi) {
  const HitchinInvariants h = hitchin_invariants(phi);
  if (!(h.lambda < Tolerances{}.lambda_max))
    throw NotPositiveError("almost_complex: 3-form is not stable of negative type (lambda = " +
                           fmt_double(h.lambda) + ")");
  return AcStructure{h.k / std::sqrt(-h.lambda)};
}

Form<3> hitchin_dual(const Form<3>& phi) { return j_action(almost_complex(phi), phi); }

Form<3> dual_from_structure(const AcStructure& j, const Form<3>& phi) {
  Form<3> out;
  for (const auto& t : detail::dual_table()) out.c[t.out] -= j.m(t.axis, t.row) * t.sign * phi.c[t.in];
  return out;
}

double norm_squared(const Form<3>& phi, const Form<2>& omega) {
  const double vol = volume_coefficient(omega);
  if (!(vol > 0.0)) throw OrientationError("norm_squared: omega^3 does not match the orientation e123456");
  const Form<3> hat = hitchin_dual(phi);
  return wedge(phi, hat).c[0] / vol;
}

namespace {

void check_primitive(const Form<3>& phi, const Form<2>& omega, double tol, const char* where) {
  const double scale = std::max(1.0, phi.max_abs() * omega.max_abs());
  const double r = wedge(phi, omega).max_abs();
  if (r > tol * scale)
    throw PrimitivityError(std::string(where) + ": phi ^ omega = " + fmt_double(r) + " is not zero");
}

void check_metric(const Mat6& g, double min_eig, const char* where) {
  Eigen::SelfAdjointEigenSolver<Mat6> es(0.5 * (g + g.transpose()));
  const double lo = es.eigenvalues().minCoeff();
  if (!(lo > min_eig))
    throw NotPositiveError(std::string(where) + ": induced metric is not positive definite (min eigenvalue " +
                           fmt_double(lo) + ")");
}

}  // namespace

Metric6 metric(const Form<3>& phi, const Form<2>& omega) {
  const Tolerances tol;
  check_primitive(phi, omega, tol.primitivity, "metric");
  const double nsq = norm_squared(phi, omega);
  const Mat6 winv = to_matrix(omega).inverse();
  const Tensor3 f = full_tensor(phi);
  // m[i][k][b] = φ_iab ω^ak, then n[i][k][p] = m[i][k][b] ω^bp.
  Tensor3 m{}, n{};
  for (int i = 0; i < 6; ++i)
    for (int k = 0; k < 6; ++k)
      for (int b = 0; b < 6; ++b) {
        double s = 0.0;
        for (int a = 0; a < 6; ++a) s += f[t3(i, a, b)] * winv(a, k);
        m[t3(i, k, b)] = s;
      }
  for (int i = 0; i < 6; ++i)
    for (int k = 0; k < 6; ++k)
      for (int p = 0; p < 6; ++p) {
        double s = 0.0;
        for (int b = 0; b < 6; ++b) s += m[t3(i, k, b)] * winv(b, p);
        n[t3(i, k, p)] = s;
      }
  Metric6 g;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      double s = 0.0;
      for (int k = 0; k < 6; ++k)
        for (int p = 0; p < 6; ++p) s += n[t3(i, k, p)] * f[t3(j, k, p)];
      g.m(i, j) = -s / nsq;
    }
  check_metric(g.m, tol.min_metric_eigenvalue, "metric");
  return g;
}

PointStructure make_point_structure(const Form<3>& phi, const Form<2>& omega, const Tolerances& tol) {
  const double vol = volume_coefficient(omega);
  if (!(vol > 0.0)) throw OrientationError("make_point_structure: omega^3 does not match the orientation e123456");
  check_primitive(phi, omega, tol.primitivity, "make_point_structure");
  const HitchinInvariants h = hitchin_invariants(phi);
  if (!(h.lambda < tol.lambda_max))
    throw NotPositiveError("make_point_structure: 3-form is not stable of negative type");
  PointStructure ps;
  ps.phi = phi;
  ps.omega = omega;
  ps.j.m = h.k / std::sqrt(-h.lambda);
  ps.phihat = j_action(ps.j, phi);
  const Mat6 w = to_matrix(omega);
  const Mat6 g = w * ps.j.m;
  ps.metric.m = 0.5 * (g + g.transpose());
  check_metric(ps.metric.m, tol.min_metric_eigenvalue, "make_point_structure");
  ps.normsq = wedge(phi, ps.phihat).c[0] / vol;
  ps.omega_inv = w.inverse();
  ps.metric_inv = ps.metric.m.inverse();
  return ps;
}

Form<2> standard_omega() { return ebasis<2>({1, 2}) + ebasis<2>({3, 4}) + ebasis<2>({5, 6}); }

Form<3> standard_phi(double norm) {
  return 0.5 * norm * (ebasis<3>({1, 3, 5}) - ebasis<3>({1, 4, 6}) - ebasis<3>({2, 4, 5}) - ebasis<3>({2, 3, 6}));
}

Form<3> standard_phihat(double norm) {
  return 0.5 * norm * (ebasis<3>({1, 3, 6}) + ebasis<3>({1, 4, 5}) + ebasis<3>({2, 3, 5}) - ebasis<3>({2, 4, 6}));
}

PointStructure standard_structure(double norm) { return make_point_structure(standard_phi(norm), standard_omega()); }

ThreeFormSplit su3_split(const PointStructure& ps, const Form<3>& a) {
  ThreeFormSplit out;
  Form<3> m3, m1;
  for (const auto& tc : type_decompose<3>(ps.j, a)) {
    if (tc.p == 3) m3 = tc.part;
    else m1 = tc.part;
  }
  out.f1 = inner(ps.metric, m3, ps.phi) / (2.0 * ps.normsq);
  out.f2 = -inner(ps.metric, m3, ps.phihat) / (2.0 * ps.normsq);
  out.beta = 0.5 * lambda_contraction(ps.omega, m1);
  out.alpha = m1 - wedge(ps.omega, out.beta);
  return out;
}

Form<3> variation_dual(const Form<3>& phi, const Form<3>& deltaphi) {
  const AcStructure j = almost_complex(phi);
  const Form<3> hat = j_action(j, phi);
  const double vol = wedge(phi, hat).c[0];
  return -j_action(j, deltaphi) + (2.0 * wedge(deltaphi, phi).c[0] / vol) * phi +
         (2.0 * wedge(deltaphi, hat).c[0] / vol) * hat;
}

double variation_norm_squared(const PointStructure& ps, const Form<3>& deltaphi, const Form<2>& deltaomega) {
  return 2.0 * inner(ps.metric, deltaphi, ps.phi) - ps.normsq * lambda_contraction(ps.omega, deltaomega).c[0];
}

double bilinear_residual(const PointStructure& ps) {
  const Tensor3 f = full_tensor(ps.phi);
  const Mat6 winv = to_matrix(ps.omega).inverse();
  const Mat6 w = to_matrix(ps.omega);
  const Mat6& g = ps.metric.m;
  // t[j][a][b] = ω^{ij} φ_iab summed over i.
  Tensor3 t{};
  for (int j = 0; j < 6; ++j)
    for (int c = 0; c < 6; ++c)
      for (int d = 0; d < 6; ++d) {
        double s = 0.0;
        for (int i = 0; i < 6; ++i) s += winv(i, j) * f[t3(i, c, d)];
        t[t3(j, c, d)] = s;
      }
  const double q = ps.normsq / 4.0;
  double worst = 0.0;
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b)
      for (int c = 0; c < 6; ++c)
        for (int d = 0; d < 6; ++d) {
          double lhs = 0.0;
          for (int j = 0; j < 6; ++j) lhs += t[t3(j, a, b)] * f[t3(j, c, d)];
          const double rhs = q * (w(a, c) * g(b, d) - w(b, c) * g(a, d) - w(a, d) * g(b, c) + w(b, d) * g(a, c));
          worst = std::max(worst, std::abs(lhs - rhs));
        }
  return worst;
}

Eigen::Matrix<double, 15, 15> lefschetz_matrix(const Form<2>& omega) {
  Eigen::Matrix<double, 15, 15> m;
  for (int col = 0; col < 15; ++col) {
    Form<2> e;
    e.c[col] = 1.0;
    const Form<4> img = wedge(omega, e);
    for (int row = 0; row < 15; ++row) m(row, col) = img.c[row];
  }
  return m;
}

Form<2> lefschetz_invert(const Form<2>& omega, const Form<4>& gamma) {
  const auto m = lefschetz_matrix(omega);
  Eigen::FullPivLU<Eigen::Matrix<double, 15, 15>> lu(m);
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  lu.setThreshold(1e-12);
  if (!lu.isInvertible() || std::abs(lu.determinant()) < 1e-12 * std::pow(scale, 15))
    throw DegenerateError("lefschetz_invert: omega ^ . is singular");
  Eigen::Matrix<double, 15, 1> rhs;
  for (int i = 0; i < 15; ++i) rhs[i] = gamma.c[i];
  const Eigen::Matrix<double, 15, 1> x = lu.solve(rhs);
  Form<2> out;
  for (int i = 0; i < 15; ++i) out.c[i] = x[i];
  return out;
}

PointStructure pullback_structure(const PointStructure& ps, const Mat6& a) {
  return make_point_structure(pullback(a, ps.phi), pullback(a, ps.omega));
}

Mat6 random_symplectic(std::uint64_t seed, double spread) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, spread);
  Mat6 h;
  for (int i = 0; i < 6; ++i)
    for (int j = i; j < 6; ++j) h(i, j) = h(j, i) = nd(rng);
  const Mat6 w = to_matrix(standard_omega());
  // A = W⁻¹H is Hamiltonian (AᵀW + WA = 0); its Cayley transform is symplectic.
  Mat6 a = w.inverse() * h;
  // Keep the Cayley transform well conditioned: ‖A‖ ≤ 1 gives cond(S) ≤ 9.
  const double norm = a.operatorNorm();
  if (norm > 1.0) a /= norm;
  const Mat6 id = Mat6::Identity();
  return (id - 0.5 * a).inverse() * (id + 0.5 * a);
}

PointStructure sp6_randomize(const PointStructure& ps, std::uint64_t seed) {
  return pullback_structure(ps, random_symplectic(seed));
}

Form<1> flat(const Metric6& g, const Vec6& v) {
  const Vec6 low = g.m * v;
  Form<1> f;
  for (int i = 0; i < 6; ++i) f.c[i] = low[i];
  return f;
}

}  // namespace iia::forms6
