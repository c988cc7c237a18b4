#pragma once

// Pointwise exterior algebra on R⁶: forms of every degree stored by strictly
// increasing multi-index in lexicographic order, plus the stable 3-form
// (Hitchin) construction and the identities satisfied by a pointwise Type IIA
// pair (φ, ω).
//
// Index conventions (all indices 0-based in code):
//   * A k-form α is stored as α_I for sorted I; the full antisymmetric tensor
//     is recovered with sign rules. Inner products use the 1/k! normalization,
//     i.e. (α, β) = Σ_{I sorted} α_I β^I.
//   * An endomorphism A acts on vectors by (A e_j) = Σ_i A(i, j) e_i and on
//     forms by (Aα)(X₁..X_k) = α(AX₁, .., AX_k).
//   * ω^{ab} is the inverse matrix of ω_{ab}: ω^{ia} ω_{aj} = δ^i_j.
//   * Λ_ω A = ½ ω^{ij} A_{ji...}, so Λ_ω ω = 3.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <vector>

#include "iia/errors.hpp"

namespace iia::forms6 {

inline constexpr int kDim = 6;

using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

constexpr int binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  int r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

template <int K>
inline constexpr int kSize = binomial(kDim, K);

namespace detail {

template <int K>
constexpr std::array<std::array<int, K>, kSize<K>> make_index_list() {
  std::array<std::array<int, K>, kSize<K>> out{};
  int pos = 0;
  // Enumerate K-subsets of {0..5} in lexicographic order.
  std::array<int, K> cur{};
  for (int i = 0; i < K; ++i) cur[i] = i;
  while (true) {
    out[pos++] = cur;
    int i = K - 1;
    while (i >= 0 && cur[i] == kDim - K + i) --i;
    if (i < 0) break;
    ++cur[i];
    for (int j = i + 1; j < K; ++j) cur[j] = cur[j - 1] + 1;
  }
  return out;
}

template <>
constexpr std::array<std::array<int, 0>, 1> make_index_list<0>() {
  return {};
}

constexpr int popcount6(int mask) {
  int n = 0;
  for (int b = 0; b < kDim; ++b) n += (mask >> b) & 1;
  return n;
}

// Position of a sorted multi-index (given as a bit mask) inside the list of
// its own degree.
constexpr std::array<int, 64> make_mask_position() {
  std::array<int, 64> pos{};
  std::array<int, 7> counter{};
  // Lexicographic order of sorted tuples; generated per degree.
  for (int k = 0; k <= kDim; ++k) {
    std::array<int, 6> cur{};
    for (int i = 0; i < k; ++i) cur[i] = i;
    while (true) {
      int mask = 0;
      for (int i = 0; i < k; ++i) mask |= 1 << cur[i];
      pos[mask] = counter[k]++;
      int i = k - 1;
      while (i >= 0 && cur[i] == kDim - k + i) --i;
      if (i < 0) break;
      ++cur[i];
      for (int j = i + 1; j < k; ++j) cur[j] = cur[j - 1] + 1;
    }
  }
  return pos;
}

inline constexpr std::array<int, 64> kMaskPosition = make_mask_position();

}  // namespace detail

/// Sorted multi-indices of degree K, lexicographic.
template <int K>
inline constexpr auto kIndexList = detail::make_index_list<K>();

template <int K>
constexpr int index_mask(int position) {
  int mask = 0;
  for (int i = 0; i < K; ++i) mask |= 1 << kIndexList<K>[position][i];
  return mask;
}

constexpr int mask_position(int mask) { return detail::kMaskPosition[mask]; }

/// Antisymmetric K-tensor on R⁶.
template <int K>
struct Form {
  static_assert(K >= 0 && K <= kDim, "form degree must lie in 0..6");
  static constexpr int degree = K;
  static constexpr int size = kSize<K>;

  std::array<double, kSize<K>> c{};

  double& operator[](int i) { return c[i]; }
  double operator[](int i) const { return c[i]; }

  Form& operator+=(const Form& o) {
    for (int i = 0; i < size; ++i) c[i] += o.c[i];
    return *this;
  }
  Form& operator-=(const Form& o) {
    for (int i = 0; i < size; ++i) c[i] -= o.c[i];
    return *this;
  }
  Form& operator*=(double s) {
    for (auto& x : c) x *= s;
    return *this;
  }
  friend Form operator+(Form a, const Form& b) { return a += b; }
  friend Form operator-(Form a, const Form& b) { return a -= b; }
  friend Form operator-(Form a) { return a *= -1.0; }
  friend Form operator*(double s, Form a) { return a *= s; }
  friend Form operator*(Form a, double s) { return a *= s; }
  friend Form operator/(Form a, double s) { return a *= 1.0 / s; }

  double max_abs() const {
    double m = 0.0;
    for (double x : c) m = std::max(m, std::abs(x));
    return m;
  }
  bool operator==(const Form&) const = default;
};

/// Sign of the permutation sorting `idx`, 0 when an index repeats. On return
/// `mask` holds the set of indices.
template <std::size_t N>
constexpr int sort_sign(const std::array<int, N>& idx, int& mask) {
  mask = 0;
  int inversions = 0;
  for (std::size_t a = 0; a < N; ++a) {
    if (mask & (1 << idx[a])) return 0;
    mask |= 1 << idx[a];
    for (std::size_t b = a + 1; b < N; ++b) inversions += idx[a] > idx[b];
  }
  return inversions % 2 ? -1 : 1;
}

/// Basis form e^{i₁…i_K} from 1-based indices, matching the usual notation
/// (ebasis<3>({1, 3, 5}) is e¹³⁵). Unsorted input picks up the permutation sign.
template <int K>
Form<K> ebasis(const std::array<int, K>& one_based) {
  std::array<int, K> idx{};
  for (int i = 0; i < K; ++i) idx[i] = one_based[i] - 1;
  int mask = 0;
  const int s = sort_sign(idx, mask);
  Form<K> f;
  if (s != 0) f.c[mask_position(mask)] = s;
  return f;
}

/// Component of the full antisymmetric tensor at 0-based `idx`.
template <int K, std::size_t N>
double full_component(const Form<K>& a, const std::array<int, N>& idx) {
  static_assert(N == static_cast<std::size_t>(K), "full_component: index length must match the degree");
  int mask = 0;
  const int s = sort_sign(idx, mask);
  return s == 0 ? 0.0 : s * a.c[mask_position(mask)];
}

namespace detail {

struct WedgeTerm {
  int lhs, rhs, out, sign;
};

template <int P, int Q>
const std::vector<WedgeTerm>& wedge_table() {
  static const std::vector<WedgeTerm> table = [] {
    std::vector<WedgeTerm> t;
    for (int i = 0; i < kSize<P>; ++i) {
      const int mi = index_mask<P>(i);
      for (int j = 0; j < kSize<Q>; ++j) {
        const int mj = index_mask<Q>(j);
        if (mi & mj) continue;
        // Sign of merging I then J into sorted order.
        int inv = 0;
        for (int a = 0; a < P; ++a)
          for (int b = 0; b < Q; ++b) inv += kIndexList<P>[i][a] > kIndexList<Q>[j][b];
        t.push_back({i, j, mask_position(mi | mj), inv % 2 ? -1 : 1});
      }
    }
    return t;
  }();
  return table;
}

// (ι_{e_a} α)_J = α_{aJ}: entries {a, J position, I position, sign}.
struct InteriorTerm {
  int axis, out, in, sign;
};

template <int K>
const std::vector<InteriorTerm>& interior_table() {
  static const std::vector<InteriorTerm> table = [] {
    std::vector<InteriorTerm> t;
    for (int j = 0; j < kSize<K - 1>; ++j) {
      const int mj = index_mask<K - 1>(j);
      for (int a = 0; a < kDim; ++a) {
        if (mj & (1 << a)) continue;
        int below = 0;
        for (int b = 0; b < a; ++b) below += (mj >> b) & 1;
        t.push_back({a, j, mask_position(mj | (1 << a)), below % 2 ? -1 : 1});
      }
    }
    return t;
  }();
  return table;
}

double minor_det(const Mat6& m, const int* rows, const int* cols, int k);

// (ΛA)_J = −Σ_{x<y} ω^{xy} A_{xyJ}: entries {J position, I position, x, y, sign}
// with A_{xyJ} = sign·A_I.
struct LambdaTerm {
  int out, in, x, y, sign;
};

template <int K>
const std::vector<LambdaTerm>& lambda_table() {
  static const std::vector<LambdaTerm> table = [] {
    std::vector<LambdaTerm> t;
    for (int j = 0; j < kSize<K - 2>; ++j) {
      const int mj = index_mask<K - 2>(j);
      for (int x = 0; x < kDim; ++x) {
        if (mj & (1 << x)) continue;
        for (int y = x + 1; y < kDim; ++y) {
          if (mj & (1 << y)) continue;
          std::array<int, K> idx{};
          idx[0] = x;
          idx[1] = y;
          for (int s = 0; s < K - 2; ++s) idx[s + 2] = kIndexList<K - 2>[j][s];
          int mask = 0;
          const int sign = sort_sign(idx, mask);
          t.push_back({j, mask_position(mask), x, y, sign});
        }
      }
    }
    return t;
  }();
  return table;
}

// φ̂_ijk = −J^a_i φ_ajk: entries {output position, i, a, input position, sign}.
struct DualTerm {
  int out, row, axis, in, sign;
};

const std::vector<DualTerm>& dual_table();

}  // namespace detail

/// Exterior product. Degree overflow (P + Q > 6) is rejected at compile time.
template <int P, int Q>
Form<P + Q> wedge(const Form<P>& a, const Form<Q>& b) {
  static_assert(P + Q <= kDim, "wedge: degree overflow");
  Form<P + Q> out;
  for (const auto& t : detail::wedge_table<P, Q>()) out.c[t.out] += t.sign * a.c[t.lhs] * b.c[t.rhs];
  return out;
}

template <int K>
Form<K - 1> interior(const Vec6& v, const Form<K>& a) {
  static_assert(K >= 1, "interior product needs degree >= 1");
  Form<K - 1> out;
  for (const auto& t : detail::interior_table<K>()) out.c[t.out] += t.sign * v[t.axis] * a.c[t.in];
  return out;
}

/// (A*α)(X₁..X_K) = α(AX₁, .., AX_K).
template <int K>
Form<K> pullback(const Mat6& a, const Form<K>& alpha) {
  Form<K> out;
  if constexpr (K == 0) {
    out.c = alpha.c;
  } else {
    for (int i = 0; i < kSize<K>; ++i) {
      double s = 0.0;
      for (int j = 0; j < kSize<K>; ++j) {
        if (alpha.c[j] == 0.0) continue;
        s += alpha.c[j] * detail::minor_det(a, kIndexList<K>[j].data(), kIndexList<K>[i].data(), K);
      }
      out.c[i] = s;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Strong types for pointwise structures.

struct Metric6 {
  Mat6 m = Mat6::Identity();
};

/// J^i_j = m(i, j), J e_j = Σ_i m(i, j) e_i.
struct AcStructure {
  Mat6 m = Mat6::Zero();
};

Mat6 to_matrix(const Form<2>& w);
Form<2> from_matrix(const Mat6& w);

/// ω³/3! as a number (coefficient of e¹²³⁴⁵⁶).
double volume_coefficient(const Form<2>& omega);

template <int K>
Form<K> j_action(const AcStructure& j, const Form<K>& a) {
  return pullback(j.m, a);
}

template <int K>
Form<K - 2> lambda_contraction(const Form<2>& omega, const Form<K>& a);

/// Λ with a precomputed inverse ω^{ab}.
template <int K>
Form<K - 2> lambda_with_inverse(const Mat6& omega_inv, const Form<K>& a) {
  Form<K - 2> out;
  for (const auto& t : detail::lambda_table<K>()) out.c[t.out] -= omega_inv(t.x, t.y) * t.sign * a.c[t.in];
  return out;
}

template <int K>
Form<kDim - K> hodge_star(const Metric6& g, const Form<K>& a);

/// (a, b)_g with the 1/k! normalization.
template <int K>
double inner(const Metric6& g, const Form<K>& a, const Form<K>& b);

// ---------------------------------------------------------------------------
// Hitchin's construction.

struct HitchinInvariants {
  double lambda = 0.0;
  Mat6 k = Mat6::Zero();
};

HitchinInvariants hitchin_invariants(const Form<3>& phi);

/// J = K / √(−λ). Throws NotPositiveError when λ ≥ −1e−14.
AcStructure almost_complex(const Form<3>& phi);

/// φ̂(X, Y, Z) = φ(JX, JY, JZ).
Form<3> hitchin_dual(const Form<3>& phi);

/// φ̂_ijk = −J^a_i φ_ajk for a given J; equals φ(J·, J·, J·) when J = J_φ.
Form<3> dual_from_structure(const AcStructure& j, const Form<3>& phi);

/// Metric from the component formula g_ij = −|φ|⁻² φ_iab φ_jkp ω^ak ω^bp.
Metric6 metric(const Form<3>& phi, const Form<2>& omega);

/// |φ|² defined by |φ|² ω³/3! = φ ∧ φ̂.
double norm_squared(const Form<3>& phi, const Form<2>& omega);

// ---------------------------------------------------------------------------
// Pointwise Type IIA pair.

struct Tolerances {
  double lambda_max = -1e-14;
  double min_metric_eigenvalue = 1e-10;
  double primitivity = 1e-9;
};

struct PointStructure {
  Form<3> phi;
  Form<2> omega;
  AcStructure j;
  Metric6 metric;
  double normsq = 0.0;
  Form<3> phihat;
  Mat6 omega_inv = Mat6::Zero();
  Mat6 metric_inv = Mat6::Identity();
};

/// Derives (J, g, |φ|², φ̂) and validates positivity, orientation and
/// primitivity. Metric here is ω(·, J·).
PointStructure make_point_structure(const Form<3>& phi, const Form<2>& omega,
                                    const Tolerances& tol = {});

/// Normal form: ω = e¹²+e³⁴+e⁵⁶, φ = (s/2)(e¹³⁵ − e¹⁴⁶ − e²⁴⁵ − e²³⁶).
Form<2> standard_omega();
Form<3> standard_phi(double norm = 1.0);
Form<3> standard_phihat(double norm = 1.0);
PointStructure standard_structure(double norm = 1.0);

// ---------------------------------------------------------------------------
// Type decomposition.

/// Real component of type (p, q) + (q, p), p ≥ q.
template <int K>
struct TypeComponent {
  int p = 0;
  int q = 0;
  Form<K> part;
};

/// Splits a real K-form into its real (p,q)+(q,p) pieces with respect to J.
template <int K>
std::vector<TypeComponent<K>> type_decompose(const AcStructure& j, const Form<K>& a);

/// Matrix of the derivation extension of J on K-forms,
/// (Dα)(X₁..X_K) = Σ_s α(X₁, .., JX_s, .., X_K); D = i(p−q) on (p,q)-forms.
template <int K>
Eigen::MatrixXd j_derivation(const AcStructure& j);

/// δφ = 2f₁φ − 2f₂φ̂ + α + ω∧β with α primitive of type (2,1)+(1,2).
struct ThreeFormSplit {
  double f1 = 0.0;
  double f2 = 0.0;
  Form<3> alpha;
  Form<1> beta;
};

ThreeFormSplit su3_split(const PointStructure& ps, const Form<3>& a);

// ---------------------------------------------------------------------------
// Variational formulas and identities.

/// δφ̂ = −Jδφ + 2(δφ∧φ / φ∧φ̂) φ + 2(δφ∧φ̂ / φ∧φ̂) φ̂.
Form<3> variation_dual(const Form<3>& phi, const Form<3>& deltaphi);

/// δ|φ|² = 2(δφ, φ) − |φ|² Λ_ω δω.
double variation_norm_squared(const PointStructure& ps, const Form<3>& deltaphi,
                              const Form<2>& deltaomega);

/// Max-norm residual of ω^{ij}φ_iab φ_jcd = (|φ|²/4)(ω_ac g_bd − ω_bc g_ad − ω_ad g_bc + ω_bd g_ac).
double bilinear_residual(const PointStructure& ps);

/// Unique λ with ω ∧ λ = γ. Throws DegenerateError if ω∧· is singular.
Form<2> lefschetz_invert(const Form<2>& omega, const Form<4>& gamma);

/// The 15×15 matrix of λ ↦ ω ∧ λ.
Eigen::Matrix<double, 15, 15> lefschetz_matrix(const Form<2>& omega);

/// Pulls (φ, ω) back by `a` and re-derives the structure.
PointStructure pullback_structure(const PointStructure& ps, const Mat6& a);

/// Random linear symplectomorphism of ω_std, deterministic per seed.
Mat6 random_symplectic(std::uint64_t seed, double spread = 0.5);

PointStructure sp6_randomize(const PointStructure& ps, std::uint64_t seed);

/// v♭ = g(v, ·).
Form<1> flat(const Metric6& g, const Vec6& v);

// ---------------------------------------------------------------------------
// Template definitions.

template <int K>
Form<K - 2> lambda_contraction(const Form<2>& omega, const Form<K>& a) {
  static_assert(K >= 2, "Λ needs degree >= 2");
  return lambda_with_inverse(Mat6(to_matrix(omega).inverse()), a);
}

template <int K>
Form<K> raise_all(const Mat6& ginv, const Form<K>& a) {
  // a^I = Σ_J a_J det(g^{-1}[J, I]); g^{-1} is symmetric.
  return pullback(ginv, a);
}

template <int K>
Form<kDim - K> hodge_star(const Metric6& g, const Form<K>& a) {
  const double det = g.m.determinant();
  if (!(det > 0.0)) throw NotPositiveError("hodge_star: metric is not positive definite");
  Eigen::SelfAdjointEigenSolver<Mat6> es(g.m);
  if (es.eigenvalues().minCoeff() <= 0.0) throw NotPositiveError("hodge_star: metric is not positive definite");
  const Form<K> up = raise_all(Mat6(g.m.inverse()), a);
  const double sq = std::sqrt(det);
  Form<kDim - K> out;
  for (int i = 0; i < kSize<K>; ++i) {
    const int mi = index_mask<K>(i);
    const int mj = 63 & ~mi;
    // ε_{I J} for sorted I followed by sorted complement J.
    int inv = 0;
    for (int a1 = 0; a1 < kDim; ++a1) {
      if (!(mi & (1 << a1))) continue;
      for (int b = 0; b < a1; ++b) inv += (mj >> b) & 1;
    }
    out.c[mask_position(mj)] += (inv % 2 ? -1.0 : 1.0) * sq * up.c[i];
  }
  return out;
}

template <int K>
double inner(const Metric6& g, const Form<K>& a, const Form<K>& b) {
  const Form<K> up = raise_all(Mat6(g.m.inverse()), b);
  double s = 0.0;
  for (int i = 0; i < kSize<K>; ++i) s += a.c[i] * up.c[i];
  return s;
}

template <int K>
Eigen::MatrixXd j_derivation(const AcStructure& j) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(kSize<K>, kSize<K>);
  if constexpr (K > 0) {
    for (int col = 0; col < kSize<K>; ++col) {
      Form<K> e;
      e.c[col] = 1.0;
      for (int row = 0; row < kSize<K>; ++row) {
        const auto& idx = kIndexList<K>[row];
        double s = 0.0;
        for (int slot = 0; slot < K; ++slot) {
          for (int a = 0; a < kDim; ++a) {
            const double jm = j.m(a, idx[slot]);
            if (jm == 0.0) continue;
            auto moved = idx;
            moved[slot] = a;
            s += jm * full_component(e, moved);
          }
        }
        d(row, col) = s;
      }
    }
  }
  return d;
}

template <int K>
std::vector<TypeComponent<K>> type_decompose(const AcStructure& j, const Form<K>& a) {
  std::vector<int> ms;
  for (int p = 0; p <= 3; ++p) {
    const int q = K - p;
    if (q < 0 || q > 3 || p < q) continue;
    ms.push_back(p - q);
  }
  const Eigen::MatrixXd d = j_derivation<K>(j);
  const Eigen::MatrixXd d2 = d * d;
  Eigen::VectorXd v(kSize<K>);
  for (int i = 0; i < kSize<K>; ++i) v[i] = a.c[i];

  std::vector<TypeComponent<K>> out;
  for (int m : ms) {
    Eigen::VectorXd w = v;
    for (int other : ms) {
      if (other == m) continue;
      w = (d2 * w + double(other * other) * w) / double(other * other - m * m);
    }
    TypeComponent<K> tc;
    tc.p = (K + m) / 2;
    tc.q = (K - m) / 2;
    for (int i = 0; i < kSize<K>; ++i) tc.part.c[i] = w[i];
    out.push_back(tc);
  }
  return out;
}

}  // namespace iia::forms6
