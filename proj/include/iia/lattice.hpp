#pragma once

// Spectral exterior calculus on the flat torus T⁶ = (R/LZ)⁶ with the constant
// reference metric ḡ = identity.
//
// Fields are sampled on a regular grid with n_a points along axis a. Every
// n_a is a power of two ≥ 4, or 1: an axis with one point is a direction in
// which all fields are translation invariant, so derivatives along it vanish
// exactly. Storage is component-major: component c of a field occupies the
// contiguous block [c·P, (c+1)·P) with P the number of grid points, and the
// point index runs with axis 5 fastest.
//
// Fourier coefficients are normalized so that the zero mode is the mean.

#include <array>
#include <complex>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "iia/errors.hpp"
#include "iia/forms6.hpp"
#include "iia/parallel.hpp"

namespace iia::lattice {

using forms6::Form;
using forms6::kSize;
using Complex = std::complex<double>;

inline constexpr std::size_t kDefaultMaxPoints = std::size_t{1} << 21;

struct Grid {
  std::array<int, 6> n{8, 8, 8, 8, 8, 8};
  double length = 2.0 * std::numbers::pi;

  static Grid isotropic(int n, double length = 2.0 * std::numbers::pi);

  std::size_t points() const;
  /// Full torus volume L⁶, independent of the sampling.
  double volume() const;
  double spacing(int axis) const { return length / n[axis]; }
  double coordinate(int axis, int i) const { return i * spacing(axis); }
  std::array<int, 6> unravel(std::size_t p) const;
  std::size_t ravel(const std::array<int, 6>& idx) const;
  /// Largest |k|² on the grid (full symbol, Nyquist included).
  double max_wavenumber_squared() const;
  /// Smallest positive □ eigenvalue, (2π/L)².
  double min_positive_eigenvalue() const;

  bool operator==(const Grid&) const = default;
};

/// Throws ConfigError unless every axis is 1 or a power of two ≥ 4, at least
/// one axis is resolved, and the point count is within `max_points`.
void validate(const Grid& g, std::size_t max_points = kDefaultMaxPoints);

std::string describe(const Grid& g);

/// Real field with N components per grid point.
template <int N>
class Field {
 public:
  static constexpr int components = N;

  Field() = default;
  explicit Field(const Grid& g) : grid_(g), points_(g.points()), data_(N * points_, 0.0) {}

  const Grid& grid() const { return grid_; }
  std::size_t points() const { return points_; }
  double* component(int c) { return data_.data() + c * points_; }
  const double* component(int c) const { return data_.data() + c * points_; }
  double& at(int c, std::size_t p) { return data_[c * points_ + p]; }
  double at(int c, std::size_t p) const { return data_[c * points_ + p]; }
  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  Field& operator+=(const Field& o) {
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Field& operator-=(const Field& o) {
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Field& operator*=(double s) {
    for (auto& x : data_) x *= s;
    return *this;
  }
  /// this += s·o
  Field& axpy(double s, const Field& o) {
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * o.data_[i];
    return *this;
  }
  double max_abs() const {
    double m = 0.0;
    for (double x : data_) m = std::max(m, std::abs(x));
    return m;
  }

 private:
  Grid grid_;
  std::size_t points_ = 0;
  std::vector<double> data_;
};

template <int K>
class FormField : public Field<kSize<K>> {
 public:
  static constexpr int degree = K;
  using Field<kSize<K>>::Field;
  FormField() = default;
  explicit FormField(const Field<kSize<K>>& f) : Field<kSize<K>>(f) {}

  Form<K> value(std::size_t p) const {
    Form<K> f;
    for (int c = 0; c < kSize<K>; ++c) f.c[c] = this->at(c, p);
    return f;
  }
  void set(std::size_t p, const Form<K>& f) {
    for (int c = 0; c < kSize<K>; ++c) this->at(c, p) = f.c[c];
  }

  friend FormField operator+(FormField a, const FormField& b) { return a += b, a; }
  friend FormField operator-(FormField a, const FormField& b) { return a -= b, a; }
  friend FormField operator*(double s, FormField a) { return a *= s, a; }
};

/// Vector field V^a, a = 0..5.
class VectorField : public Field<6> {
 public:
  using Field<6>::Field;
  VectorField() = default;
  explicit VectorField(const Field<6>& f) : Field<6>(f) {}
  forms6::Vec6 value(std::size_t p) const {
    forms6::Vec6 v;
    for (int c = 0; c < 6; ++c) v[c] = at(c, p);
    return v;
  }
  void set(std::size_t p, const forms6::Vec6& v) {
    for (int c = 0; c < 6; ++c) at(c, p) = v[c];
  }
};

/// Index of (i, j), i ≤ j, in packed symmetric storage of a 6×6 matrix.
constexpr int sym_index(int i, int j) {
  if (i > j) std::swap(i, j);
  return i * 6 - i * (i - 1) / 2 + (j - i);
}

/// Symmetric g_ij, packed upper triangle (21 components).
class MetricField : public Field<21> {
 public:
  using Field<21>::Field;
  MetricField() = default;
  explicit MetricField(const Field<21>& f) : Field<21>(f) {}
  forms6::Mat6 value(std::size_t p) const;
  void set(std::size_t p, const forms6::Mat6& g);
};

/// J^i_j at component 6i + j.
class AcStructureField : public Field<36> {
 public:
  using Field<36>::Field;
  AcStructureField() = default;
  explicit AcStructureField(const Field<36>& f) : Field<36>(f) {}
  forms6::Mat6 value(std::size_t p) const;
  void set(std::size_t p, const forms6::Mat6& j);
};

/// Γ^k_pq at component 21k + sym_index(p, q).
using ChristoffelField = Field<126>;
/// N^i_jk (j < k) at component 15i + position of (j, k).
using NijenhuisField = Field<90>;

// ---------------------------------------------------------------------------
// Spectra.

/// Per-grid wavenumber tables in the r2c layout.
struct SpectralTables {
  std::size_t size = 0;
  /// i·k_a derivative symbol (imaginary part), zero on the Nyquist plane.
  std::array<std::vector<double>, 6> dk;
  /// Full |k|².
  std::vector<double> ksq;
  /// Multiplicity of the mode in a real field's full spectrum (1 or 2).
  std::vector<double> weight;
  /// 2/3-rule mask: every |m_a| ≤ n_a/3.
  std::vector<unsigned char> keep;
  /// Signed integer mode numbers.
  std::vector<std::array<std::int16_t, 6>> mode;
};

const SpectralTables& tables(const Grid& g);

template <int N>
class Spectrum {
 public:
  Spectrum() = default;
  explicit Spectrum(const Grid& g) : grid_(g), size_(tables(g).size), data_(N * size_) {}

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return size_; }
  Complex* component(int c) { return data_.data() + c * size_; }
  const Complex* component(int c) const { return data_.data() + c * size_; }

 private:
  Grid grid_;
  std::size_t size_ = 0;
  std::vector<Complex> data_;
};

namespace detail {
void forward_one(const Grid& g, const double* in, Complex* out);
/// Does not modify `in`.
void inverse_one(const Grid& g, const Complex* in, double* out);
void warn_aliasing(const char* where, double fraction);
}  // namespace detail

template <int N>
Spectrum<N> forward(const Field<N>& f) {
  Spectrum<N> s(f.grid());
  parallel_for(N, [&](std::size_t b, std::size_t e) {
    for (std::size_t c = b; c < e; ++c) detail::forward_one(f.grid(), f.component(int(c)), s.component(int(c)));
  });
  return s;
}

template <int N>
Field<N> inverse(const Spectrum<N>& s) {
  Field<N> f(s.grid());
  parallel_for(N, [&](std::size_t b, std::size_t e) {
    for (std::size_t c = b; c < e; ++c) detail::inverse_one(s.grid(), s.component(int(c)), f.component(int(c)));
  });
  return f;
}

template <int K>
FormField<K> inverse_form(const Spectrum<kSize<K>>& s) {
  return FormField<K>(inverse(s));
}

/// Zeroes every mode outside the 2/3 band.
template <int N>
void dealias(Spectrum<N>& s) {
  const auto& keep = tables(s.grid()).keep;
  for (int c = 0; c < N; ++c) {
    Complex* d = s.component(c);
    for (std::size_t i = 0; i < s.size(); ++i)
      if (!keep[i]) d[i] = 0.0;
  }
}

template <int N>
Field<N> dealiased(const Field<N>& f) {
  Spectrum<N> s = forward(f);
  dealias(s);
  return inverse(s);
}

/// Fraction of spectral energy outside the 2/3 band.
template <int N>
double aliasing_fraction(const Spectrum<N>& s) {
  const auto& t = tables(s.grid());
  double total = 0.0, top = 0.0;
  for (int c = 0; c < N; ++c) {
    const Complex* d = s.component(c);
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double e = t.weight[i] * std::norm(d[i]);
      total += e;
      if (!t.keep[i]) top += e;
    }
  }
  return total > 0.0 ? top / total : 0.0;
}

// ---------------------------------------------------------------------------
// Exterior calculus.

/// Spectral d: (dα)_I = Σ ∂_a α_J with dx^a ∧ dx^J = ±dx^I.
template <int K>
Spectrum<kSize<K + 1>> d_spectral(const Spectrum<kSize<K>>& s) {
  static_assert(K <= 5, "exterior derivative of a top form");
  const auto& t = tables(s.grid());
  Spectrum<kSize<K + 1>> out(s.grid());
  for (const auto& term : forms6::detail::interior_table<K + 1>()) {
    const std::vector<double>& dk = t.dk[term.axis];
    const Complex* in = s.component(term.out);
    Complex* o = out.component(term.in);
    const double sign = term.sign;
    for (std::size_t i = 0; i < s.size(); ++i) o[i] += Complex(0.0, sign * dk[i]) * in[i];
  }
  return out;
}

/// Spectral d* with respect to ḡ = identity: (d*α)_J = −Σ_a ∂_a α_{aJ}.
template <int K>
Spectrum<kSize<K - 1>> codiff_spectral(const Spectrum<kSize<K>>& s) {
  static_assert(K >= 1, "codifferential of a function");
  const auto& t = tables(s.grid());
  Spectrum<kSize<K - 1>> out(s.grid());
  for (const auto& term : forms6::detail::interior_table<K>()) {
    const std::vector<double>& dk = t.dk[term.axis];
    const Complex* in = s.component(term.in);
    Complex* o = out.component(term.out);
    const double sign = -term.sign;
    for (std::size_t i = 0; i < s.size(); ++i) o[i] += Complex(0.0, sign * dk[i]) * in[i];
  }
  return out;
}

template <int K>
FormField<K + 1> exterior_derivative(const FormField<K>& f) {
  const auto s = forward(f);
  const double frac = aliasing_fraction(s);
  if (frac > 1e-8) detail::warn_aliasing("exterior_derivative", frac);
  return inverse_form<K + 1>(d_spectral<K>(s));
}

template <int K>
FormField<K - 1> codifferential(const FormField<K>& f) {
  const auto s = forward(f);
  const double frac = aliasing_fraction(s);
  if (frac > 1e-8) detail::warn_aliasing("codifferential", frac);
  return inverse_form<K - 1>(codiff_spectral<K>(s));
}

/// Multiplies every coefficient by a function of |k|².
template <int N, class Fn>
void apply_symbol(Spectrum<N>& s, Fn&& fn) {
  const auto& ksq = tables(s.grid()).ksq;
  for (int c = 0; c < N; ++c) {
    Complex* d = s.component(c);
    for (std::size_t i = 0; i < s.size(); ++i) d[i] *= fn(ksq[i]);
  }
}

/// □ = dd* + d*d, componentwise −Δ on the flat torus.
template <int K>
FormField<K> hodge_laplacian(const FormField<K>& f) {
  auto s = forward(f);
  apply_symbol(s, [](double k2) { return k2; });
  return inverse_form<K>(s);
}

/// Constant-coefficient harmonic part of a k-form field.
template <int K>
using CohomologyVector = Form<K>;

template <int K>
CohomologyVector<K> harmonic_part(const FormField<K>& f) {
  Form<K> h;
  const double inv = 1.0 / double(f.points());
  for (int c = 0; c < kSize<K>; ++c) {
    const double* d = f.component(c);
    double s = 0.0;
    for (std::size_t p = 0; p < f.points(); ++p) s += d[p];
    h.c[c] = s * inv;
  }
  return h;
}

template <int K>
FormField<K> constant_field(const Grid& g, const Form<K>& value) {
  FormField<K> f(g);
  for (int c = 0; c < kSize<K>; ++c) std::fill(f.component(c), f.component(c) + f.points(), value.c[c]);
  return f;
}

template <int K>
struct HarmonicSplit {
  CohomologyVector<K> harmonic;
  FormField<K> remainder;
};

template <int K>
HarmonicSplit<K> harmonic_projection(const FormField<K>& f) {
  HarmonicSplit<K> out;
  out.harmonic = harmonic_part(f);
  out.remainder = f;
  for (int c = 0; c < kSize<K>; ++c) {
    double* d = out.remainder.component(c);
    for (std::size_t p = 0; p < f.points(); ++p) d[p] -= out.harmonic.c[c];
  }
  return out;
}

/// □⁻¹ on the complement of the harmonic forms; the zero mode is projected
/// away first.
template <int K>
FormField<K> green_inverse(const FormField<K>& f) {
  auto s = forward(f);
  apply_symbol(s, [](double k2) { return k2 > 0.0 ? 1.0 / k2 : 0.0; });
  return inverse_form<K>(s);
}

double l2_norm_raw(const Grid& g, const double* data, int ncomp);

template <int N>
double l2_norm(const Field<N>& f) {
  return l2_norm_raw(f.grid(), f.raw().data(), N);
}

/// ⟨a, b⟩ = ∫ Σ_c a_c b_c over the torus.
template <int N>
double l2_inner(const Field<N>& a, const Field<N>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.raw().size(); ++i) s += a.raw()[i] * b.raw()[i];
  return s * a.grid().volume() / double(a.points());
}

/// d* G f: a primitive of an exact form f, so d(neumann_operator(f)) = f.
/// Throws NotExactError if f has a harmonic part or is not closed.
template <int K>
FormField<K - 1> neumann_operator(const FormField<K>& f, double tol = 1e-10) {
  const double scale = std::max(1.0, f.max_abs());
  const auto h = harmonic_part(f);
  if (h.max_abs() > tol * scale) throw NotExactError("neumann_operator: input has a nonzero harmonic part");
  auto s = forward(f);
  if constexpr (K < 6) {
    const auto ds = inverse(d_spectral<K>(s));
    if (ds.max_abs() > tol * scale) throw NotExactError("neumann_operator: input is not closed");
  }
  apply_symbol(s, [](double k2) { return k2 > 0.0 ? 1.0 / k2 : 0.0; });
  return inverse_form<K - 1>(codiff_spectral<K>(s));
}

/// (Σ_k (1+|k|²)^s |f̂_k|² · vol)^{1/2}; s = 0 is the L² norm.
template <int N>
double sobolev_norm(const Field<N>& f, int s) {
  if (s < 0) throw ConfigError("sobolev_norm: order must be non-negative");
  const auto spec = forward(f);
  const auto& t = tables(f.grid());
  double total = 0.0;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    double e = 0.0;
    for (int c = 0; c < N; ++c) e += std::norm(spec.component(c)[i]);
    total += t.weight[i] * std::pow(1.0 + t.ksq[i], s) * e;
  }
  return std::sqrt(total * f.grid().volume());
}

/// ∫|∇^k f|² with flat coordinate derivatives, summed over all index tuples.
template <int N>
double gradient_energy(const Spectrum<N>& spec, int k) {
  const auto& t = tables(spec.grid());
  double total = 0.0;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    double e = 0.0;
    for (int c = 0; c < N; ++c) e += std::norm(spec.component(c)[i]);
    total += t.weight[i] * std::pow(t.ksq[i], k) * e;
  }
  return total * spec.grid().volume();
}

template <int N>
double sup_norm(const Field<N>& f) {
  return f.max_abs();
}

/// Spatial derivative ∂_a of every component.
template <int N>
Field<N> partial(const Field<N>& f, int axis) {
  auto s = forward(f);
  const auto& dk = tables(f.grid()).dk[axis];
  for (int c = 0; c < N; ++c) {
    Complex* d = s.component(c);
    for (std::size_t i = 0; i < s.size(); ++i) d[i] *= Complex(0.0, dk[i]);
  }
  return inverse(s);
}

template <int N>
Field<N> partial_from_spectrum(const Spectrum<N>& s, int axis) {
  Spectrum<N> t = s;
  const auto& dk = tables(s.grid()).dk[axis];
  for (int c = 0; c < N; ++c) {
    Complex* d = t.component(c);
    for (std::size_t i = 0; i < t.size(); ++i) d[i] *= Complex(0.0, dk[i]);
  }
  return inverse(t);
}

/// Exact trigonometric interpolant of one spectral component at x.
double evaluate(const Grid& g, const Complex* spectrum, const std::array<double, 6>& x);

// ---------------------------------------------------------------------------
// Pointwise algebra on fields.

template <int P, int Q>
FormField<P + Q> wedge(const FormField<P>& a, const FormField<Q>& b) {
  FormField<P + Q> out(a.grid());
  for (const auto& t : forms6::detail::wedge_table<P, Q>()) {
    const double* x = a.component(t.lhs);
    const double* y = b.component(t.rhs);
    double* o = out.component(t.out);
    const double s = t.sign;
    for (std::size_t p = 0; p < a.points(); ++p) o[p] += s * x[p] * y[p];
  }
  return out;
}

template <int P, int Q>
FormField<P + Q> wedge(const Form<P>& a, const FormField<Q>& b) {
  FormField<P + Q> out(b.grid());
  for (const auto& t : forms6::detail::wedge_table<P, Q>()) {
    if (a.c[t.lhs] == 0.0) continue;
    const double* y = b.component(t.rhs);
    double* o = out.component(t.out);
    const double s = t.sign * a.c[t.lhs];
    for (std::size_t p = 0; p < b.points(); ++p) o[p] += s * y[p];
  }
  return out;
}

template <int K>
FormField<K - 1> interior(const VectorField& v, const FormField<K>& a) {
  FormField<K - 1> out(a.grid());
  for (const auto& t : forms6::detail::interior_table<K>()) {
    const double* x = v.component(t.axis);
    const double* y = a.component(t.in);
    double* o = out.component(t.out);
    const double s = t.sign;
    for (std::size_t p = 0; p < a.points(); ++p) o[p] += s * x[p] * y[p];
  }
  return out;
}

/// Applies a linear map to the values of a form field, point by point.
template <int K, int M, class Fn>
FormField<M> map_points(const FormField<K>& a, Fn&& fn) {
  FormField<M> out(a.grid());
  parallel_for(a.points(), [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) out.set(p, fn(a.value(p), p));
  });
  return out;
}

/// Band-limited random k-form field: every mode with |m_a| ≤ max_mode on the
/// resolved axes gets an independent Gaussian coefficient of size `amplitude`.
template <int K>
FormField<K> random_band_limited(const Grid& g, std::uint64_t seed, int max_mode, double amplitude = 1.0,
                                 bool zero_mean = false);

void random_band_limited_raw(const Grid& g, std::uint64_t seed, int max_mode, double amplitude, bool zero_mean,
                             double* out, int ncomp);

template <int K>
FormField<K> random_band_limited(const Grid& g, std::uint64_t seed, int max_mode, double amplitude,
                                 bool zero_mean) {
  FormField<K> f(g);
  random_band_limited_raw(g, seed, max_mode, amplitude, zero_mean, f.raw().data(), kSize<K>);
  return f;
}

// ---------------------------------------------------------------------------
// Geometry of tensor fields.

/// Γ^k_pq = ½ g^{ks}(∂_p g_qs + ∂_q g_ps − ∂_s g_pq). Throws NotPositiveError
/// naming the first grid point where g is not positive definite.
ChristoffelField christoffel(const MetricField& g);

/// Contraction g^{pq} Γ^k_pq, computed one derivative axis at a time.
VectorField christoffel_trace(const MetricField& g);

/// N^i_jk = J^a_j ∂_a J^i_k − J^a_k ∂_a J^i_j − J^i_a (∂_j J^a_k − ∂_k J^a_j).
NijenhuisField nijenhuis(const AcStructureField& j);

/// Throws NotPositiveError with the grid location of the first failure.
void check_positive_metric(const MetricField& g, double min_eigenvalue = 1e-10);

// ---------------------------------------------------------------------------
// Snapshots.

/// Binary layout: "IIAF", uint32 version, int32 degree, int32 n[6], double L,
/// uint32 endianness tag 0x01020304, then the component-major doubles.
void write_snapshot_raw(const std::string& path, int degree, const Grid& g, const std::vector<double>& data);
std::pair<Grid, std::vector<double>> read_snapshot_raw(const std::string& path, int degree);

template <int K>
void write_snapshot(const std::string& path, const FormField<K>& f) {
  write_snapshot_raw(path, K, f.grid(), f.raw());
}

template <int K>
FormField<K> read_snapshot(const std::string& path) {
  auto [g, data] = read_snapshot_raw(path, K);
  FormField<K> f(g);
  if (data.size() != f.raw().size()) throw ConfigError("read_snapshot: payload size mismatch in " + path);
  f.raw() = std::move(data);
  return f;
}

}  // namespace iia::lattice
