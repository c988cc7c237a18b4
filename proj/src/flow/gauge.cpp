#include <cmath>

#include "iia/flow.hpp"

namespace iia::flow {

using forms6::Form;
using forms6::Mat6;
using forms6::Vec6;
using lattice::Complex;

forms6::Vec6 interpolate(const VectorField& v, const std::array<double, 6>& x) {
  const Grid& g = v.grid();
  std::array<int, 6> lo{}, hi{};
  std::array<double, 6> frac{};
  std::array<int, 6> active{};
  int rank = 0;
  for (int a = 0; a < 6; ++a) {
    if (g.n[a] == 1) continue;
    const double s = x[a] / g.spacing(a);
    const double f = std::floor(s);
    int i = static_cast<int>(f) % g.n[a];
    if (i < 0) i += g.n[a];
    lo[a] = i;
    hi[a] = (i + 1) % g.n[a];
    frac[a] = s - f;
    active[rank++] = a;
  }
  Vec6 out = Vec6::Zero();
  for (int corner = 0; corner < (1 << rank); ++corner) {
    std::array<int, 6> idx{};
    double w = 1.0;
    for (int r = 0; r < rank; ++r) {
      const int a = active[r];
      const bool up = (corner >> r) & 1;
      idx[a] = up ? hi[a] : lo[a];
      w *= up ? frac[a] : 1.0 - frac[a];
    }
    if (w == 0.0) continue;
    out += w * v.value(g.ravel(idx));
  }
  return out;
}

namespace {

constexpr std::size_t kMaxEvaluationWork = std::size_t{1} << 31;

// Values of all components of a spectrum at an arbitrary point.
template <int N>
std::array<double, N> evaluate_all(const lattice::Spectrum<N>& s, const std::array<double, 6>& x) {
  const Grid& g = s.grid();
  const auto& t = lattice::tables(g);
  const double k0 = 2.0 * std::numbers::pi / g.length;
  std::array<std::vector<Complex>, 6> phase;
  for (int a = 0; a < 6; ++a) {
    const int n = g.n[a];
    phase[a].resize(n + 1);
    for (int m = -n / 2; m <= n / 2; ++m) phase[a][m + n / 2] = std::polar(1.0, k0 * m * x[a]);
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < t.size; ++i) {
    Complex e = t.weight[i];
    for (int a = 0; a < 6; ++a)
      if (g.n[a] > 1) e *= phase[a][t.mode[i][a] + g.n[a] / 2];
    for (int c = 0; c < N; ++c) out[c] += (s.component(c)[i] * e).real();
  }
  return out;
}

}  // namespace

template <int K>
FormField<K> pullback_by_displacement(const FormField<K>& f, const VectorField& u) {
  const Grid& g = f.grid();
  if (u.max_abs() == 0.0) return f;
  if (g.points() * lattice::tables(g).size > kMaxEvaluationWork)
    throw ConfigError("pullback_by_displacement: grid " + lattice::describe(g) +
                      " is too large for pointwise trigonometric evaluation");
  const auto spec = lattice::forward(f);
  const auto uspec = lattice::forward(static_cast<const lattice::Field<6>&>(u));
  std::array<lattice::Field<6>, 6> du;
  for (int i = 0; i < 6; ++i)
    du[i] = g.n[i] > 1 ? lattice::partial_from_spectrum(uspec, i) : lattice::Field<6>(g);
  FormField<K> out(g);
  parallel_for(g.points(), [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) {
      const auto idx = g.unravel(p);
      std::array<double, 6> y{};
      Mat6 jac = Mat6::Identity();
      for (int a = 0; a < 6; ++a) {
        y[a] = g.coordinate(a, idx[a]) + u.at(a, p);
        for (int i = 0; i < 6; ++i) jac(a, i) += du[i].at(a, p);
      }
      const auto vals = evaluate_all(spec, y);
      Form<K> at;
      for (int c = 0; c < forms6::kSize<K>; ++c) at.c[c] = vals[c];
      out.set(p, forms6::pullback(jac, at));
    }
  });
  return out;
}

template FormField<2> pullback_by_displacement<2>(const FormField<2>&, const VectorField&);
template FormField<3> pullback_by_displacement<3>(const FormField<3>&, const VectorField&);

GaugeResult gauge_reconstruct(const std::vector<Sample>& trajectory, const std::vector<VectorSample>& vectors) {
  if (trajectory.empty()) throw ConfigError("gauge_reconstruct: empty trajectory");
  const Grid& g = trajectory.front().phi.grid();
  const std::size_t np = g.points();
  GaugeResult res;
  res.displacement = VectorField(g);

  std::vector<std::array<double, 6>> pos(np);
  for (std::size_t p = 0; p < np; ++p) {
    const auto idx = g.unravel(p);
    for (int a = 0; a < 6; ++a) pos[p][a] = g.coordinate(a, idx[a]);
  }
  double min_h = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 6; ++a)
    if (g.n[a] > 1) min_h = std::min(min_h, g.spacing(a));

  auto emit = [&](const Sample& s) {
    for (std::size_t p = 0; p < np; ++p) {
      const auto idx = g.unravel(p);
      for (int a = 0; a < 6; ++a) res.displacement.at(a, p) = pos[p][a] - g.coordinate(a, idx[a]);
    }
    Sample out;
    out.t = s.t;
    out.phi = pullback_by_displacement(s.phi, res.displacement);
    out.omega = pullback_by_displacement(s.omega, res.displacement);
    res.pulled_back.push_back(std::move(out));
  };

  std::size_t next = 0;
  auto emit_due = [&](double t) {
    while (next < trajectory.size() && trajectory[next].t <= t + 1e-12) emit(trajectory[next++]);
  };
  emit_due(vectors.empty() ? 0.0 : vectors.front().t);

  for (std::size_t n = 0; n + 1 < vectors.size(); ++n) {
    const VectorField& v0 = vectors[n].v;
    const VectorField& v1 = vectors[n + 1].v;
    const double h = vectors[n + 1].t - vectors[n].t;
    if (h <= 0.0) continue;
    if (std::max(v0.max_abs(), v1.max_abs()) * h > min_h)
      throw StepUnderflowError("gauge_reconstruct: particle step exceeds one grid spacing at t=" +
                               std::to_string(vectors[n].t));
    VectorField vm = v0;
    vm += v1;
    vm *= 0.5;
    parallel_for(np, [&](std::size_t b, std::size_t e) {
      for (std::size_t p = b; p < e; ++p) {
        auto shift = [&](const std::array<double, 6>& y, const Vec6& k, double s) {
          std::array<double, 6> out = y;
          for (int a = 0; a < 6; ++a) out[a] += s * k[a];
          return out;
        };
        const auto& y = pos[p];
        const Vec6 k1 = -interpolate(v0, y);
        const Vec6 k2 = -interpolate(vm, shift(y, k1, 0.5 * h));
        const Vec6 k3 = -interpolate(vm, shift(y, k2, 0.5 * h));
        const Vec6 k4 = -interpolate(v1, shift(y, k3, h));
        for (int a = 0; a < 6; ++a) pos[p][a] += h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
      }
    });
    emit_due(vectors[n + 1].t);
  }
  emit_due(std::numeric_limits<double>::infinity());
  return res;
}

}  // namespace iia::flow
