#include "iia/flow.hpp"

#include <atomic>
#include <cstdio>
#include <limits>
#include <sstream>

namespace iia::flow {

using forms6::Form;
using forms6::Mat6;
using lattice::Field;
using lattice::MetricField;

TypeIIAState constant_state(const Grid& g, const Form<3>& phi, const Form<2>& omega) {
  lattice::validate(g);
  TypeIIAState s;
  s.phi = lattice::constant_field<3>(g, phi);
  s.omega = lattice::constant_field<2>(g, omega);
  return s;
}

TypeIIAState standard_state(const Grid& g, double norm) {
  return constant_state(g, forms6::standard_phi(norm), forms6::standard_omega());
}

namespace {

std::string where(const Grid& g, std::size_t p, double t) {
  const auto idx = g.unravel(p);
  std::ostringstream os;
  os << "grid point (";
  for (int a = 0; a < 6; ++a) os << (a ? "," : "") << idx[a];
  os << ") at t=" << t;
  return os.str();
}

enum class PointFailure { None, Orientation, NotStable, NotPositive };

const char* describe(PointFailure f) {
  switch (f) {
    case PointFailure::Orientation:
      return "omega lost nondegeneracy or orientation";
    case PointFailure::NotStable:
      return "phi is no longer stable of negative type";
    case PointFailure::NotPositive:
      return "induced metric is not positive definite";
    default:
      return "ok";
  }
}

}  // namespace

Derived derive(const TypeIIAState& s) {
  const Grid& g = s.grid();
  const std::size_t np = g.points();
  Derived d;
  d.phihat = FormField<3>(g);
  d.normsq = Field<1>(g);
  d.metric = MetricField(g);
  d.omega_inv = FormField<2>(g);
  const forms6::Tolerances tol;
  std::atomic<std::size_t> first_bad{std::numeric_limits<std::size_t>::max()};
  std::vector<PointFailure> failure(np, PointFailure::None);
  parallel_for(np, [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) {
      const Form<3> phi = s.phi.value(p);
      const Form<2> omega = s.omega.value(p);
      PointFailure fail = PointFailure::None;
      const double vol = forms6::volume_coefficient(omega);
      const forms6::HitchinInvariants h = forms6::hitchin_invariants(phi);
      if (!(vol > 0.0)) {
        fail = PointFailure::Orientation;
      } else if (!(h.lambda < tol.lambda_max)) {
        fail = PointFailure::NotStable;
      } else {
        const forms6::AcStructure j{h.k / std::sqrt(-h.lambda)};
        const Form<3> hat = forms6::dual_from_structure(j, phi);
        const Mat6 w = forms6::to_matrix(omega);
        Mat6 gm = w * j.m;
        gm = 0.5 * (gm + gm.transpose());
        Eigen::LLT<Mat6> llt(gm - tol.min_metric_eigenvalue * Mat6::Identity());
        if (llt.info() != Eigen::Success || !std::isfinite(gm.sum())) {
          fail = PointFailure::NotPositive;
        } else {
          d.phihat.set(p, hat);
          d.normsq.at(0, p) = forms6::wedge(phi, hat).c[0] / vol;
          d.metric.set(p, gm);
          d.omega_inv.set(p, forms6::from_matrix(w.inverse()));
        }
      }
      if (fail != PointFailure::None) {
        failure[p] = fail;
        std::size_t cur = first_bad.load();
        while (p < cur && !first_bad.compare_exchange_weak(cur, p)) {
        }
      }
    }
  });
  const std::size_t bad = first_bad.load();
  if (bad != std::numeric_limits<std::size_t>::max())
    throw DegenerateError(std::string(describe(failure[bad])) + " at " + where(g, bad, s.time));
  return d;
}

namespace {

/// d of the 2/3-filtered field.
template <int K>
FormField<K + 1> filtered_d(const FormField<K>& f) {
  auto spec = lattice::forward(f);
  lattice::dealias(spec);
  return lattice::inverse_form<K + 1>(lattice::d_spectral<K>(spec));
}

FormField<3> times_scalar(const Field<1>& s, const FormField<3>& f) {
  FormField<3> out(f.grid());
  const double* sv = s.component(0);
  for (int c = 0; c < forms6::kSize<3>; ++c) {
    const double* x = f.component(c);
    double* o = out.component(c);
    for (std::size_t p = 0; p < f.points(); ++p) o[p] = sv[p] * x[p];
  }
  return out;
}

Mat6 inverse_at(const FormField<2>& omega_inv, std::size_t p) { return forms6::to_matrix(omega_inv.value(p)); }

}  // namespace

FormField<3> rhs_primary(const TypeIIAState& s, const Derived& d) {
  const FormField<4> dp = filtered_d<3>(times_scalar(d.normsq, d.phihat));
  FormField<2> q(s.grid());
  parallel_for(s.grid().points(), [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) q.set(p, forms6::lambda_with_inverse(inverse_at(d.omega_inv, p), dp.value(p)));
  });
  return filtered_d<2>(q);
}

FormField<3> rhs_primary(const TypeIIAState& s) { return rhs_primary(s, derive(s)); }

VectorField deturck_vector(const TypeIIAState& s, const Derived& d) {
  const Grid& g = s.grid();
  const MetricField gf(lattice::dealiased(static_cast<const Field<21>&>(d.metric)));
  const Field<1> nsq = lattice::dealiased(d.normsq);
  const VectorField trace = lattice::christoffel_trace(gf);
  const auto nsq_spec = lattice::forward(nsq);
  std::array<Field<1>, 6> grad;
  for (int a = 0; a < 6; ++a)
    grad[a] = g.n[a] > 1 ? lattice::partial_from_spectrum(nsq_spec, a) : Field<1>(g);
  VectorField v(g);
  parallel_for(g.points(), [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) {
      const Mat6 ginv = gf.value(p).inverse();
      forms6::Vec6 dn;
      for (int a = 0; a < 6; ++a) dn[a] = grad[a].at(0, p);
      const forms6::Vec6 up = ginv * dn;
      const double n = nsq.at(0, p);
      for (int k = 0; k < 6; ++k) v.at(k, p) = n * trace.at(k, p) - up[k];
    }
  });
  return VectorField(lattice::dealiased(static_cast<const Field<6>&>(v)));
}

VectorField deturck_vector(const TypeIIAState& s) { return deturck_vector(s, derive(s)); }

namespace {

ReparametrizedRhs assemble(const TypeIIAState& s, FormField<3> e, const VectorField& v) {
  ReparametrizedRhs out;
  out.dphi = std::move(e);
  out.dphi += filtered_d<2>(lattice::interior(v, s.phi));
  out.domega = filtered_d<1>(lattice::interior(v, s.omega));
  out.v = v;
  return out;
}

}  // namespace

ReparametrizedRhs rhs_reparametrized(const TypeIIAState& s) {
  const Derived d = derive(s);
  return assemble(s, rhs_primary(s, d), deturck_vector(s, d));
}

ReparametrizedRhs rhs_with_vector(const TypeIIAState& s, const VectorField& v) {
  return assemble(s, rhs_primary(s), v);
}

SolitonResidual soliton_residual(const TypeIIAState& s, const VectorField& v) {
  const ReparametrizedRhs r = rhs_with_vector(s, v);
  return {lattice::l2_norm(r.dphi), lattice::l2_norm(r.domega)};
}

// ---------------------------------------------------------------------------
// Monitors.

const char* Monitor::csv_header() { return "t,rhs_l2,dphi_l2,primitivity_max,sup_phi,curv_proxy,min_g_eig,h_drift"; }

std::string Monitor::csv() const {
  std::string out = csv_header();
  out += '\n';
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.t, r.rhs_l2, r.dphi_l2,
                  r.primitivity_max, r.sup_phi, r.curv_proxy, r.min_g_eig, r.h_drift);
    out += buf;
  }
  return out;
}

const char* to_string(Status s) {
  switch (s) {
    case Status::Converged:
      return "converged";
    case Status::ReachedTMax:
      return "reached_t_max";
    case Status::Degenerate:
      return "degenerate";
    case Status::StepUnderflow:
      return "step_underflow";
    case Status::StepLimit:
      return "step_limit";
  }
  return "unknown";
}

double curvature_proxy(const MetricField& g) {
  const Grid& grid = g.grid();
  const auto spec = lattice::forward(g);
  const auto& t = lattice::tables(grid);
  double sup = 0.0;
  for (int a = 0; a < 6; ++a) {
    if (grid.n[a] == 1) continue;
    for (int b = a; b < 6; ++b) {
      if (grid.n[b] == 1) continue;
      auto s2 = spec;
      for (int c = 0; c < 21; ++c) {
        lattice::Complex* x = s2.component(c);
        for (std::size_t i = 0; i < s2.size(); ++i) x[i] *= -t.dk[a][i] * t.dk[b][i];
      }
      sup = std::max(sup, lattice::inverse(s2).max_abs());
    }
  }
  return sup;
}

double primitivity_max(const FormField<3>& phi, const FormField<2>& omega) {
  return lattice::wedge(phi, omega).max_abs();
}

namespace {

double min_metric_eigenvalue(const MetricField& g) {
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < g.points(); ++p) {
    Eigen::SelfAdjointEigenSolver<Mat6> es(g.value(p), Eigen::EigenvaluesOnly);
    lo = std::min(lo, es.eigenvalues().minCoeff());
  }
  return lo;
}

double max_of(const Field<1>& f) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : f.raw()) m = std::max(m, x);
  return m;
}

MonitorRow measure_with(const TypeIIAState& s, const Derived& d, double rhs_l2, const Form<3>& h_phi0,
                        const Form<2>& h_omega0, bool curvature) {
  MonitorRow r;
  r.t = s.time;
  r.rhs_l2 = rhs_l2;
  r.dphi_l2 = lattice::l2_norm(lattice::inverse(lattice::d_spectral<3>(lattice::forward(s.phi))));
  r.primitivity_max = primitivity_max(s.phi, s.omega);
  r.sup_phi = std::sqrt(max_of(d.normsq));
  r.curv_proxy = curvature ? curvature_proxy(d.metric) : 0.0;
  r.min_g_eig = min_metric_eigenvalue(d.metric);
  r.h_drift = std::max((lattice::harmonic_part(s.phi) - h_phi0).max_abs(),
                       (lattice::harmonic_part(s.omega) - h_omega0).max_abs());
  return r;
}

struct Rates {
  FormField<3> phi;
  FormField<2> omega;
  VectorField v;
};

Rates evaluate_rates(const TypeIIAState& s, bool reparametrized, const Derived* pre) {
  std::optional<Derived> own;
  const Derived& d = pre ? *pre : own.emplace(derive(s));
  Rates r;
  if (reparametrized) {
    ReparametrizedRhs rr = assemble(s, rhs_primary(s, d), deturck_vector(s, d));
    r.phi = std::move(rr.dphi);
    r.omega = std::move(rr.domega);
    r.v = std::move(rr.v);
  } else {
    r.phi = rhs_primary(s, d);
    r.omega = FormField<2>(s.grid());
  }
  return r;
}

TypeIIAState stage(const TypeIIAState& s, double h, const Rates& k) {
  TypeIIAState out = s;
  out.phi.axpy(h, k.phi);
  out.omega.axpy(h, k.omega);
  out.time = s.time + h;
  return out;
}

}  // namespace

MonitorRow measure(const TypeIIAState& s, double rhs_l2, const Form<3>& h_phi0, const Form<2>& h_omega0,
                   bool curvature) {
  return measure_with(s, derive(s), rhs_l2, h_phi0, h_omega0, curvature);
}

double stable_dt(const FlowConfig& cfg, const Grid& g, double max_normsq) {
  if (cfg.fixed_dt > 0.0) return cfg.fixed_dt;
  return cfg.dt_safety * kRk4RealLimit / (max_normsq * g.max_wavenumber_squared());
}

AdvanceResult advance(const TypeIIAState& initial, const FlowConfig& cfg) {
  if (cfg.scheme != "rk4") throw ConfigError("advance: unsupported scheme '" + cfg.scheme + "'");
  if (!(cfg.dt_safety > 0.0 && cfg.dt_safety <= 1.0)) throw ConfigError("advance: dt_safety must lie in (0, 1]");
  if (cfg.monitor_stride < 1) throw ConfigError("advance: monitor_stride must be positive");

  AdvanceResult res;
  TypeIIAState state = initial;
  const Form<3> h_phi0 = lattice::harmonic_part(initial.phi);
  const Form<2> h_omega0 = lattice::harmonic_part(initial.omega);
  if (cfg.keep_trajectory) res.trajectory.push_back({state.time, state.phi, state.omega});
  const double t_end = cfg.t_max;

  try {
    while (true) {
      const Derived d = derive(state);
      const Rates k1 = evaluate_rates(state, cfg.reparametrized, &d);
      const double rhs_l2 = std::hypot(lattice::l2_norm(k1.phi), lattice::l2_norm(k1.omega));
      res.final_rhs_l2 = rhs_l2;
      if (cfg.keep_vector_field && cfg.reparametrized) res.vector_history.push_back({state.time, k1.v});

      const bool converged = cfg.stationary_tol > 0.0 && rhs_l2 <= cfg.stationary_tol;
      const bool at_end = state.time >= t_end - 1e-13;
      const bool at_limit = res.steps >= cfg.max_steps;
      if (res.steps % cfg.monitor_stride == 0 || converged || at_end || at_limit) {
        res.monitor.rows.push_back(measure_with(state, d, rhs_l2, h_phi0, h_omega0, cfg.curvature_monitor));
      }
      if (converged) {
        res.status = Status::Converged;
        break;
      }
      if (at_end) {
        res.status = Status::ReachedTMax;
        break;
      }
      if (at_limit) {
        res.status = Status::StepLimit;
        res.message = "step limit reached before t_max";
        break;
      }

      double dt = stable_dt(cfg, state.grid(), max_of(d.normsq));
      dt = std::min(dt, t_end - state.time);
      if (!(dt >= 1e-12)) {
        res.status = Status::StepUnderflow;
        res.message = "time step fell below 1e-12";
        break;
      }
      const Rates k2 = evaluate_rates(stage(state, 0.5 * dt, k1), cfg.reparametrized, nullptr);
      const Rates k3 = evaluate_rates(stage(state, 0.5 * dt, k2), cfg.reparametrized, nullptr);
      const Rates k4 = evaluate_rates(stage(state, dt, k3), cfg.reparametrized, nullptr);
      const double w = dt / 6.0;
      state.phi.axpy(w, k1.phi).axpy(2.0 * w, k2.phi).axpy(2.0 * w, k3.phi).axpy(w, k4.phi);
      if (cfg.reparametrized)
        state.omega.axpy(w, k1.omega).axpy(2.0 * w, k2.omega).axpy(2.0 * w, k3.omega).axpy(w, k4.omega);
      state.time = (t_end - state.time - dt <= 1e-13) ? t_end : state.time + dt;
      ++res.steps;
      if (cfg.keep_trajectory && res.steps % cfg.monitor_stride == 0)
        res.trajectory.push_back({state.time, state.phi, state.omega});
    }
  } catch (const Error& e) {
    res.status = Status::Degenerate;
    res.message = e.what();
  }
  if (cfg.keep_trajectory && (res.trajectory.empty() || res.trajectory.back().t != state.time))
    res.trajectory.push_back({state.time, state.phi, state.omega});
  res.final_state = std::move(state);
  return res;
}

}  // namespace iia::flow
