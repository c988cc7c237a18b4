#include "iia/stability.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include <Eigen/Dense>
#include <json.hpp>

#include "iia/errors.hpp"
#include "iia/parallel.hpp"

namespace iia::stability {

using forms6::Form;
using forms6::Mat6;
using lattice::Field;

namespace {

using Lefschetz = Eigen::Matrix<double, 15, 15>;

// Solves ω∧ω∧b = rhs for a 1-form b.
Form<1> invert_omega_squared(const Form<2>& omega, const Form<5>& rhs) {
  const Form<4> w2 = forms6::wedge(omega, omega);
  Eigen::Matrix<double, 6, 6> m;
  for (int col = 0; col < 6; ++col) {
    Form<1> e;
    e.c[col] = 1.0;
    const Form<5> img = forms6::wedge(w2, e);
    for (int row = 0; row < 6; ++row) m(row, col) = img.c[row];
  }
  Eigen::FullPivLU<Eigen::Matrix<double, 6, 6>> lu(m);
  if (!lu.isInvertible()) throw DegenerateError("ω²∧· is singular on 1-forms");
  Eigen::Matrix<double, 6, 1> r;
  for (int i = 0; i < 6; ++i) r[i] = rhs.c[i];
  const Eigen::Matrix<double, 6, 1> x = lu.solve(r);
  Form<1> b;
  for (int i = 0; i < 6; ++i) b.c[i] = x[i];
  return b;
}

Form<3> primitive_part(const Form<2>& omega, const Form<3>& a) {
  const Form<1> b = invert_omega_squared(omega, forms6::wedge(a, omega));
  return a - forms6::wedge(omega, b);
}

// Pointwise L⁻¹ for a constant ω.
FormField<2> lefschetz_solve(const Form<2>& omega, const FormField<4>& gamma) {
  const Lefschetz inv = forms6::lefschetz_matrix(omega).fullPivLu().inverse();
  FormField<2> out(gamma.grid());
  for (int r = 0; r < 15; ++r) {
    double* dst = out.component(r);
    for (int c = 0; c < 15; ++c) {
      const double w = inv(r, c);
      if (w == 0.0) continue;
      const double* src = gamma.component(c);
      for (std::size_t p = 0; p < gamma.points(); ++p) dst[p] += w * src[p];
    }
  }
  return out;
}

// Pointwise L_ω⁻¹ for a varying ω.
FormField<2> lefschetz_solve(const FormField<2>& omega, const FormField<4>& gamma) {
  FormField<2> out(gamma.grid());
  parallel_for(gamma.points(), [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) out.set(p, forms6::lefschetz_invert(omega.value(p), gamma.value(p)));
  });
  return out;
}

double closedness(const FormField<3>& f) { return lattice::sup_norm(lattice::exterior_derivative(f)); }

template <int K>
FormField<K> minus_constant(const FormField<K>& f, const Form<K>& c) {
  FormField<K> out = f;
  for (int i = 0; i < forms6::kSize<K>; ++i) {
    double* d = out.component(i);
    for (std::size_t p = 0; p < out.points(); ++p) d[p] -= c.c[i];
  }
  return out;
}

Form<3> class_rate(const Form<2>& omega_s, const Form<2>& omega_dot, const Form<3>& phi) {
  const Form<1> b = invert_omega_squared(omega_s, forms6::wedge(omega_dot, phi));
  return -1.0 * forms6::wedge(omega_s, b);
}

void check_class(const Form<3>& phi, const Form<2>& omega, double s) {
  try {
    forms6::make_point_structure(phi, omega);
  } catch (const NotPositiveError& e) {
    throw TooFarError("compatible φ: class leaves the positive cone at s=" + std::to_string(s) + ": " + e.what());
  } catch (const OrientationError& e) {
    throw TooFarError("compatible φ: ω_s changes orientation at s=" + std::to_string(s));
  } catch (const PrimitivityError& e) {
    throw DegenerateError("compatible φ: class ODE lost primitivity at s=" + std::to_string(s));
  }
}

}  // namespace

// ---------------------------------------------------------------------------

CorrectedPair harmonic_correction(const FormField<3>& phi0, const FormField<2>& omega0) {
  CorrectedPair c;
  c.phi_tilde = lattice::harmonic_part(phi0);
  c.omega_tilde = lattice::harmonic_part(omega0);
  c.wedge_residual = forms6::wedge(c.phi_tilde, c.omega_tilde).max_abs();
  c.provenance.push_back("phi: zero-mode projection");
  c.provenance.push_back("omega: zero-mode projection");
  try {
    forms6::make_point_structure(c.phi_tilde, c.omega_tilde);
  } catch (const PrimitivityError& e) {
    throw TooFarError(std::string("harmonic correction: projected pair is not primitive: ") + e.what());
  } catch (const Error& e) {
    throw TooFarError(std::string("harmonic correction: projected pair is not positive: ") + e.what());
  }
  return c;
}

TypeIIAState corrected_state(const Grid& g, const CorrectedPair& c) {
  return flow::constant_state(g, c.phi_tilde, c.omega_tilde);
}

// ---------------------------------------------------------------------------

RateFit fit_decay(const std::vector<double>& t, const std::vector<double>& y, std::size_t first, std::size_t last) {
  RateFit fit;
  last = std::min(last, std::min(t.size(), y.size()));
  if (last < first + 2) return fit;
  const double n = double(last - first);
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t i = first; i < last; ++i) {
    if (!(y[i] > 0.0)) return fit;
    const double ly = std::log(y[i]);
    st += t[i];
    sy += ly;
    stt += t[i] * t[i];
    sty += t[i] * ly;
  }
  const double denom = n * stt - st * st;
  if (denom <= 0.0) return fit;
  const double slope = (n * sty - st * sy) / denom;
  const double icpt = (sy - slope * st) / n;
  double ss_res = 0, ss_tot = 0;
  const double mean = sy / n;
  for (std::size_t i = first; i < last; ++i) {
    const double ly = std::log(y[i]);
    ss_res += std::pow(ly - (icpt + slope * t[i]), 2);
    ss_tot += std::pow(ly - mean, 2);
  }
  fit.rate = -slope;
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

EnergyReport energies(const std::vector<flow::Sample>& trajectory, const CorrectedPair& corrected, int k_max) {
  if (k_max < 0 || k_max > 10) throw ConfigError("energies: k_max must lie in [0, 10]");
  EnergyReport rep;
  rep.i_k.assign(k_max + 1, {});
  for (const auto& s : trajectory) {
    const auto alpha = minus_constant(s.omega, corrected.omega_tilde);
    const auto beta = minus_constant(s.phi, corrected.phi_tilde);
    rep.orthogonality_max = std::max(
        {rep.orthogonality_max, lattice::harmonic_part(alpha).max_abs(), lattice::harmonic_part(beta).max_abs()});
    const auto sa = lattice::forward(alpha);
    const auto sb = lattice::forward(beta);
    rep.times.push_back(s.t);
    for (int k = 0; k <= k_max; ++k)
      rep.i_k[k].push_back(lattice::gradient_energy(sa, k) + lattice::gradient_energy(sb, k));
  }
  const std::size_t n = rep.times.size();
  const std::size_t first = n / 5;
  const std::size_t last = std::min(n, first + std::max<std::size_t>(2, (6 * n + 5) / 10));
  if (n > 0) {
    rep.fit_t0 = rep.times[std::min(first, n - 1)];
    rep.fit_t1 = rep.times[last - 1];
  }
  for (int k = 0; k <= k_max; ++k) rep.rates.push_back(fit_decay(rep.times, rep.i_k[k], first, last));
  rep.fitted_delta = rep.rates[0].rate;
  rep.r_squared = rep.rates[0].r_squared;
  const auto& i0 = rep.i_k[0];
  for (std::size_t i = 6; i < n; ++i)
    if (i0[i - 1] > 0.0) rep.monotonicity_violation = std::max(rep.monotonicity_violation, (i0[i] - i0[i - 1]) / i0[i - 1]);
  return rep;
}

std::string EnergyReport::csv() const {
  std::string out = "t";
  for (std::size_t k = 0; k < i_k.size(); ++k) out += ",I" + std::to_string(k);
  out += "\n";
  char buf[64];
  for (std::size_t n = 0; n < times.size(); ++n) {
    std::snprintf(buf, sizeof buf, "%.17g", times[n]);
    out += buf;
    for (const auto& series : i_k) {
      std::snprintf(buf, sizeof buf, ",%.17g", series[n]);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------

VariationPair make_variation(const FormField<3>& dphi, const FormField<2>& domega, double norm) {
  VariationPair v;
  v.dphi = dphi;
  v.domega = domega;
  const auto five = lattice::wedge(forms6::standard_omega(), dphi) + lattice::wedge(forms6::standard_phi(norm), domega);
  const forms6::Metric6 id;
  v.h_field = lattice::map_points<5, 1>(five, [&](const Form<5>& x, std::size_t) { return forms6::hodge_star(id, x); });
  v.h_sup = lattice::sup_norm(v.h_field);
  return v;
}

VariationPair constrained_variation(const Grid& g, std::uint64_t seed, int mode_budget, double norm) {
  if (mode_budget < 0) throw ConfigError("constrained_variation: mode_budget must be non-negative");
  const Form<2> wbar = forms6::standard_omega();
  const Form<3> pbar = forms6::standard_phi(norm);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.5);

  Form<3> a;
  for (auto& x : a.c) x = normal(rng);
  FormField<3> dphi = lattice::constant_field(g, primitive_part(wbar, a));
  FormField<2> domega(g);

  if (mode_budget > 0) {
    Form<2> c;
    for (auto& x : c.c) x = normal(rng);
    const Form<1> b = invert_omega_squared(wbar, -1.0 * forms6::wedge(pbar, c));
    dphi += lattice::constant_field(g, forms6::wedge(wbar, b));
    domega += lattice::constant_field(g, c);

    const std::uint64_t sub = rng();
    const auto mu = lattice::random_band_limited<1>(g, sub, mode_budget, 0.5, true);
    const auto kappa = lattice::random_band_limited<3>(g, sub + 1, mode_budget, 0.5, true);
    domega += lattice::exterior_derivative(mu);
    dphi += lattice::exterior_derivative(lefschetz_solve(wbar, lattice::wedge(pbar, mu)));
    dphi += lattice::exterior_derivative(lefschetz_solve(wbar, lattice::exterior_derivative(kappa)));
  }
  return make_variation(dphi, domega, norm);
}

FormField<3> random_primitive_exact(const Grid& g, std::uint64_t seed, int max_mode) {
  const auto kappa = lattice::random_band_limited<3>(g, seed, max_mode, 1.0, true);
  auto out = lattice::exterior_derivative(lefschetz_solve(forms6::standard_omega(), lattice::exterior_derivative(kappa)));
  const double s = lattice::sup_norm(out);
  if (s > 0.0) out *= 1.0 / s;
  return out;
}

FormField<2> random_exact_two_form(const Grid& g, std::uint64_t seed, int max_mode) {
  auto out = lattice::exterior_derivative(lattice::random_band_limited<1>(g, seed, max_mode, 1.0, true));
  const double s = lattice::sup_norm(out);
  if (s > 0.0) out *= 1.0 / s;
  return out;
}

LinearizationReport linearization_check(const VariationPair& var, double eps, double norm) {
  const Grid& g = var.dphi.grid();
  const double scale = std::max(1.0, lattice::l2_norm(var.dphi) + lattice::l2_norm(var.domega));
  if (lattice::l2_norm(lattice::exterior_derivative(var.dphi)) > 1e-10 * scale ||
      lattice::l2_norm(lattice::exterior_derivative(var.domega)) > 1e-10 * scale)
    throw ConfigError("linearization_check: the variation is not closed");

  const TypeIIAState base = flow::standard_state(g, norm);
  TypeIIAState plus = base, minus = base;
  plus.phi.axpy(eps, var.dphi);
  plus.omega.axpy(eps, var.domega);
  minus.phi.axpy(-eps, var.dphi);
  minus.omega.axpy(-eps, var.domega);
  const auto rp = flow::rhs_reparametrized(plus);
  const auto rm = flow::rhs_reparametrized(minus);

  const double nsq = norm * norm;
  auto de = rp.dphi - rm.dphi;
  de *= 1.0 / (2.0 * eps);
  auto df = rp.domega - rm.domega;
  df *= 1.0 / (2.0 * eps);
  const auto tphi = -nsq * lattice::hodge_laplacian(var.dphi);
  const auto tomega = -nsq * lattice::hodge_laplacian(var.domega);

  LinearizationReport rep;
  rep.eps = eps;
  rep.abs_dphi = lattice::l2_norm(de - tphi);
  rep.abs_domega = lattice::l2_norm(df - tomega);
  rep.target_dphi = lattice::l2_norm(tphi);
  rep.target_domega = lattice::l2_norm(tomega);
  rep.rel_dphi = rep.target_dphi > 0.0 ? rep.abs_dphi / rep.target_dphi : rep.abs_dphi;
  rep.rel_domega = rep.target_domega > 0.0 ? rep.abs_domega / rep.target_domega : rep.abs_domega;
  rep.h_sup = var.h_sup;
  rep.constraint_satisfied = var.h_sup <= 1e-10;
  return rep;
}

// ---------------------------------------------------------------------------

CompatibleResult build_compatible_phi(const FormField<2>& omega, const CorrectedPair& background, int s_steps,
                                      int sobolev_order) {
  if (s_steps < 1) throw ConfigError("build_compatible_phi: s_steps must be positive");
  const Grid& g = omega.grid();
  const Form<2> wbar = background.omega_tilde;
  const Form<2> wdot = lattice::harmonic_part(omega) - wbar;

  Form<3> cls = background.phi_tilde;
  check_class(cls, wbar, 0.0);
  const double h = 1.0 / s_steps;
  for (int i = 0; i < s_steps; ++i) {
    const double s = i * h;
    auto at = [&](double si) { return wbar + si * wdot; };
    const Form<3> k1 = class_rate(at(s), wdot, cls);
    const Form<3> k2 = class_rate(at(s + 0.5 * h), wdot, cls + (0.5 * h) * k1);
    const Form<3> k3 = class_rate(at(s + 0.5 * h), wdot, cls + (0.5 * h) * k2);
    const Form<3> k4 = class_rate(at(s + h), wdot, cls + h * k3);
    cls = cls + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    check_class(cls, at(s + h), s + h);
  }

  CompatibleResult res;
  res.class_phi = cls;
  res.sobolev_order = sobolev_order;
  auto five = lattice::wedge(cls, omega);
  const Form<5> drift = lattice::harmonic_part(five);
  if (drift.max_abs() > 1e-9)
    throw DegenerateError("build_compatible_phi: class ODE leaves [φ]∧[ω] = " + std::to_string(drift.max_abs()));
  five = minus_constant(five, drift);
  const FormField<4> gamma = lattice::neumann_operator(five);
  const FormField<2> lambda = lefschetz_solve(omega, gamma);
  res.phi = lattice::constant_field(g, cls) - lattice::exterior_derivative(lambda);

  res.closedness = closedness(res.phi);
  res.primitivity = flow::primitivity_max(res.phi, omega);
  res.class_mismatch = (lattice::harmonic_part(res.phi) - cls).max_abs();
  TypeIIAState st{res.phi, omega, 0.0, {}};
  try {
    res.min_metric_eigenvalue = flow::measure(st, 0.0, cls, lattice::harmonic_part(omega), false).min_g_eig;
  } catch (const Error& e) {
    throw TooFarError(std::string("build_compatible_phi: result is not a Type IIA structure: ") + e.what());
  }
  const double dw = lattice::sobolev_norm(minus_constant(omega, wbar), sobolev_order);
  const double dp = lattice::sobolev_norm(minus_constant(res.phi, background.phi_tilde), sobolev_order);
  res.measured_c = dw > 0.0 ? dp / dw : 0.0;
  return res;
}

// ---------------------------------------------------------------------------

double nijenhuis_norm(const FormField<3>& phi) {
  lattice::AcStructureField j(phi.grid());
  for (std::size_t p = 0; p < phi.points(); ++p) j.set(p, forms6::almost_complex(phi.value(p)).m);
  return lattice::sup_norm(lattice::nijenhuis(j));
}

namespace {

double max_primitivity(const flow::Monitor& m) {
  double out = 0.0;
  for (const auto& r : m.rows) out = std::max(out, r.primitivity_max);
  return out;
}

double stable_dt_for(const TypeIIAState& s, const FlowConfig& cfg) {
  const auto d = flow::derive(s);
  double m = 0.0;
  for (std::size_t p = 0; p < d.normsq.points(); ++p) m = std::max(m, d.normsq.at(0, p));
  return flow::stable_dt(cfg, s.grid(), m);
}

double gauge_discrepancy(const TypeIIAState& initial, const StabilityConfig& cfg) {
  FlowConfig fc = cfg.flow;
  fc.t_max = cfg.gauge_t;
  fc.stationary_tol = 0.0;
  fc.monitor_stride = 1;
  fc.keep_trajectory = true;
  fc.curvature_monitor = false;
  fc.fixed_dt = stable_dt_for(initial, fc);
  fc.reparametrized = true;
  fc.keep_vector_field = true;
  const auto rep = flow::advance(initial, fc);
  if (rep.status == flow::Status::Degenerate) throw DegenerateError("gauge run: " + rep.message);
  fc.reparametrized = false;
  fc.keep_vector_field = false;
  const auto direct = flow::advance(initial, fc);
  if (direct.status == flow::Status::Degenerate) throw DegenerateError("direct run: " + direct.message);

  const auto gauge = flow::gauge_reconstruct(rep.trajectory, rep.vector_history);
  double worst = 0.0;
  std::size_t j = 0;
  for (const auto& s : gauge.pulled_back) {
    while (j < direct.trajectory.size() && direct.trajectory[j].t < s.t - 1e-12) ++j;
    if (j == direct.trajectory.size()) break;
    if (std::abs(direct.trajectory[j].t - s.t) > 1e-12) continue;
    worst = std::max(worst, lattice::sup_norm(s.phi - direct.trajectory[j].phi));
  }
  return worst;
}

}  // namespace

std::string StabilityVerdict::json() const {
  nlohmann::ordered_json j;
  j["stage"] = stage;
  j["status"] = status;
  j["message"] = message;
  j["converged"] = converged;
  j["final_rhs_l2"] = final_rhs;
  j["nijenhuis_sup"] = nijenhuis;
  j["fitted_delta"] = fitted_delta;
  j["r_squared"] = r_squared;
  j["measured_c"] = measured_c;
  j["gauge_discrepancy"] = gauge_discrepancy;
  j["primitivity_drift"] = primitivity_drift;
  j["steps"] = steps;
  j["final_time"] = final_time;
  return j.dump(2) + "\n";
}

StabilityVerdict end_to_end_stability(const FormField<2>& omega, const StabilityConfig& cfg) {
  StabilityVerdict v;
  CorrectedPair flat;
  flat.phi_tilde = forms6::standard_phi();
  flat.omega_tilde = forms6::standard_omega();

  auto fail = [&](const char* stage, const char* status, const std::string& msg) {
    v.stage = stage;
    v.status = status;
    v.message = msg;
    v.converged = false;
    return v;
  };

  CompatibleResult compat;
  try {
    compat = build_compatible_phi(omega, flat);
  } catch (const TooFarError& e) {
    return fail("compatible", "too_far", e.what());
  } catch (const Error& e) {
    return fail("compatible", "degenerate", e.what());
  }
  v.measured_c = compat.measured_c;

  CorrectedPair corrected;
  try {
    corrected = harmonic_correction(compat.phi, omega);
  } catch (const Error& e) {
    return fail("correction", "too_far", e.what());
  }

  const TypeIIAState initial{compat.phi, omega, 0.0, {}};
  FlowConfig fc = cfg.flow;
  fc.reparametrized = true;
  fc.stationary_tol = cfg.target_rhs;
  fc.keep_trajectory = true;
  fc.keep_vector_field = false;
  const auto run = flow::advance(initial, fc);
  v.monitor = run.monitor;
  v.steps = run.steps;
  v.final_time = run.final_state.time;
  v.final_rhs = run.final_rhs_l2;
  v.primitivity_drift = max_primitivity(run.monitor);
  v.energy = energies(run.trajectory, corrected, cfg.k_max);
  v.fitted_delta = v.energy.fitted_delta;
  v.r_squared = v.energy.r_squared;
  if (run.status == flow::Status::Degenerate) return fail("flow", "degenerate", run.message);
  try {
    v.nijenhuis = nijenhuis_norm(run.final_state.phi);
  } catch (const Error& e) {
    return fail("nijenhuis", "degenerate", e.what());
  }
  if (run.status != flow::Status::Converged)
    return fail("flow", "not_converged",
                std::string("flow stopped with status ") + flow::to_string(run.status) + " before reaching the target");

  if (cfg.gauge_t > 0.0) {
    try {
      v.gauge_discrepancy = gauge_discrepancy(initial, cfg);
    } catch (const Error& e) {
      return fail("gauge", "degenerate", e.what());
    }
  }
  v.converged = v.nijenhuis <= cfg.nijenhuis_tol && (cfg.gauge_t <= 0.0 || v.gauge_discrepancy <= cfg.gauge_tol);
  if (!v.converged) {
    v.status = "not_converged";
    v.message = "limit fails the Nijenhuis or gauge tolerance";
  }
  return v;
}

}  // namespace iia::stability
