#pragma once

// Experiments around the flat Type IIA structure: harmonic correction, decay
// energies, the linearization check, and the construction of a compatible φ
// for a perturbed symplectic form.

#include <cstdint>
#include <string>
#include <vector>

#include "iia/flow.hpp"

namespace iia::stability {

using flow::FlowConfig;
using flow::TypeIIAState;
using lattice::FormField;
using lattice::Grid;

struct CorrectedPair {
  forms6::Form<3> phi_tilde;
  forms6::Form<2> omega_tilde;
  /// |𝓗φ₀ ∧ 𝓗ω₀|, zero for primitive input.
  double wedge_residual = 0.0;
  std::vector<std::string> provenance;
};

/// Zero-mode projection (𝓗φ₀, 𝓗ω₀). Throws TooFarError if the projected pair
/// is not a positive primitive structure.
CorrectedPair harmonic_correction(const FormField<3>& phi0, const FormField<2>& omega0);

/// The pair as a constant state on g.
TypeIIAState corrected_state(const Grid& g, const CorrectedPair& c);

struct RateFit {
  double rate = 0.0;
  double r_squared = 0.0;
};

/// Least-squares fit of log y = a − rate·t over samples [first, last).
RateFit fit_decay(const std::vector<double>& t, const std::vector<double>& y, std::size_t first, std::size_t last);

struct EnergyReport {
  std::vector<double> times;
  /// i_k[k][n] = I_k at times[n].
  std::vector<std::vector<double>> i_k;
  /// Decay rate of I₀.
  double fitted_delta = 0.0;
  double r_squared = 0.0;
  /// Fitted rate of every I_k over the same window.
  std::vector<RateFit> rates;
  double fit_t0 = 0.0;
  double fit_t1 = 0.0;
  /// Largest |𝓗α|, |𝓗β| over the samples.
  double orthogonality_max = 0.0;
  /// Largest relative increase of I₀ between consecutive samples after the
  /// first five.
  double monotonicity_violation = 0.0;

  std::string csv() const;
};

/// I_k(t) = ∫|∇^kα|² + |∇^kβ|² with α = ω(t) − ω̃, β = φ(t) − φ̃. The first 20%
/// of samples are discarded and the next 60% are fitted.
EnergyReport energies(const std::vector<flow::Sample>& trajectory, const CorrectedPair& corrected, int k_max);

struct VariationPair {
  FormField<3> dphi;
  FormField<2> domega;
  /// ★(δφ∧ω̄ + φ̄∧δω) for ḡ = identity.
  FormField<1> h_field;
  double h_sup = 0.0;
};

/// A closed pair satisfying δφ∧ω̄ + φ̄∧δω = 0 at the standard background:
///   δω = c + dμ,
///   δφ = ω̄∧b + p + dL⁻¹(φ̄∧μ) + dL⁻¹(dκ),
/// with c a constant 2-form, ω̄²∧b = −φ̄∧c, p constant primitive, and μ, κ
/// band-limited with |m| ≤ mode_budget. mode_budget = 0 gives δω = 0 and
/// δφ = p.
VariationPair constrained_variation(const Grid& g, std::uint64_t seed, int mode_budget, double norm = 1.0);

/// Recomputes h_field and h_sup for an arbitrary pair against the standard
/// background with |φ̄| = norm.
VariationPair make_variation(const FormField<3>& dphi, const FormField<2>& domega, double norm = 1.0);

/// dL⁻¹(dκ) for band-limited κ, scaled to sup norm 1: exact and primitive
/// with respect to the standard ω̄.
FormField<3> random_primitive_exact(const Grid& g, std::uint64_t seed, int max_mode);

/// dμ for band-limited μ, scaled to sup norm 1.
FormField<2> random_exact_two_form(const Grid& g, std::uint64_t seed, int max_mode);

struct LinearizationReport {
  double eps = 0.0;
  /// ‖DE − T_φ‖ and ‖DF − T_ω‖ with T = −|φ̄|²□(δφ, δω).
  double abs_dphi = 0.0;
  double abs_domega = 0.0;
  double target_dphi = 0.0;
  double target_domega = 0.0;
  /// abs / target, or abs when the target vanishes.
  double rel_dphi = 0.0;
  double rel_domega = 0.0;
  double h_sup = 0.0;
  bool constraint_satisfied = true;
};

/// Central differences of the reparametrized RHS at the standard background
/// (scaled to |φ̄| = norm) in the direction εvar. Rejects variations that are
/// not closed with ConfigError.
LinearizationReport linearization_check(const VariationPair& var, double eps, double norm = 1.0);

struct CompatibleResult {
  FormField<3> phi;
  /// Class ODE solution [φ₁].
  forms6::Form<3> class_phi;
  double closedness = 0.0;
  double primitivity = 0.0;
  double class_mismatch = 0.0;
  double min_metric_eigenvalue = 0.0;
  /// |φ₁ − φ̄|_{W^{k,2}} / |ω − ω̄|_{W^{k,2}}.
  double measured_c = 0.0;
  int sobolev_order = 2;
};

/// Cohomology ODE d[φ_s]/ds = −[ω_s]∧b_s, [ω_s]²∧b_s = [ω̇]∧[φ_s] along
/// ω_s = ω̄ + s(ω − ω̄) by RK4, then primitivity repair at s = 1:
/// γ = neumann(𝓗[φ₁]∧ω), λ = L_ω⁻¹γ pointwise, φ₁ = 𝓗[φ₁] − dλ.
/// Throws TooFarError when positivity fails on the path or in the result.
CompatibleResult build_compatible_phi(const FormField<2>& omega, const CorrectedPair& background, int s_steps = 64,
                                      int sobolev_order = 2);

struct StabilityConfig {
  FlowConfig flow;
  /// Stop the reparametrized run once the RHS falls below this.
  double target_rhs = 1e-8;
  double nijenhuis_tol = 1e-6;
  double gauge_tol = 1e-4;
  /// Length of the gauge cross-check against a direct primary run (0 skips).
  double gauge_t = 1.0;
  int k_max = 2;
};

struct StabilityVerdict {
  std::string stage = "done";
  std::string status = "converged";
  std::string message;
  bool converged = false;
  double final_rhs = 0.0;
  double nijenhuis = 0.0;
  double fitted_delta = 0.0;
  double r_squared = 0.0;
  double measured_c = 0.0;
  double gauge_discrepancy = 0.0;
  double primitivity_drift = 0.0;
  long steps = 0;
  double final_time = 0.0;
  flow::Monitor monitor;
  EnergyReport energy;

  std::string json() const;
};

/// Builds φ for ω, corrects, flows to stationarity and cross-checks the gauge.
/// Stage failures are reported in the verdict rather than thrown.
StabilityVerdict end_to_end_stability(const FormField<2>& omega, const StabilityConfig& cfg);

/// sup over points and components of the Nijenhuis tensor of J_φ.
double nijenhuis_norm(const FormField<3>& phi);

}  // namespace iia::stability
