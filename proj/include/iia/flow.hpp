#pragma once

// Type IIA flow ∂φ = dΛ_ω d(|φ|²φ̂) with ω fixed, and its DeTurck
// reparametrization ∂φ = dΛd(|φ|²φ̂) + dι_Vφ, ∂ω = dι_Vω, integrated by
// explicit RK4 on spectral fields.

#include <optional>
#include <string>
#include <vector>

#include "iia/forms6.hpp"
#include "iia/lattice.hpp"

namespace iia::flow {

using lattice::FormField;
using lattice::Grid;
using lattice::VectorField;

struct TypeIIAState {
  FormField<3> phi;
  FormField<2> omega;
  double time = 0.0;
  /// Constant reference metric ḡ. Only ḡ = identity is supported by the
  /// spectral operators.
  forms6::Metric6 reference;

  const Grid& grid() const { return phi.grid(); }
};

TypeIIAState constant_state(const Grid& g, const forms6::Form<3>& phi, const forms6::Form<2>& omega);
TypeIIAState standard_state(const Grid& g, double norm = 1.0);

/// Pointwise quantities derived from (φ, ω).
struct Derived {
  FormField<3> phihat;
  lattice::Field<1> normsq;
  lattice::MetricField metric;
  /// ω^{ab} packed as an antisymmetric matrix (the 2-form with components ω^{ab}).
  FormField<2> omega_inv;
};

/// Throws DegenerateError naming the grid point and time where positivity or
/// orientation fails.
Derived derive(const TypeIIAState& s);

/// dΛ_ω d(|φ|²φ̂).
FormField<3> rhs_primary(const TypeIIAState& s);
FormField<3> rhs_primary(const TypeIIAState& s, const Derived& d);

/// V^k = |φ|² g^{pq}Γ^k_pq − g^{kl}∂_l|φ|² (Γ̄ = 0 for the flat reference).
VectorField deturck_vector(const TypeIIAState& s);
VectorField deturck_vector(const TypeIIAState& s, const Derived& d);

struct ReparametrizedRhs {
  FormField<3> dphi;
  FormField<2> domega;
  VectorField v;
};

ReparametrizedRhs rhs_reparametrized(const TypeIIAState& s);
/// Uses a caller-supplied V instead of the DeTurck field.
ReparametrizedRhs rhs_with_vector(const TypeIIAState& s, const VectorField& v);

struct SolitonResidual {
  double r1 = 0.0;
  double r2 = 0.0;
};

SolitonResidual soliton_residual(const TypeIIAState& s, const VectorField& v);

// ---------------------------------------------------------------------------
// Time integration.

struct FlowConfig {
  std::string scheme = "rk4";
  double dt_safety = 0.9;
  double t_max = 1.0;
  int monitor_stride = 10;
  bool reparametrized = true;
  /// Stop once the RHS L² norm falls to this value (0 disables).
  double stationary_tol = 0.0;
  long max_steps = 1000000;
  /// Overrides the parabolic bound when positive.
  double fixed_dt = 0.0;
  bool keep_trajectory = true;
  /// Keep V at every step start (needed by gauge_reconstruct).
  bool keep_vector_field = false;
  /// Compute the second-derivative curvature proxy at monitor samples.
  bool curvature_monitor = true;
};

/// RK4's real-axis stability limit.
inline constexpr double kRk4RealLimit = 2.785;

/// dt = dt_safety · 2.785 / (max_x |φ|² · max_k |k|²).
double stable_dt(const FlowConfig& cfg, const Grid& g, double max_normsq);

struct MonitorRow {
  double t = 0.0;
  double rhs_l2 = 0.0;
  double dphi_l2 = 0.0;
  double primitivity_max = 0.0;
  double sup_phi = 0.0;
  double curv_proxy = 0.0;
  double min_g_eig = 0.0;
  double h_drift = 0.0;
};

struct Monitor {
  std::vector<MonitorRow> rows;
  static const char* csv_header();
  std::string csv() const;
};

struct Sample {
  double t = 0.0;
  FormField<3> phi;
  FormField<2> omega;
};

struct VectorSample {
  double t = 0.0;
  VectorField v;
};

enum class Status { Converged, ReachedTMax, Degenerate, StepUnderflow, StepLimit };

const char* to_string(Status s);

struct AdvanceResult {
  Status status = Status::ReachedTMax;
  std::string message;
  TypeIIAState final_state;
  Monitor monitor;
  std::vector<Sample> trajectory;
  std::vector<VectorSample> vector_history;
  long steps = 0;
  double final_rhs_l2 = 0.0;
};

AdvanceResult advance(const TypeIIAState& initial, const FlowConfig& cfg);

/// One monitor row for a state, with harmonic parts compared to `h_phi0`, `h_omega0`.
MonitorRow measure(const TypeIIAState& s, double rhs_l2, const forms6::Form<3>& h_phi0,
                   const forms6::Form<2>& h_omega0, bool curvature);

/// Sup over points and index tuples of |∂_a∂_b g_ij|.
double curvature_proxy(const lattice::MetricField& g);

/// Max over points of |φ∧ω| (largest 5-form component).
double primitivity_max(const FormField<3>& phi, const FormField<2>& omega);

// ---------------------------------------------------------------------------
// Gauge reconstruction.

struct GaugeResult {
  /// f_t*φ(t) at every trajectory sample time.
  std::vector<Sample> pulled_back;
  /// Final displacement u = f_T(x) − x.
  VectorField displacement;
};

/// Integrates ∂_t f_t = −V∘f_t from f_0 = id with RK4 over the stored step
/// times, interpolating V multilinearly in space and linearly in time, and
/// pulls back the trajectory. Throws StepUnderflowError when a particle moves
/// more than one grid spacing in a step.
GaugeResult gauge_reconstruct(const std::vector<Sample>& trajectory, const std::vector<VectorSample>& vectors);

/// Pullback of a 3-form (or 2-form) field by x ↦ x + u(x), evaluating the
/// field by exact trigonometric interpolation.
template <int K>
FormField<K> pullback_by_displacement(const FormField<K>& f, const VectorField& u);

/// Multilinear periodic interpolation of a vector field.
forms6::Vec6 interpolate(const VectorField& v, const std::array<double, 6>& x);

}  // namespace iia::flow
