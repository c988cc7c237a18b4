#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "iia/errors.hpp"
#include "iia/stability.hpp"

using namespace iia;
using namespace iia::stability;
using namespace iia::lattice;
using forms6::ebasis;
using forms6::Form;

namespace {

Grid plane(int n = 16) {
  Grid g;
  g.n = {n, n, 1, 1, 1, 1};
  return g;
}

CorrectedPair flat_pair() {
  CorrectedPair c;
  c.phi_tilde = forms6::standard_phi();
  c.omega_tilde = forms6::standard_omega();
  return c;
}

FormField<1> potential(const Grid& g) {
  FormField<1> mu(g);
  for (std::size_t p = 0; p < g.points(); ++p) {
    const auto i = g.unravel(p);
    const double x1 = g.coordinate(0, i[0]), x2 = g.coordinate(1, i[1]);
    mu.set(p, std::sin(x2) * ebasis<1>({1}) + std::cos(x1 + x2) * ebasis<1>({4}) + std::sin(x1) * ebasis<1>({6}));
  }
  return mu;
}

}  // namespace

TEST_CASE("harmonic correction") {
  const Grid g = plane(8);
  const auto flat = flow::standard_state(g);
  const auto c = harmonic_correction(flat.phi, flat.omega);
  CHECK(c.phi_tilde == forms6::standard_phi());
  CHECK(c.omega_tilde == forms6::standard_omega());

  // φ̄ + dλ projects back to φ̄.
  FormField<2> lam(g);
  for (std::size_t p = 0; p < g.points(); ++p)
    lam.set(p, std::cos(g.coordinate(0, g.unravel(p)[0])) * ebasis<2>({3, 5}));
  const auto c2 = harmonic_correction(flat.phi + exterior_derivative(lam), flat.omega);
  CHECK((c2.phi_tilde - forms6::standard_phi()).max_abs() < 1e-15);

  // A primitive harmonic shift survives and stays primitive.
  const Form<3> h3 = 0.1 * (ebasis<3>({1, 3, 6}) + ebasis<3>({1, 4, 5}));
  const auto c3 = harmonic_correction(flat.phi + constant_field(g, h3) + exterior_derivative(lam), flat.omega);
  CHECK((c3.phi_tilde - forms6::standard_phi() - h3).max_abs() < 1e-15);
  CHECK(c3.wedge_residual < 1e-12);

  CHECK_THROWS_AS(harmonic_correction(constant_field(g, ebasis<3>({1, 2, 3})), flat.omega), TooFarError);
}

TEST_CASE("decay fit") {
  std::vector<double> t, y;
  for (int i = 0; i < 50; ++i) {
    t.push_back(0.1 * i);
    y.push_back(3.0 * std::exp(-2.0 * t.back()));
  }
  const auto f = fit_decay(t, y, 10, 40);
  CHECK(f.rate == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(f.r_squared == doctest::Approx(1.0));
  y[20] = 0.0;
  CHECK(fit_decay(t, y, 10, 40).rate == 0.0);
}

TEST_CASE("energies") {
  const Grid g = plane();
  const auto flat = flow::standard_state(g);
  std::vector<flow::Sample> still{{0.0, flat.phi, flat.omega}, {1.0, flat.phi, flat.omega}};
  const auto zero = energies(still, flat_pair(), 3);
  for (const auto& series : zero.i_k)
    for (double v : series) CHECK(v == 0.0);

  // Single mode ε sin(x₁)e¹³⁵: I₀ = ε²·vol/2 and I_k equals I₀ for |k| = 1.
  const double eps = 1e-3;
  auto s = flat;
  for (std::size_t p = 0; p < g.points(); ++p)
    s.phi.set(p, s.phi.value(p) - eps * std::sin(g.coordinate(0, g.unravel(p)[0])) * ebasis<3>({1, 3, 5}));
  const auto one = energies({{0.0, s.phi, s.omega}}, flat_pair(), 2);
  CHECK(one.i_k[0][0] == doctest::Approx(eps * eps * g.volume() / 2).epsilon(1e-12));
  CHECK(one.i_k[1][0] == doctest::Approx(one.i_k[0][0]).epsilon(1e-12));
  CHECK(one.orthogonality_max < 1e-15);

  flow::FlowConfig cfg;
  cfg.t_max = 3.0;
  cfg.monitor_stride = 4;
  const auto run = flow::advance(s, cfg);
  const auto rep = energies(run.trajectory, harmonic_correction(s.phi, s.omega), 2);
  CHECK(rep.fitted_delta == doctest::Approx(2.0).epsilon(0.1));
  CHECK(rep.r_squared >= 0.99);
  CHECK(rep.orthogonality_max <= 1e-10);
  CHECK(rep.monotonicity_violation == 0.0);
  CHECK(rep.csv().rfind("t,I0,I1,I2\n", 0) == 0);
  CHECK_THROWS_AS(energies(run.trajectory, flat_pair(), 11), ConfigError);
}

TEST_CASE("constrained variations") {
  Grid g;
  g.n = {8, 8, 8, 1, 1, 1};
  const auto v0 = constrained_variation(g, 4, 0);
  CHECK(sup_norm(v0.domega) == 0.0);
  CHECK(sup_norm(hodge_laplacian(v0.dphi)) < 1e-12);
  CHECK(v0.h_sup <= 1e-10);
  CHECK(flow::primitivity_max(v0.dphi, constant_field(g, forms6::standard_omega())) < 1e-14);

  const auto v = constrained_variation(g, 7, 2);
  CHECK(v.h_sup <= 1e-10);
  CHECK(harmonic_part(v.domega).max_abs() > 0.0);
  CHECK(l2_norm(exterior_derivative(v.dphi)) <= 1e-10 * l2_norm(v.dphi));
  CHECK(l2_norm(exterior_derivative(v.domega)) <= 1e-10 * l2_norm(v.domega));

  const auto again = constrained_variation(g, 7, 2);
  CHECK(again.dphi.raw() == v.dphi.raw());
  CHECK(again.domega.raw() == v.domega.raw());
  CHECK(constrained_variation(g, 8, 2).dphi.raw() != v.dphi.raw());

  // Scaled background.
  CHECK(constrained_variation(g, 7, 1, 1.5).h_sup <= 1e-10);
}

TEST_CASE("linearization check") {
  Grid g;
  g.n = {8, 8, 8, 1, 1, 1};
  const auto harmonic = linearization_check(constrained_variation(g, 1, 0), 1e-4);
  CHECK(harmonic.abs_dphi <= 1e-10);
  CHECK(harmonic.abs_domega <= 1e-10);
  CHECK(harmonic.target_dphi <= 1e-10);

  const auto var = constrained_variation(g, 2, 2);
  const auto a = linearization_check(var, 1e-3);
  const auto b = linearization_check(var, 5e-4);
  CHECK(b.rel_dphi <= 1e-4);
  CHECK(b.rel_domega <= 1e-4);
  const double ratio = (a.abs_dphi + a.abs_domega) / (b.abs_dphi + b.abs_domega);
  CHECK(ratio >= 3.5);
  CHECK(ratio <= 4.5);
  CHECK(a.constraint_satisfied);

  const auto sc = linearization_check(constrained_variation(g, 3, 1, 1.3), 1e-4, 1.3);
  CHECK(sc.rel_dphi <= 1e-4);
  CHECK(sc.rel_domega <= 1e-4);

  FormField<3> open(g);
  for (std::size_t p = 0; p < g.points(); ++p)
    open.set(p, std::sin(g.coordinate(1, g.unravel(p)[1])) * ebasis<3>({1, 3, 5}));
  CHECK_THROWS_AS(linearization_check(make_variation(open, FormField<2>(g)), 1e-4), ConfigError);
}

TEST_CASE("compatible phi") {
  const Grid g = plane();
  const auto flat = flat_pair();
  const auto same = build_compatible_phi(constant_field(g, forms6::standard_omega()), flat);
  CHECK(sup_norm(same.phi - constant_field(g, forms6::standard_phi())) == 0.0);

  const auto exact_w = constant_field(g, forms6::standard_omega()) + 1e-2 * exterior_derivative(potential(g));
  const auto ex = build_compatible_phi(exact_w, flat);
  CHECK((harmonic_part(ex.phi) - forms6::standard_phi()).max_abs() < 1e-12);
  CHECK(ex.primitivity <= 1e-10);
  CHECK(ex.closedness <= 1e-11);

  // (1+ε)e¹² + e³⁴ + e⁵⁶ is compatible with φ_std itself: its metric is
  // diag(1+ε, 1+ε, 1, 1, 1, 1).
  const double eps = 1e-2;
  const Form<2> w1 = (1 + eps) * ebasis<2>({1, 2}) + ebasis<2>({3, 4}) + ebasis<2>({5, 6});
  const auto rescaled = build_compatible_phi(constant_field(g, w1), flat);
  CHECK(sup_norm(rescaled.phi - constant_field(g, forms6::standard_phi())) <= 1e-6);
  forms6::Mat6 expect = forms6::Mat6::Identity();
  expect(0, 0) = expect(1, 1) = 1 + eps;
  CHECK((forms6::metric(rescaled.phi.value(0), w1).m - expect).cwiseAbs().maxCoeff() <= 1e-12);

  const auto mixed_w = exact_w + constant_field(g, 1e-2 * (ebasis<2>({1, 3}) + 0.5 * ebasis<2>({2, 5})));
  const auto mixed = build_compatible_phi(mixed_w, flat, 64);
  CHECK(mixed.closedness <= 1e-11);
  CHECK(mixed.primitivity <= 1e-10);
  CHECK(mixed.class_mismatch <= 1e-9);
  CHECK(mixed.min_metric_eigenvalue > 0.5);
  CHECK(mixed.measured_c > 0.0);
  CHECK(mixed.measured_c < 10.0);

  const auto far_w = constant_field(g, forms6::standard_omega() - 1.5 * ebasis<2>({1, 2}));
  CHECK_THROWS_AS(build_compatible_phi(far_w, flat), TooFarError);
}

TEST_CASE("end to end") {
  const Grid g = plane();
  StabilityConfig cfg;
  cfg.flow.t_max = 5.0;
  const auto trivial = end_to_end_stability(constant_field(g, forms6::standard_omega()), cfg);
  CHECK(trivial.converged);
  CHECK(trivial.steps == 0);
  CHECK(trivial.final_rhs == 0.0);

  cfg.gauge_t = 0.0;
  const auto big = end_to_end_stability(
      constant_field(g, forms6::standard_omega()) + 0.5 * exterior_derivative(potential(g)), cfg);
  CHECK(!big.converged);
  CHECK(big.status != "converged");
  CHECK(big.json().find("\"converged\": false") != std::string::npos);
}

TEST_CASE("nijenhuis norm of flat structures") {
  const Grid g = plane(8);
  CHECK(nijenhuis_norm(flow::standard_state(g).phi) < 1e-14);
}
