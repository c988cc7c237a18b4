#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "iia/errors.hpp"
#include "iia/flow.hpp"

using namespace iia;
using namespace iia::flow;
using namespace iia::lattice;
using forms6::ebasis;
using forms6::Form;

namespace {

Grid plane(int n = 16) {
  Grid g;
  g.n = {n, n, 1, 1, 1, 1};
  return g;
}

// φ̄ − ε sin(x₁) e¹³⁵ = φ̄ + d(ε cos(x₁) e³⁵): closed and primitive.
TypeIIAState single_mode(const Grid& g, double eps) {
  auto s = standard_state(g);
  for (std::size_t p = 0; p < g.points(); ++p) {
    const double x = g.coordinate(0, g.unravel(p)[0]);
    s.phi.set(p, s.phi.value(p) - eps * std::sin(x) * ebasis<3>({1, 3, 5}));
  }
  return s;
}

}  // namespace

TEST_CASE("flat state is stationary") {
  Grid g;
  g.n = {8, 8, 8, 1, 1, 1};
  const auto s = standard_state(g);
  CHECK(l2_norm(rhs_primary(s)) <= 1e-13);
  CHECK(sup_norm(deturck_vector(s)) <= 1e-13);
  const auto r = rhs_reparametrized(s);
  CHECK(l2_norm(r.dphi) <= 1e-13);
  CHECK(l2_norm(r.domega) <= 1e-13);

  // Constant linear symplectomorphisms map flat states to flat states.
  const auto ps = forms6::sp6_randomize(forms6::standard_structure(), 3);
  const auto t = constant_state(g, ps.phi, ps.omega);
  CHECK(l2_norm(rhs_primary(t)) <= 1e-13);
  CHECK(sup_norm(deturck_vector(t)) <= 1e-13);
}

TEST_CASE("harmonic shifts leave the state stationary") {
  const Grid g = plane(8);
  // Constant primitive 3-form added to φ̄: still a flat structure.
  const Form<3> h = 0.05 * (ebasis<3>({1, 3, 6}) + ebasis<3>({1, 4, 5}));
  auto s = constant_state(g, forms6::standard_phi() + h, forms6::standard_omega());
  CHECK(l2_norm(rhs_primary(s)) <= 1e-13);
  CHECK(sup_norm(deturck_vector(s)) <= 1e-13);
}

TEST_CASE("right-hand sides are exact") {
  const Grid g = plane();
  const auto s = single_mode(g, 1e-2);
  const auto e = rhs_primary(s);
  CHECK(l2_norm(e) > 1e-6);
  CHECK(l2_norm(exterior_derivative(e)) <= 1e-12);
  const auto r = rhs_reparametrized(s);
  CHECK(l2_norm(exterior_derivative(r.dphi)) <= 1e-12);
  CHECK(l2_norm(exterior_derivative(r.domega)) <= 1e-12);
  CHECK(harmonic_part(r.dphi).max_abs() <= 1e-12);
  CHECK(harmonic_part(r.domega).max_abs() <= 1e-12);
}

TEST_CASE("linearization of the reparametrized flow") {
  const Grid g = plane();
  FormField<3> dphi(g);
  for (std::size_t p = 0; p < g.points(); ++p) {
    const double x = g.coordinate(0, g.unravel(p)[0]);
    dphi.set(p, -std::sin(x) * ebasis<3>({1, 3, 5}));
  }
  const double eps = 1e-4;
  auto plus = standard_state(g), minus = standard_state(g);
  plus.phi.axpy(eps, dphi);
  minus.phi.axpy(-eps, dphi);
  auto de = rhs_reparametrized(plus).dphi - rhs_reparametrized(minus).dphi;
  de *= 1.0 / (2 * eps);
  CHECK(l2_norm(de + hodge_laplacian(dphi)) / l2_norm(dphi) < 1e-6);

  // Harmonic variations are not moved at first order.
  const Form<3> h = ebasis<3>({1, 3, 6}) + ebasis<3>({1, 4, 5});
  CHECK(l2_norm(rhs_primary(constant_state(g, forms6::standard_phi() + 1e-3 * h, forms6::standard_omega()))) < 1e-13);
}

TEST_CASE("deturck vector on a conformal test field") {
  // φ = f·φ̄, ω = f·ω̄ with f = 1 + ε sin x₁ gives |φ|² = 1/f and g = f·id, so
  // g^{pq}Γ^k_pq = −2f⁻²∂_k f and V^k = −2f'/f³ + f'/f³ = −f'/f³ along x₁.
  const Grid g = plane();
  const double eps = 1e-3;
  TypeIIAState s = standard_state(g);
  for (std::size_t p = 0; p < g.points(); ++p) {
    const double f = 1.0 + eps * std::sin(g.coordinate(0, g.unravel(p)[0]));
    s.phi.set(p, f * forms6::standard_phi());
    s.omega.set(p, f * forms6::standard_omega());
  }
  const auto d = derive(s);
  const double f5 = 1.0 + eps * std::sin(g.coordinate(0, g.unravel(5)[0]));
  CHECK(d.normsq.at(0, 5) == doctest::Approx(1.0 / f5).epsilon(1e-13));
  const auto v = deturck_vector(s, d);
  double err = 0.0;
  for (std::size_t p = 0; p < g.points(); ++p) {
    const double x = g.coordinate(0, g.unravel(p)[0]);
    const double f = 1.0 + eps * std::sin(x), df = eps * std::cos(x);
    err = std::max(err, std::abs(v.at(0, p) + df / (f * f * f)));
    for (int a = 1; a < 6; ++a) err = std::max(err, std::abs(v.at(a, p)));
  }
  // Dealiasing trims the O(ε³) tail of the products.
  CHECK(err < 1e-8);
}

TEST_CASE("soliton residual") {
  const Grid g = plane(8);
  const auto s = standard_state(g);
  VectorField zero(g);
  const auto r0 = soliton_residual(s, zero);
  CHECK(r0.r1 <= 1e-13);
  CHECK(r0.r2 <= 1e-13);
  VectorField c(g);
  for (std::size_t p = 0; p < g.points(); ++p) c.set(p, forms6::Vec6::Constant(0.3));
  const auto rc = soliton_residual(s, c);
  CHECK(rc.r1 <= 1e-13);
  CHECK(rc.r2 <= 1e-13);
  VectorField w(g);
  for (std::size_t p = 0; p < g.points(); ++p) w.at(0, p) = std::sin(g.coordinate(0, g.unravel(p)[0]));
  CHECK(soliton_residual(s, w).r2 > 1e-3);
}

TEST_CASE("degenerate states are located") {
  const Grid g = plane(8);
  auto s = standard_state(g);
  s.phi.set(17, ebasis<3>({1, 2, 3}));
  s.time = 0.25;
  try {
    derive(s);
    FAIL("expected DegenerateError");
  } catch (const DegenerateError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("t=0.25") != std::string::npos);
  }
}

TEST_CASE("advance: flat start stays fixed") {
  Grid g;
  g.n = {8, 8, 1, 1, 1, 1};
  FlowConfig cfg;
  cfg.t_max = 0.5;
  cfg.monitor_stride = 5;
  const auto r = advance(standard_state(g), cfg);
  CHECK(r.status == Status::ReachedTMax);
  CHECK(r.final_state.time == 0.5);
  for (const auto& row : r.monitor.rows) CHECK(row.rhs_l2 <= 1e-12);
  CHECK(sup_norm(r.final_state.phi - standard_state(g).phi) == 0.0);
  CHECK_THROWS_AS(advance(standard_state(g), FlowConfig{.scheme = "euler"}), ConfigError);
}

TEST_CASE("advance: single mode decays, invariants hold") {
  const Grid g = plane();
  FlowConfig cfg;
  cfg.t_max = 2.0;
  cfg.monitor_stride = 10;
  const auto s0 = single_mode(g, 1e-3);
  const auto r = advance(s0, cfg);
  REQUIRE(r.status == Status::ReachedTMax);
  const auto& rows = r.monitor.rows;
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].rhs_l2 <= rows[i - 1].rhs_l2);
  // Linear decay e^{−t} of the single mode.
  CHECK(rows.back().rhs_l2 / rows.front().rhs_l2 == doctest::Approx(std::exp(-rows.back().t)).epsilon(1e-3));
  for (const auto& row : rows) {
    CHECK(row.h_drift <= 1e-12);
    CHECK(row.dphi_l2 <= 1e-10);
    CHECK(row.primitivity_max <= 1e-12);
  }
  CHECK(sup_norm(r.final_state.omega - s0.omega) > 0.0);

  FlowConfig primary = cfg;
  primary.reparametrized = false;
  const auto rp = advance(s0, primary);
  CHECK(sup_norm(rp.final_state.omega - s0.omega) == 0.0);
}

TEST_CASE("advance: huge perturbation is reported") {
  const Grid g = plane(8);
  FlowConfig cfg;
  cfg.t_max = 1.0;
  const auto r = advance(single_mode(g, 0.8), cfg);
  CHECK(r.status != Status::Converged);
  const auto r2 = advance(single_mode(g, 3.0), cfg);
  CHECK(r2.status == Status::Degenerate);
  CHECK(!r2.message.empty());
}

TEST_CASE("monitor csv") {
  Monitor m;
  m.rows.push_back({0.5, 1, 2, 3, 4, 5, 6, 7});
  const std::string csv = m.csv();
  CHECK(csv.rfind("t,rhs_l2,dphi_l2,primitivity_max,sup_phi,curv_proxy,min_g_eig,h_drift\n", 0) == 0);
  CHECK(csv.find("0.5,1,2,3,4,5,6,7") != std::string::npos);
}

TEST_CASE("gauge reconstruction") {
  const Grid g = plane();
  const auto s = single_mode(g, 1e-2);

  std::vector<Sample> traj{{0.0, s.phi, s.omega}, {1.0, s.phi, s.omega}};
  std::vector<VectorSample> zero{{0.0, VectorField(g)}, {1.0, VectorField(g)}};
  const auto id = gauge_reconstruct(traj, zero);
  REQUIRE(id.pulled_back.size() == 2);
  CHECK(id.pulled_back[1].phi.raw() == s.phi.raw());

  // Constant V translates every particle by −∫V.
  const double c = 0.1;
  std::vector<VectorSample> steady;
  for (int i = 0; i <= 10; ++i) {
    VectorField v(g);
    for (std::size_t p = 0; p < g.points(); ++p) v.at(0, p) = c;
    steady.push_back({0.1 * i, v});
  }
  const auto shifted = gauge_reconstruct(traj, steady);
  double err = 0.0;
  for (std::size_t p = 0; p < g.points(); ++p) {
    const double x = g.coordinate(0, g.unravel(p)[0]) - c;
    const Form<3> ref = forms6::standard_phi() - 1e-2 * std::sin(x) * ebasis<3>({1, 3, 5});
    err = std::max(err, (shifted.pulled_back[1].phi.value(p) - ref).max_abs());
  }
  CHECK(err < 1e-12);
  CHECK(shifted.displacement.at(0, 3) == doctest::Approx(-c));

  std::vector<VectorSample> fast{{0.0, steady[0].v}, {100.0, steady[0].v}};
  CHECK_THROWS_AS(gauge_reconstruct(traj, fast), StepUnderflowError);
}
