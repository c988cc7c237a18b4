#include <cmath>
#include <filesystem>
#include <random>

#include "iia/cli.hpp"
#include "iia/errors.hpp"

namespace iia::cli {

using forms6::Form;
using forms6::Mat6;
using forms6::Vec6;
using lattice::FormField;

namespace {

template <int K>
Form<K> random_form(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Form<K> f;
  for (auto& x : f.c) x = nd(rng);
  return f * (scale / f.max_abs());
}

struct Worst {
  double value = 0.0;
  void operator()(double x) { value = std::max(value, std::isfinite(x) ? x : INFINITY); }
};

void forms6_suite(std::vector<CheckRow>& rows, std::uint64_t seed, int structures) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.5, 2.0);
  std::normal_distribution<double> nd(0.0, 1.0);
  Worst jsq, metric_eq, bilinear, contraction, contraction_hat, dual_twice, typesum, lefschetz, vdual, vnorm;
  double vdual_e1 = 0.0, vdual_e2 = 0.0, vnorm_e1 = 0.0, vnorm_e2 = 0.0;
  const double eps = 1e-5;
  for (int s = 0; s < structures; ++s) {
    const auto ps = forms6::sp6_randomize(forms6::standard_structure(unif(rng)), seed * 7919 + s);
    const double scale = ps.phi.max_abs();
    jsq((ps.j.m * ps.j.m + Mat6::Identity()).cwiseAbs().maxCoeff());
    metric_eq((forms6::metric(ps.phi, ps.omega).m - ps.metric.m).cwiseAbs().maxCoeff() / ps.metric.m.cwiseAbs().maxCoeff());
    bilinear(forms6::bilinear_residual(ps) / (ps.normsq * ps.metric.m.cwiseAbs().maxCoeff() * ps.omega.max_abs()));

    Vec6 v;
    for (int i = 0; i < 6; ++i) v[i] = nd(rng);
    const Form<1> vflat = forms6::flat(ps.metric, v);
    const Form<1> jvflat = forms6::j_action(ps.j, vflat);
    const Form<2> ip = forms6::interior(v, ps.phi);
    const Form<2> iph = forms6::interior(v, ps.phihat);
    const double norm_v = v.cwiseAbs().maxCoeff() * scale;
    contraction((ip - forms6::lambda_contraction(ps.omega, forms6::wedge(vflat, ps.phihat))).max_abs() / norm_v);
    contraction((ip - forms6::lambda_contraction(ps.omega, forms6::wedge(jvflat, ps.phi))).max_abs() / norm_v);
    contraction_hat((iph + forms6::lambda_contraction(ps.omega, forms6::wedge(vflat, ps.phi))).max_abs() / norm_v);
    dual_twice((forms6::hitchin_dual(ps.phihat) + ps.phi).max_abs() / scale);

    const Form<3> a = random_form<3>(rng, scale);
    Form<3> sum;
    for (const auto& c : forms6::type_decompose(ps.j, a)) sum += c.part;
    typesum((sum - a).max_abs() / scale);

    const Form<4> gamma = random_form<4>(rng, 1.0);
    lefschetz((forms6::wedge(ps.omega, forms6::lefschetz_invert(ps.omega, gamma)) - gamma).max_abs());

    // Central differences at eps, and at 1e-2 / 5e-3 for the order check.
    const Form<2> dw = random_form<2>(rng, ps.omega.max_abs());
    auto fd_dual = [&](double e) {
      const Form<3> f = (forms6::hitchin_dual(ps.phi + e * a) - forms6::hitchin_dual(ps.phi - e * a)) / (2.0 * e);
      return (f - forms6::variation_dual(ps.phi, a)).max_abs() / f.max_abs();
    };
    auto fd_norm = [&](double e) {
      const double f = (forms6::norm_squared(ps.phi + e * a, ps.omega + e * dw) -
                        forms6::norm_squared(ps.phi - e * a, ps.omega - e * dw)) /
                       (2.0 * e);
      const double exact = forms6::variation_norm_squared(ps, a, dw);
      return std::abs(f - exact) / std::max(std::abs(exact), ps.normsq);
    };
    vdual(fd_dual(eps));
    vnorm(fd_norm(eps));
    vdual_e1 += fd_dual(1e-2);
    vdual_e2 += fd_dual(5e-3);
    vnorm_e1 += fd_norm(1e-2);
    vnorm_e2 += fd_norm(5e-3);
  }
  auto add = [&](const char* name, double v, double tol) { rows.push_back({"forms6", name, v, tol, v <= tol}); };
  add("j_squared_plus_identity", jsq.value, 1e-12);
  add("metric_vs_omega_j", metric_eq.value, 1e-12);
  add("bilinear_identity", bilinear.value, 1e-12);
  add("contraction_phi", contraction.value, 1e-11);
  add("contraction_phihat", contraction_hat.value, 1e-11);
  add("dual_twice_negates", dual_twice.value, 1e-12);
  add("type_decompose_recombines", typesum.value, 1e-13);
  add("lefschetz_round_trip", lefschetz.value, 1e-12);
  add("variation_dual_fd", vdual.value, 1e-7);
  add("variation_norm_fd", vnorm.value, 1e-7);
  const double rd = vdual_e1 / vdual_e2, rn = vnorm_e1 / vnorm_e2;
  rows.push_back({"forms6", "variation_dual_order_ratio", rd, 4.5, rd >= 3.5 && rd <= 4.5});
  rows.push_back({"forms6", "variation_norm_order_ratio", rn, 4.5, rn >= 3.5 && rn <= 4.5});
}

void lattice_suite(std::vector<CheckRow>& rows, const lattice::Grid& g, std::uint64_t seed) {
  using lattice::l2_norm;
  int max_mode = 0;
  for (int a = 0; a < 6; ++a)
    if (g.n[a] > 1) max_mode = std::max(max_mode, g.n[a] / 3);
  if (max_mode == 0) throw ConfigError("check: the grid resolves no axis");
  auto add = [&](const char* name, double v, double tol) { rows.push_back({"lattice", name, v, tol, v <= tol}); };

  const auto f1 = lattice::random_band_limited<1>(g, seed + 11, max_mode);
  const auto f2 = lattice::random_band_limited<2>(g, seed + 12, max_mode);
  const auto f3 = lattice::random_band_limited<3>(g, seed + 13, max_mode);
  const auto f4 = lattice::random_band_limited<4>(g, seed + 14, max_mode);

  const auto d2 = lattice::exterior_derivative(f2);
  add("dd_zero", l2_norm(lattice::exterior_derivative(lattice::exterior_derivative(f1))) / l2_norm(f1), 1e-13);
  add("codiff_codiff_zero", l2_norm(lattice::codifferential(lattice::codifferential(f4))) / l2_norm(f4), 1e-13);

  const double lhs = lattice::l2_inner(d2, f3);
  const double rhs = lattice::l2_inner(f2, lattice::codifferential(f3));
  add("adjointness", std::abs(lhs - rhs) / (l2_norm(d2) * l2_norm(f3)), 1e-12);

  const auto lap = lattice::hodge_laplacian(f2);
  const auto comp = lattice::exterior_derivative(lattice::codifferential(f2)) +
                    lattice::codifferential(lattice::exterior_derivative(f2));
  add("laplacian_composition", l2_norm(lap - comp) / l2_norm(lap), 1e-12);
  add("laplacian_nonnegative", std::max(0.0, -lattice::l2_inner(lap, f2)), 0.0);

  const auto split = lattice::harmonic_projection(f2);
  const auto resplit = lattice::harmonic_projection(split.remainder);
  add("harmonic_idempotent", resplit.harmonic.max_abs(), 1e-13);
  add("green_round_trip", l2_norm(lattice::hodge_laplacian(lattice::green_inverse(f2)) - split.remainder) / l2_norm(f2),
      1e-11);
  const auto prim = lattice::neumann_operator(d2);
  add("neumann_round_trip", l2_norm(lattice::exterior_derivative(prim) - d2) / l2_norm(d2), 1e-10);

  double tri = 0.0, hom = 0.0;
  for (int s = 0; s <= 10; ++s) {
    const double a = lattice::sobolev_norm(f2, s), b = lattice::sobolev_norm(lap, s);
    tri = std::max(tri, (lattice::sobolev_norm(f2 + lap, s) - (a + b)) / (a + b));
    hom = std::max(hom, std::abs(lattice::sobolev_norm(-2.5 * f2, s) - 2.5 * a) / a);
  }
  add("sobolev_triangle", std::max(0.0, tri), 1e-14);
  add("sobolev_homogeneity", hom, 1e-13);

  const auto dir = std::filesystem::temp_directory_path() / ("iia-check-" + std::to_string(seed));
  std::filesystem::create_directories(dir);
  const auto path = (dir / "f3.iiaf").string();
  lattice::write_snapshot(path, f3);
  const auto back = lattice::read_snapshot<3>(path);
  std::filesystem::remove_all(dir);
  add("snapshot_round_trip", back.raw() == f3.raw() && back.grid() == f3.grid() ? 0.0 : 1.0, 0.0);
}

}  // namespace

std::vector<CheckRow> run_check_suites(const lattice::Grid& g, std::uint64_t seed, int structures) {
  if (structures < 1) throw ConfigError("check: structures must be positive");
  std::vector<CheckRow> rows;
  forms6_suite(rows, seed, structures);
  lattice_suite(rows, g, seed);
  return rows;
}

}  // namespace iia::cli
