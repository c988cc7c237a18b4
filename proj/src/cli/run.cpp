#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "iia/cli.hpp"
#include "iia/errors.hpp"
#include "iia/parallel.hpp"

namespace iia::cli {

using nlohmann::ordered_json;
using lattice::FormField;
using lattice::Grid;

namespace {

const std::vector<std::string> kGridKeys = {"grid.n", "grid.length", "grid.max_points"};
const std::vector<std::string> kFlowKeys = {"flow.scheme",         "flow.dt_safety", "flow.t_max",
                                            "flow.monitor_stride", "flow.reparametrized", "flow.stationary_tol",
                                            "flow.max_steps",      "flow.fixed_dt", "flow.curvature_monitor"};

std::vector<std::string> keys(std::initializer_list<std::vector<std::string>> groups) {
  std::vector<std::string> out;
  for (const auto& g : groups) out.insert(out.end(), g.begin(), g.end());
  return out;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

std::string csv_comment(const RunConfig& c, const Grid& g) {
  return std::string("# iia ") + to_string(c.command) + " seed=" + std::to_string(c.seed) + " grid=" + lattice::describe(g) +
         "\n";
}

ordered_json header_json(const RunConfig& c, const Grid& g) {
  ordered_json j;
  j["command"] = to_string(c.command);
  j["seed"] = c.seed;
  j["grid"] = g.n;
  j["length"] = g.length;
  return j;
}

// Values that legitimately differ between runs live here, away from the
// deterministic artifacts.
void write_metadata(const RunConfig& c, double seconds) {
  ordered_json j;
  const std::time_t now = std::time(nullptr);
  char buf[64];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  j["finished_utc"] = buf;
  j["wall_seconds"] = seconds;
  j["threads"] = thread_count();
  j["manifest"] = c.manifest ? c.manifest->string() : "";
  write_file(c.out / "metadata.json", j.dump(2) + "\n");
}

std::pair<double, int> amplitude_and_mode(const std::string& text, const std::string& what) {
  std::stringstream ss(text);
  double amp = 0.0;
  int mode = 0;
  if (!(ss >> amp >> mode) || mode < 1) throw ConfigError(what + ": expected '<amplitude> <max_mode>'");
  return {amp, mode};
}

struct Perturbation {
  FormField<2> omega;
  FormField<3> phi;
  bool omega_changed = false;
};

Perturbation perturbation_from(const Manifest& m, const Grid& g, std::uint64_t seed) {
  Perturbation p{FormField<2>(g), FormField<3>(g), false};
  const double scale = m.get_double("perturbation", "scale", 1.0);
  for (const auto& text : m.all("perturbation", "term")) {
    const auto t = parse_term(text);
    if (t.degree == 2) {
      p.omega.axpy(scale, term_field<2>(g, t));
      p.omega_changed = true;
    } else {
      p.phi.axpy(scale, term_field<3>(g, t));
    }
  }
  if (m.has("perturbation", "random_omega")) {
    const auto [amp, mode] = amplitude_and_mode(m.get("perturbation", "random_omega", ""), "perturbation.random_omega");
    p.omega.axpy(scale * amp, stability::random_exact_two_form(g, seed, mode));
    p.omega_changed = true;
  }
  if (m.has("perturbation", "random_phi")) {
    const auto [amp, mode] = amplitude_and_mode(m.get("perturbation", "random_phi", ""), "perturbation.random_phi");
    p.phi.axpy(scale * amp, stability::random_primitive_exact(g, seed + 1, mode));
  }
  return p;
}

// ---------------------------------------------------------------------------

int cmd_check(const RunConfig& c, const Manifest& m, std::ostream& log) {
  m.check_keys(keys({kGridKeys, {"check.structures"}}));
  const Grid g = grid_from(m, c.grid_n);
  const int structures = static_cast<int>(m.get_int("check", "structures", 1000));
  const auto rows = run_check_suites(g, c.seed, structures);

  std::string csv = csv_comment(c, g) + "suite,name,value,tolerance,pass\n";
  ordered_json j = header_json(c, g);
  j["structures"] = structures;
  int failed = 0;
  char line[160];
  for (const auto& r : rows) {
    csv += r.suite + "," + r.name + "," + format_double(r.value) + "," + format_double(r.tolerance) + "," +
           (r.pass ? "1" : "0") + "\n";
    std::snprintf(line, sizeof line, "%-8s %-30s %12.3e  tol %9.1e  %s\n", r.suite.c_str(), r.name.c_str(), r.value,
                  r.tolerance, r.pass ? "PASS" : "FAIL");
    log << line;
    failed += !r.pass;
  }
  j["checks"] = rows.size();
  j["failed"] = failed;
  write_file(c.out / "check.csv", csv);
  write_file(c.out / "check.json", j.dump(2) + "\n");
  return failed ? kSuiteFailure : kSuccess;
}

int cmd_flow_run(const RunConfig& c, const Manifest& m, std::ostream& log) {
  m.check_keys(keys({kGridKeys,
                     kFlowKeys,
                     {"background.norm", "perturbation.term", "perturbation.scale", "perturbation.random_phi",
                      "perturbation.random_omega", "output.snapshots", "output.snapshot_stride"}}));
  const Grid g = grid_from(m, c.grid_n);
  flow::FlowConfig fc = flow_config_from(m);
  const double norm = m.get_double("background", "norm", 1.0);
  const bool snapshots = m.get_bool("output", "snapshots", false);
  const long stride = m.get_int("output", "snapshot_stride", 1);
  if (stride < 1) throw ConfigError("output.snapshot_stride must be positive");
  fc.keep_trajectory = snapshots;
  fc.keep_vector_field = false;

  const auto pert = perturbation_from(m, g, c.seed);
  flow::TypeIIAState state = flow::standard_state(g, norm);
  state.omega += pert.omega;
  if (pert.omega_changed) {
    stability::CorrectedPair bg;
    bg.phi_tilde = forms6::standard_phi(norm);
    bg.omega_tilde = forms6::standard_omega();
    state.phi = stability::build_compatible_phi(state.omega, bg).phi;
  }
  state.phi += pert.phi;
  try {
    flow::derive(state);
  } catch (const Error& e) {
    throw ConfigError(std::string("initial state is not a Type IIA structure: ") + e.what());
  }

  const auto res = flow::advance(state, fc);
  write_file(c.out / "monitor.csv", csv_comment(c, g) + res.monitor.csv());
  if (snapshots) {
    const fs::path dir = c.out / "trajectory";
    fs::create_directories(dir);
    std::string index = "sample,t,phi,omega\n";
    for (std::size_t i = 0; i < res.trajectory.size(); ++i) {
      if (i % stride != 0 && i + 1 != res.trajectory.size()) continue;
      char name[32];
      std::snprintf(name, sizeof name, "%06zu", i);
      const std::string phi = std::string("phi_") + name + ".iiaf", omega = std::string("omega_") + name + ".iiaf";
      lattice::write_snapshot((dir / phi).string(), res.trajectory[i].phi);
      lattice::write_snapshot((dir / omega).string(), res.trajectory[i].omega);
      index += std::to_string(i) + "," + format_double(res.trajectory[i].t) + "," + phi + "," + omega + "\n";
    }
    write_file(dir / "index.csv", index);
  }
  ordered_json j = header_json(c, g);
  j["status"] = flow::to_string(res.status);
  j["message"] = res.message;
  j["steps"] = res.steps;
  j["final_time"] = res.final_state.time;
  j["final_rhs_l2"] = res.final_rhs_l2;
  write_file(c.out / "result.json", j.dump(2) + "\n");
  log << "flow-run: " << flow::to_string(res.status) << " after " << res.steps << " steps, t=" << res.final_state.time
      << ", rhs_l2=" << res.final_rhs_l2 << "\n";

  switch (res.status) {
    case flow::Status::Degenerate:
    case flow::Status::StepUnderflow: return kDegenerate;
    case flow::Status::StepLimit: return kNotConverged;
    case flow::Status::ReachedTMax: return fc.stationary_tol > 0.0 ? kNotConverged : kSuccess;
    case flow::Status::Converged: return kSuccess;
  }
  return kSuccess;
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError(what + ": bad number '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError(what + ": empty list");
  return out;
}

int cmd_linearize(const RunConfig& c, const Manifest& m, std::ostream& log) {
  m.check_keys(keys({kGridKeys,
                     {"background.norm", "linearize.count", "linearize.mode_budget", "linearize.eps",
                      "linearize.tolerance"}}));
  const Grid g = grid_from(m, c.grid_n);
  const double norm = m.get_double("background", "norm", 1.0);
  const long count = m.get_int("linearize", "count", 20);
  const int budget = static_cast<int>(m.get_int("linearize", "mode_budget", 2));
  const auto eps = parse_list(m.get("linearize", "eps", "1e-4,5e-5"), "linearize.eps");
  const double tol = m.get_double("linearize", "tolerance", 1e-4);
  if (count < 1) throw ConfigError("linearize.count must be positive");
  for (double e : eps)
    if (!(e >= 1e-6 && e <= 1e-3)) throw ConfigError("linearize.eps values must lie in [1e-6, 1e-3]");

  std::string csv = csv_comment(c, g) + "seed,eps,rel_dphi,rel_domega,abs_dphi,abs_domega,h_sup\n";
  double worst = 0.0;
  std::vector<double> err_sum(eps.size(), 0.0);
  for (long i = 0; i < count; ++i) {
    const std::uint64_t seed = c.seed + i;
    const auto var = stability::constrained_variation(g, seed, budget, norm);
    for (std::size_t e = 0; e < eps.size(); ++e) {
      const auto r = stability::linearization_check(var, eps[e], norm);
      csv += std::to_string(seed) + "," + format_double(eps[e]) + "," + format_double(r.rel_dphi) + "," +
             format_double(r.rel_domega) + "," + format_double(r.abs_dphi) + "," + format_double(r.abs_domega) + "," +
             format_double(r.h_sup) + "\n";
      worst = std::max({worst, r.rel_dphi, r.rel_domega});
      err_sum[e] += r.abs_dphi + r.abs_domega;
    }
    log << "linearize: seed " << seed << " done\n";
  }
  ordered_json j = header_json(c, g);
  j["count"] = count;
  j["mode_budget"] = budget;
  j["eps"] = eps;
  j["max_relative_error"] = worst;
  j["tolerance"] = tol;
  if (eps.size() >= 2) j["halving_ratio"] = err_sum[0] / err_sum[1];
  j["pass"] = worst <= tol;
  write_file(c.out / "linearize.csv", csv);
  write_file(c.out / "linearize.json", j.dump(2) + "\n");
  log << "linearize: max relative error " << worst << " (tolerance " << tol << ")\n";
  return worst <= tol ? kSuccess : kSuiteFailure;
}

int cmd_perturb_and_flow(const RunConfig& c, const Manifest& m, std::ostream& log) {
  m.check_keys(keys({kGridKeys,
                     kFlowKeys,
                     {"perturbation.term", "perturbation.scale", "perturbation.random_omega", "stability.target_rhs",
                      "stability.nijenhuis_tol", "stability.gauge_tol", "stability.gauge_t", "stability.k_max"}}));
  const Grid g = grid_from(m, c.grid_n);
  stability::StabilityConfig sc;
  sc.flow = flow_config_from(m);
  if (!m.has("flow", "t_max")) sc.flow.t_max = 50.0;
  sc.target_rhs = m.get_double("stability", "target_rhs", sc.target_rhs);
  sc.nijenhuis_tol = m.get_double("stability", "nijenhuis_tol", sc.nijenhuis_tol);
  sc.gauge_tol = m.get_double("stability", "gauge_tol", sc.gauge_tol);
  sc.gauge_t = m.get_double("stability", "gauge_t", sc.gauge_t);
  sc.k_max = static_cast<int>(m.get_int("stability", "k_max", sc.k_max));
  for (const auto& text : m.all("perturbation", "term"))
    if (parse_term(text).degree != 2) throw ConfigError("perturb-and-flow perturbs ω only; got '" + text + "'");

  const auto pert = perturbation_from(m, g, c.seed);
  FormField<2> omega = lattice::constant_field(g, forms6::standard_omega());
  omega += pert.omega;
  const auto v = stability::end_to_end_stability(omega, sc);

  ordered_json j = header_json(c, g);
  const auto body = ordered_json::parse(v.json());
  for (auto it = body.begin(); it != body.end(); ++it) j[it.key()] = it.value();
  if (!v.energy.rates.empty()) {
    ordered_json rates = ordered_json::array();
    for (const auto& r : v.energy.rates) rates.push_back({{"rate", r.rate}, {"r_squared", r.r_squared}});
    j["energy_rates"] = rates;
  }
  write_file(c.out / "verdict.json", j.dump(2) + "\n");
  write_file(c.out / "monitor.csv", csv_comment(c, g) + v.monitor.csv());
  write_file(c.out / "energy.csv", csv_comment(c, g) + v.energy.csv());
  log << "perturb-and-flow: stage " << v.stage << ", status " << v.status << ", rhs_l2=" << v.final_rhs
      << ", nijenhuis=" << v.nijenhuis << "\n";
  if (v.converged) return kSuccess;
  return v.status == "degenerate" ? kDegenerate : kNotConverged;
}

int cmd_decay_report(const RunConfig& c, const Manifest& m, std::ostream& log, const fs::path& trajectory_dir) {
  const int k_max = static_cast<int>(m.get_int("decay", "k_max", 2));
  std::ifstream idx(trajectory_dir / "index.csv");
  std::string line;
  std::getline(idx, line);
  std::vector<flow::Sample> traj;
  while (std::getline(idx, line)) {
    std::stringstream ss(line);
    std::string sample, t, phi, omega;
    if (!std::getline(ss, sample, ',') || !std::getline(ss, t, ',') || !std::getline(ss, phi, ',') ||
        !std::getline(ss, omega, ','))
      throw ConfigError("malformed trajectory index line '" + line + "'");
    flow::Sample s;
    s.t = std::stod(t);
    s.phi = lattice::read_snapshot<3>((trajectory_dir / phi).string());
    s.omega = lattice::read_snapshot<2>((trajectory_dir / omega).string());
    traj.push_back(std::move(s));
  }
  if (traj.empty()) throw ConfigError("trajectory " + trajectory_dir.string() + " has no samples");
  const Grid g = traj.front().phi.grid();
  const auto corrected = stability::harmonic_correction(traj.front().phi, traj.front().omega);
  const auto rep = stability::energies(traj, corrected, k_max);

  ordered_json j = header_json(c, g);
  j["samples"] = rep.times.size();
  j["fitted_delta"] = rep.fitted_delta;
  j["r_squared"] = rep.r_squared;
  j["fit_window"] = {rep.fit_t0, rep.fit_t1};
  ordered_json rates = ordered_json::array();
  for (const auto& r : rep.rates) rates.push_back({{"rate", r.rate}, {"r_squared", r.r_squared}});
  j["rates"] = rates;
  j["orthogonality_max"] = rep.orthogonality_max;
  j["monotonicity_violation"] = rep.monotonicity_violation;
  write_file(c.out / "energy.csv", csv_comment(c, g) + rep.csv());
  write_file(c.out / "decay.json", j.dump(2) + "\n");
  log << "decay-report: delta=" << rep.fitted_delta << " r2=" << rep.r_squared << "\n";
  return kSuccess;
}

}  // namespace

int run(const RunConfig& config, std::ostream& log) {
  const auto start = std::chrono::steady_clock::now();
  int code = kSuccess;
  try {
    // Validate every path before computing anything.
    Manifest m;
    if (config.manifest) {
      if (!fs::is_regular_file(*config.manifest)) throw ConfigError("manifest " + config.manifest->string() + " not found");
      m = Manifest::load(*config.manifest);
    } else if (config.command != Command::Check) {
      throw ConfigError(std::string(to_string(config.command)) + " needs --manifest");
    }
    if (fs::exists(config.out) && !fs::is_directory(config.out))
      throw ConfigError("output path " + config.out.string() + " exists and is not a directory");
    fs::path trajectory_dir;
    if (config.command == Command::DecayReport) {
      m.check_keys({"decay.trajectory", "decay.k_max"});
      const std::string rel = m.get("decay", "trajectory", "");
      if (rel.empty()) throw ConfigError("decay.trajectory is required");
      trajectory_dir = m.directory() / rel;
      if (fs::is_directory(trajectory_dir / "trajectory")) trajectory_dir /= "trajectory";
      if (!fs::is_regular_file(trajectory_dir / "index.csv"))
        throw ConfigError("no trajectory index under " + trajectory_dir.string());
    }
    fs::create_directories(config.out);

    switch (config.command) {
      case Command::Check: code = cmd_check(config, m, log); break;
      case Command::FlowRun: code = cmd_flow_run(config, m, log); break;
      case Command::Linearize: code = cmd_linearize(config, m, log); break;
      case Command::PerturbAndFlow: code = cmd_perturb_and_flow(config, m, log); break;
      case Command::DecayReport: code = cmd_decay_report(config, m, log, trajectory_dir); break;
    }
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    code = kDegenerate;
  } catch (const fs::filesystem_error& e) {
    log << "error: " << e.what() << "\n";
    return kConfigError;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  try {
    write_metadata(config, seconds);
  } catch (const Error&) {
  }
  return code;
}

}  // namespace iia::cli
