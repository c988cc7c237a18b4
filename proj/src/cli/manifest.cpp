#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "iia/cli.hpp"
#include "iia/errors.hpp"

namespace iia::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(what + ": expected a number, got '" + s + "'");
  }
}

long to_long(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const long v = std::stol(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(what + ": expected an integer, got '" + s + "'");
  }
}

}  // namespace

Manifest Manifest::parse(const std::string& text, const std::string& origin) {
  Manifest m;
  m.origin_ = origin;
  std::stringstream ss(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || section.empty())
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value inside a section");
    m.entries_.push_back({section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), lineno});
  }
  return m;
}

Manifest Manifest::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  Manifest m = parse(ss.str(), path.string());
  m.dir_ = path.parent_path();
  return m;
}

bool Manifest::has(const std::string& section, const std::string& key) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const Entry& e) { return e.section == section && e.key == key; });
}

std::string Manifest::get(const std::string& section, const std::string& key, const std::string& fallback) const {
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it)
    if (it->section == section && it->key == key) return it->value;
  return fallback;
}

double Manifest::get_double(const std::string& section, const std::string& key, double fallback) const {
  return has(section, key) ? to_double(get(section, key, ""), section + "." + key) : fallback;
}

long Manifest::get_int(const std::string& section, const std::string& key, long fallback) const {
  return has(section, key) ? to_long(get(section, key, ""), section + "." + key) : fallback;
}

bool Manifest::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get(section, key, "");
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  throw ConfigError(section + "." + key + ": expected a boolean, got '" + v + "'");
}

std::vector<std::string> Manifest::all(const std::string& section, const std::string& key) const {
  std::vector<std::string> out;
  for (const auto& e : entries_)
    if (e.section == section && e.key == key) out.push_back(e.value);
  return out;
}

void Manifest::check_keys(const std::vector<std::string>& allowed) const {
  for (const auto& e : entries_) {
    const std::string name = e.section + "." + e.key;
    if (std::find(allowed.begin(), allowed.end(), name) == allowed.end())
      throw ConfigError(origin_ + ":" + std::to_string(e.line) + ": unknown key '" + name + "'");
  }
}

// ---------------------------------------------------------------------------

Command parse_command(const std::string& name) {
  if (name == "check") return Command::Check;
  if (name == "flow-run") return Command::FlowRun;
  if (name == "linearize") return Command::Linearize;
  if (name == "perturb-and-flow") return Command::PerturbAndFlow;
  if (name == "decay-report") return Command::DecayReport;
  throw ConfigError("unknown command '" + name + "'");
}

const char* to_string(Command c) {
  switch (c) {
    case Command::Check: return "check";
    case Command::FlowRun: return "flow-run";
    case Command::Linearize: return "linearize";
    case Command::PerturbAndFlow: return "perturb-and-flow";
    case Command::DecayReport: return "decay-report";
  }
  return "?";
}

lattice::Grid grid_from(const Manifest& m, std::optional<int> grid_n) {
  lattice::Grid g;
  g.length = m.get_double("grid", "length", 2.0 * std::numbers::pi);
  const auto parts = split(m.get("grid", "n", "8"), ',');
  if (parts.size() == 1) {
    g.n.fill(static_cast<int>(to_long(parts[0], "grid.n")));
  } else if (parts.size() == 6) {
    for (int a = 0; a < 6; ++a) g.n[a] = static_cast<int>(to_long(parts[a], "grid.n"));
  } else {
    throw ConfigError("grid.n: expected one size or six comma-separated sizes");
  }
  if (grid_n) {
    for (auto& n : g.n)
      if (n > 1) n = *grid_n;
  }
  const long cap = m.get_int("grid", "max_points", static_cast<long>(lattice::kDefaultMaxPoints));
  lattice::validate(g, static_cast<std::size_t>(cap));
  return g;
}

PerturbationTerm parse_term(const std::string& text) {
  std::stringstream ss(text);
  std::string degree, idx, freq, amp, kind;
  if (!(ss >> degree >> idx >> freq >> amp >> kind))
    throw ConfigError("perturbation term '" + text + "': expected <degree> <indices> <m1,..,m6> <amplitude> <exact|harmonic>");
  std::string extra;
  if (ss >> extra) throw ConfigError("perturbation term '" + text + "': trailing input");
  PerturbationTerm t;
  t.degree = static_cast<int>(to_long(degree, "term degree"));
  if (t.degree != 2 && t.degree != 3) throw ConfigError("perturbation term '" + text + "': degree must be 2 or 3");
  t.exact = kind == "exact";
  if (!t.exact && kind != "harmonic") throw ConfigError("perturbation term '" + text + "': kind must be exact or harmonic");
  if (idx != "-") {
    for (char c : idx) {
      if (c < '1' || c > '6') throw ConfigError("perturbation term '" + text + "': indices are digits 1..6");
      t.indices.push_back(c - '0');
    }
  }
  const auto f = split(freq, ',');
  if (f.size() != 6) throw ConfigError("perturbation term '" + text + "': frequency needs six integers");
  for (int a = 0; a < 6; ++a) t.frequency[a] = static_cast<int>(to_long(f[a], "term frequency"));
  t.amplitude = to_double(amp, "term amplitude");
  const std::size_t want = t.exact ? t.degree - 1 : t.degree;
  if (t.indices.size() != want)
    throw ConfigError("perturbation term '" + text + "': expected " + std::to_string(want) + " indices");
  for (std::size_t i = 1; i < t.indices.size(); ++i)
    if (t.indices[i] <= t.indices[i - 1])
      throw ConfigError("perturbation term '" + text + "': indices must be strictly increasing");
  const bool zero = std::all_of(t.frequency.begin(), t.frequency.end(), [](int m) { return m == 0; });
  if (!t.exact && !zero) throw ConfigError("perturbation term '" + text + "': harmonic terms have zero frequency");
  if (t.exact && zero) throw ConfigError("perturbation term '" + text + "': exact terms need a nonzero frequency");
  return t;
}

template <int K>
lattice::FormField<K> term_field(const lattice::Grid& g, const PerturbationTerm& t) {
  if (t.degree != K) throw ConfigError("term_field: degree mismatch");
  for (int a = 0; a < 6; ++a)
    if (t.frequency[a] != 0 && 3 * std::abs(t.frequency[a]) > g.n[a])
      throw ConfigError("perturbation frequency " + std::to_string(t.frequency[a]) + " on axis " + std::to_string(a + 1) +
                        " is not resolved by the 2/3-rule band of the grid");
  const double k0 = 2.0 * std::numbers::pi / g.length;
  if (!t.exact) {
    std::array<int, K> idx{};
    std::copy(t.indices.begin(), t.indices.end(), idx.begin());
    return lattice::constant_field(g, t.amplitude * forms6::ebasis<K>(idx));
  }
  std::array<int, K - 1> idx{};
  std::copy(t.indices.begin(), t.indices.end(), idx.begin());
  const forms6::Form<K - 1> e = forms6::ebasis<K - 1>(idx);
  lattice::FormField<K - 1> pot(g);
  for (std::size_t p = 0; p < g.points(); ++p) {
    const auto i = g.unravel(p);
    double phase = 0.0;
    for (int a = 0; a < 6; ++a) phase += k0 * t.frequency[a] * g.coordinate(a, i[a]);
    pot.set(p, t.amplitude * std::cos(phase) * e);
  }
  return lattice::exterior_derivative(pot);
}

template lattice::FormField<2> term_field<2>(const lattice::Grid&, const PerturbationTerm&);
template lattice::FormField<3> term_field<3>(const lattice::Grid&, const PerturbationTerm&);

flow::FlowConfig flow_config_from(const Manifest& m) {
  flow::FlowConfig c;
  c.scheme = m.get("flow", "scheme", c.scheme);
  c.dt_safety = m.get_double("flow", "dt_safety", c.dt_safety);
  c.t_max = m.get_double("flow", "t_max", c.t_max);
  c.monitor_stride = static_cast<int>(m.get_int("flow", "monitor_stride", c.monitor_stride));
  c.reparametrized = m.get_bool("flow", "reparametrized", c.reparametrized);
  c.stationary_tol = m.get_double("flow", "stationary_tol", c.stationary_tol);
  c.max_steps = m.get_int("flow", "max_steps", c.max_steps);
  c.fixed_dt = m.get_double("flow", "fixed_dt", c.fixed_dt);
  c.curvature_monitor = m.get_bool("flow", "curvature_monitor", c.curvature_monitor);
  if (c.scheme != "rk4") throw ConfigError("flow.scheme: only rk4 is available");
  if (!(c.dt_safety > 0.0 && c.dt_safety <= 1.0)) throw ConfigError("flow.dt_safety must lie in (0, 1]");
  if (!(c.t_max >= 0.0)) throw ConfigError("flow.t_max must be non-negative");
  if (c.monitor_stride < 1) throw ConfigError("flow.monitor_stride must be positive");
  if (c.max_steps < 0) throw ConfigError("flow.max_steps must be non-negative");
  return c;
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace iia::cli
