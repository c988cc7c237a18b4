#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "iia/stability.hpp"

namespace iia::cli {

namespace fs = std::filesystem;

/// Sections of key = value lines. Keys may repeat (perturbation terms);
/// lookups of a repeated key take the last value.
class Manifest {
 public:
  static Manifest parse(const std::string& text, const std::string& origin = "<string>");
  static Manifest load(const fs::path& path);

  bool has(const std::string& section, const std::string& key) const;
  std::string get(const std::string& section, const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  long get_int(const std::string& section, const std::string& key, long fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  std::vector<std::string> all(const std::string& section, const std::string& key) const;

  /// Throws ConfigError naming the first key that is not in `allowed`
  /// (entries are "section.key").
  void check_keys(const std::vector<std::string>& allowed) const;

  const fs::path& directory() const { return dir_; }

 private:
  struct Entry {
    std::string section, key, value;
    int line = 0;
  };
  std::vector<Entry> entries_;
  std::string origin_;
  fs::path dir_;
};

enum class Command { Check, FlowRun, Linearize, PerturbAndFlow, DecayReport };

Command parse_command(const std::string& name);
const char* to_string(Command c);

struct RunConfig {
  Command command = Command::Check;
  std::optional<fs::path> manifest;
  fs::path out;
  std::uint64_t seed = 0;
  std::optional<int> grid_n;
};

enum ExitCode : int {
  kSuccess = 0,
  kConfigError = 2,
  kSuiteFailure = 3,
  kDegenerate = 4,
  kNotConverged = 5,
};

/// Executes a command, writing artifacts under config.out and a progress
/// table to `log`.
int run(const RunConfig& config, std::ostream& log);

// ---------------------------------------------------------------------------
// Pieces shared by the commands, exposed for tests.

/// [grid] n = 8 or n = 16,16,1,1,1,1; length = L. `grid_n` replaces the size
/// of every resolved axis.
lattice::Grid grid_from(const Manifest& m, std::optional<int> grid_n);

/// One perturbation term: "<degree> <indices> <m1,..,m6> <amplitude> <exact|harmonic>".
/// Harmonic terms add amplitude·e^I to the form of that degree (frequency
/// must be zero). Exact terms add d(amplitude·cos(m·x) e^J) with J of length
/// degree − 1.
struct PerturbationTerm {
  int degree = 2;
  std::vector<int> indices;
  std::array<int, 6> frequency{};
  double amplitude = 0.0;
  bool exact = false;
};

PerturbationTerm parse_term(const std::string& text);

template <int K>
lattice::FormField<K> term_field(const lattice::Grid& g, const PerturbationTerm& t);

flow::FlowConfig flow_config_from(const Manifest& m);

struct CheckRow {
  std::string suite;
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// The forms6 and lattice invariant suites.
std::vector<CheckRow> run_check_suites(const lattice::Grid& g, std::uint64_t seed, int structures);

std::string format_double(double x);

}  // namespace iia::cli
