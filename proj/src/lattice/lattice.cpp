#include "iia/lattice.hpp"

#include <fftw3.h>

#include <atomic>
#include <cstring>
#include <fstream>
#include <limits>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <sstream>

namespace iia::lattice {

Grid Grid::isotropic(int n, double length) {
  Grid g;
  g.n = {n, n, n, n, n, n};
  g.length = length;
  return g;
}

std::size_t Grid::points() const {
  std::size_t p = 1;
  for (int a : n) p *= static_cast<std::size_t>(a);
  return p;
}

double Grid::volume() const { return std::pow(length, 6); }

std::array<int, 6> Grid::unravel(std::size_t p) const {
  std::array<int, 6> idx{};
  for (int a = 5; a >= 0; --a) {
    idx[a] = static_cast<int>(p % n[a]);
    p /= n[a];
  }
  return idx;
}

std::size_t Grid::ravel(const std::array<int, 6>& idx) const {
  std::size_t p = 0;
  for (int a = 0; a < 6; ++a) p = p * n[a] + static_cast<std::size_t>(idx[a]);
  return p;
}

double Grid::max_wavenumber_squared() const {
  const double k0 = 2.0 * std::numbers::pi / length;
  double s = 0.0;
  for (int a : n)
    if (a > 1) s += std::pow(k0 * (a / 2), 2);
  return s;
}

double Grid::min_positive_eigenvalue() const { return std::pow(2.0 * std::numbers::pi / length, 2); }

void validate(const Grid& g, std::size_t max_points) {
  int active = 0;
  for (int a : g.n) {
    if (a == 1) continue;
    if (a < 4 || (a & (a - 1)) != 0)
      throw ConfigError("grid: points per axis must be 1 or a power of two >= 4, got " + std::to_string(a));
    ++active;
  }
  if (active == 0) throw ConfigError("grid: at least one axis must be resolved");
  if (!(g.length > 0.0)) throw ConfigError("grid: period must be positive");
  if (g.points() > max_points)
    throw ConfigError("grid: " + std::to_string(g.points()) + " points exceed the cap of " +
                      std::to_string(max_points));
}

std::string describe(const Grid& g) {
  std::ostringstream os;
  for (int a = 0; a < 6; ++a) os << (a ? "x" : "") << g.n[a];
  os << " L=" << g.length;
  return os.str();
}

forms6::Mat6 MetricField::value(std::size_t p) const {
  forms6::Mat6 m;
  for (int i = 0; i < 6; ++i)
    for (int j = i; j < 6; ++j) m(i, j) = m(j, i) = at(sym_index(i, j), p);
  return m;
}

void MetricField::set(std::size_t p, const forms6::Mat6& g) {
  for (int i = 0; i < 6; ++i)
    for (int j = i; j < 6; ++j) at(sym_index(i, j), p) = 0.5 * (g(i, j) + g(j, i));
}

forms6::Mat6 AcStructureField::value(std::size_t p) const {
  forms6::Mat6 m;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) m(i, j) = at(6 * i + j, p);
  return m;
}

void AcStructureField::set(std::size_t p, const forms6::Mat6& j) {
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b) at(6 * a + b, p) = j(a, b);
}

// ---------------------------------------------------------------------------
// FFT plans and tables.

namespace {

struct Plan {
  Grid grid;
  std::vector<int> dims;
  std::size_t real_size = 0;
  std::size_t complex_size = 0;
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
  SpectralTables tables;
};

std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

using PlanKey = std::pair<std::array<int, 6>, double>;

std::map<PlanKey, std::unique_ptr<Plan>>& plan_cache() {
  static std::map<PlanKey, std::unique_ptr<Plan>> cache;
  return cache;
}

void build_tables(Plan& plan) {
  const Grid& g = plan.grid;
  std::vector<int> axes;
  for (int a = 0; a < 6; ++a)
    if (g.n[a] > 1) axes.push_back(a);
  const int rank = static_cast<int>(axes.size());
  SpectralTables& t = plan.tables;
  t.size = plan.complex_size;
  for (auto& v : t.dk) v.assign(t.size, 0.0);
  t.ksq.assign(t.size, 0.0);
  t.weight.assign(t.size, 1.0);
  t.keep.assign(t.size, 1);
  t.mode.assign(t.size, {});
  const double k0 = 2.0 * std::numbers::pi / g.length;
  std::vector<int> sdims(rank);
  for (int r = 0; r < rank; ++r) sdims[r] = (r == rank - 1) ? g.n[axes[r]] / 2 + 1 : g.n[axes[r]];
  for (std::size_t s = 0; s < t.size; ++s) {
    std::size_t rest = s;
    for (int r = rank - 1; r >= 0; --r) {
      const int idx = static_cast<int>(rest % sdims[r]);
      rest /= sdims[r];
      const int n = g.n[axes[r]];
      const int m = (r == rank - 1) ? idx : (idx <= n / 2 ? idx : idx - n);
      const int a = axes[r];
      t.mode[s][a] = static_cast<std::int16_t>(m);
      const double k = k0 * m;
      t.ksq[s] += k * k;
      t.dk[a][s] = (std::abs(m) * 2 == n) ? 0.0 : k;
      if (std::abs(m) > n / 3) t.keep[s] = 0;
      if (r == rank - 1 && idx > 0 && idx * 2 < n) t.weight[s] = 2.0;
    }
  }
}

const Plan& plan_for(const Grid& g) {
  std::lock_guard<std::mutex> lock(plan_mutex());
  auto& cache = plan_cache();
  const PlanKey key{g.n, g.length};
  auto it = cache.find(key);
  if (it != cache.end()) return *it->second;
  validate(g, std::numeric_limits<std::size_t>::max());
  auto plan = std::make_unique<Plan>();
  plan->grid = g;
  for (int a = 0; a < 6; ++a)
    if (g.n[a] > 1) plan->dims.push_back(g.n[a]);
  plan->real_size = g.points();
  plan->complex_size = plan->real_size / plan->dims.back() * (plan->dims.back() / 2 + 1);
  std::vector<double> rbuf(plan->real_size);
  std::vector<fftw_complex> cbuf(plan->complex_size);
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  const int rank = static_cast<int>(plan->dims.size());
  plan->fwd = fftw_plan_dft_r2c(rank, plan->dims.data(), rbuf.data(), cbuf.data(), flags);
  plan->bwd = fftw_plan_dft_c2r(rank, plan->dims.data(), cbuf.data(), rbuf.data(), flags);
  if (!plan->fwd || !plan->bwd) throw Error("fftw: planning failed for grid " + describe(g));
  build_tables(*plan);
  const Plan& ref = *plan;
  cache.emplace(key, std::move(plan));
  return ref;
}

}  // namespace

const SpectralTables& tables(const Grid& g) { return plan_for(g).tables; }

namespace detail {

void forward_one(const Grid& g, const double* in, Complex* out) {
  const Plan& plan = plan_for(g);
  fftw_execute_dft_r2c(plan.fwd, const_cast<double*>(in), reinterpret_cast<fftw_complex*>(out));
  const double inv = 1.0 / double(plan.real_size);
  for (std::size_t i = 0; i < plan.complex_size; ++i) out[i] *= inv;
}

void inverse_one(const Grid& g, const Complex* in, double* out) {
  const Plan& plan = plan_for(g);
  thread_local std::vector<Complex> scratch;
  scratch.assign(in, in + plan.complex_size);
  fftw_execute_dft_c2r(plan.bwd, reinterpret_cast<fftw_complex*>(scratch.data()), out);
}

void warn_aliasing(const char* where, double fraction) {
  static std::atomic<bool> warned{false};
  if (!warned.exchange(true))
    std::cerr << "warning: " << where << ": " << fraction
              << " of the spectral energy lies outside the 2/3 band; results may be aliased\n";
}

}  // namespace detail

double l2_norm_raw(const Grid& g, const double* data, int ncomp) {
  const std::size_t n = g.points() * static_cast<std::size_t>(ncomp);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += data[i] * data[i];
  return std::sqrt(s * g.volume() / double(g.points()));
}

double evaluate(const Grid& g, const Complex* spectrum, const std::array<double, 6>& x) {
  const SpectralTables& t = tables(g);
  const double k0 = 2.0 * std::numbers::pi / g.length;
  // Per-axis phase tables e^{i m k0 x_a}.
  std::array<std::vector<Complex>, 6> phase;
  std::array<int, 6> offset{};
  for (int a = 0; a < 6; ++a) {
    const int n = g.n[a];
    offset[a] = n / 2;
    phase[a].resize(n + 1);
    for (int m = -n / 2; m <= n / 2; ++m) phase[a][m + n / 2] = std::polar(1.0, k0 * m * x[a]);
  }
  double s = 0.0;
  for (std::size_t i = 0; i < t.size; ++i) {
    if (spectrum[i] == Complex(0.0)) continue;
    Complex e = spectrum[i];
    for (int a = 0; a < 6; ++a)
      if (g.n[a] > 1) e *= phase[a][t.mode[i][a] + offset[a]];
    s += t.weight[i] * e.real();
  }
  return s;
}

void random_band_limited_raw(const Grid& g, std::uint64_t seed, int max_mode, double amplitude, bool zero_mean,
                             double* out, int ncomp) {
  const SpectralTables& t = tables(g);
  std::mt19937_64 rng(seed);
  // Per-mode spread chosen so the field has mean square ≈ amplitude².
  std::size_t count = 0;
  for (std::size_t i = 0; i < t.size; ++i) {
    bool ok = true;
    for (int a = 0; a < 6; ++a) {
      const int m = std::abs(t.mode[i][a]);
      if (m != 0 && (m > max_mode || 2 * m >= g.n[a])) ok = false;
    }
    if (ok) count += static_cast<std::size_t>(t.weight[i]) * 2;
  }
  std::normal_distribution<double> nd(0.0, amplitude / std::sqrt(double(std::max<std::size_t>(count, 1))));
  std::vector<Complex> spec(t.size);
  for (int c = 0; c < ncomp; ++c) {
    for (std::size_t i = 0; i < t.size; ++i) {
      bool ok = true;
      bool zero = true;
      for (int a = 0; a < 6; ++a) {
        const int m = std::abs(t.mode[i][a]);
        if (m == 0) continue;
        zero = false;
        if (m > max_mode || 2 * m >= g.n[a]) ok = false;
      }
      if (!ok || (zero && zero_mean)) {
        spec[i] = 0.0;
        continue;
      }
      const double re = nd(rng);
      const double im = zero ? 0.0 : nd(rng);
      spec[i] = Complex(re, im);
    }
    detail::inverse_one(g, spec.data(), out + c * g.points());
  }
}

// ---------------------------------------------------------------------------
// Geometry.

namespace {

std::string location(const Grid& g, std::size_t p) {
  const auto idx = g.unravel(p);
  std::ostringstream os;
  os << "(";
  for (int a = 0; a < 6; ++a) os << (a ? "," : "") << idx[a];
  os << ")";
  return os.str();
}

bool positive_at(const forms6::Mat6& m, double min_eigenvalue) {
  Eigen::LLT<forms6::Mat6> llt(m - min_eigenvalue * forms6::Mat6::Identity());
  return llt.info() == Eigen::Success;
}

}  // namespace

void check_positive_metric(const MetricField& g, double min_eigenvalue) {
  for (std::size_t p = 0; p < g.points(); ++p)
    if (!positive_at(g.value(p), min_eigenvalue))
      throw NotPositiveError("metric is not positive definite at grid point " + location(g.grid(), p));
}

ChristoffelField christoffel(const MetricField& g) {
  check_positive_metric(g);
  const Grid& grid = g.grid();
  const auto spec = forward(g);
  std::array<Field<21>, 6> dg;
  for (int a = 0; a < 6; ++a) dg[a] = grid.n[a] > 1 ? partial_from_spectrum(spec, a) : Field<21>(grid);
  ChristoffelField out(grid);
  parallel_for(grid.points(), [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) {
      const forms6::Mat6 ginv = g.value(p).inverse();
      // first[p][q][s] = ½(∂_p g_qs + ∂_q g_ps − ∂_s g_pq)
      for (int pp = 0; pp < 6; ++pp)
        for (int q = pp; q < 6; ++q) {
          std::array<double, 6> first{};
          for (int s = 0; s < 6; ++s)
            first[s] = 0.5 * (dg[pp].at(sym_index(q, s), p) + dg[q].at(sym_index(pp, s), p) -
                              dg[s].at(sym_index(pp, q), p));
          for (int k = 0; k < 6; ++k) {
            double v = 0.0;
            for (int s = 0; s < 6; ++s) v += ginv(k, s) * first[s];
            out.at(21 * k + sym_index(pp, q), p) = v;
          }
        }
    }
  });
  return out;
}

VectorField christoffel_trace(const MetricField& g) {
  const Grid& grid = g.grid();
  const std::size_t np = grid.points();
  Field<21> ginv(grid);
  for (std::size_t p = 0; p < np; ++p) {
    const forms6::Mat6 gi = g.value(p).inverse();
    for (int i = 0; i < 6; ++i)
      for (int j = i; j < 6; ++j) ginv.at(sym_index(i, j), p) = gi(i, j);
  }
  // A_s = g^{pq} ∂_p g_qs, B_s = ½ g^{pq} ∂_s g_pq, both accumulated per axis.
  VectorField acc(grid);
  const auto spec = forward(g);
  for (int a = 0; a < 6; ++a) {
    if (grid.n[a] == 1) continue;
    const Field<21> d = partial_from_spectrum(spec, a);
    parallel_for(np, [&](std::size_t b, std::size_t e) {
      for (std::size_t p = b; p < e; ++p) {
        double trace = 0.0;
        for (int i = 0; i < 6; ++i)
          for (int j = 0; j < 6; ++j) trace += ginv.at(sym_index(i, j), p) * d.at(sym_index(i, j), p);
        for (int s = 0; s < 6; ++s) {
          double v = 0.0;
          for (int q = 0; q < 6; ++q) v += ginv.at(sym_index(a, q), p) * d.at(sym_index(q, s), p);
          acc.at(s, p) += v;
        }
        acc.at(a, p) -= 0.5 * trace;
      }
    });
  }
  VectorField out(grid);
  for (std::size_t p = 0; p < np; ++p)
    for (int k = 0; k < 6; ++k) {
      double v = 0.0;
      for (int s = 0; s < 6; ++s) v += ginv.at(sym_index(k, s), p) * acc.at(s, p);
      out.at(k, p) = v;
    }
  return out;
}

NijenhuisField nijenhuis(const AcStructureField& j) {
  const Grid& grid = j.grid();
  const std::size_t np = grid.points();
  NijenhuisField out(grid);
  const auto spec = forward(j);
  for (int a = 0; a < 6; ++a) {
    if (grid.n[a] == 1) continue;
    const Field<36> d = partial_from_spectrum(spec, a);
    parallel_for(np, [&](std::size_t b, std::size_t e) {
      for (std::size_t p = b; p < e; ++p) {
        forms6::Mat6 jm, dj;
        for (int x = 0; x < 6; ++x)
          for (int y = 0; y < 6; ++y) {
            jm(x, y) = j.at(6 * x + y, p);
            dj(x, y) = d.at(6 * x + y, p);
          }
        const forms6::Mat6 m = jm * dj;
        for (int pos = 0; pos < 15; ++pos) {
          const int jj = forms6::kIndexList<2>[pos][0], kk = forms6::kIndexList<2>[pos][1];
          for (int i = 0; i < 6; ++i) {
            double v = jm(a, jj) * dj(i, kk) - jm(a, kk) * dj(i, jj);
            if (jj == a) v -= m(i, kk);
            if (kk == a) v += m(i, jj);
            out.at(15 * i + pos, p) += v;
          }
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Snapshots.

namespace {

constexpr char kMagic[4] = {'I', 'I', 'A', 'F'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kEndianTag = 0x01020304u;

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is, const std::string& path) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw ConfigError("snapshot: truncated header in " + path);
  return v;
}

}  // namespace

void write_snapshot_raw(const std::string& path, int degree, const Grid& g, const std::vector<double>& data) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ConfigError("snapshot: cannot open " + path + " for writing");
  os.write(kMagic, 4);
  put(os, kVersion);
  put(os, static_cast<std::int32_t>(degree));
  for (int a : g.n) put(os, static_cast<std::int32_t>(a));
  put(os, g.length);
  put(os, kEndianTag);
  os.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!os) throw ConfigError("snapshot: write failed for " + path);
}

std::pair<Grid, std::vector<double>> read_snapshot_raw(const std::string& path, int degree) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("snapshot: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) throw ConfigError("snapshot: bad magic in " + path);
  if (get<std::uint32_t>(is, path) != kVersion) throw ConfigError("snapshot: unsupported version in " + path);
  const int deg = get<std::int32_t>(is, path);
  if (deg != degree)
    throw ConfigError("snapshot: " + path + " holds a " + std::to_string(deg) + "-form, expected " +
                      std::to_string(degree));
  Grid g;
  for (int& a : g.n) a = get<std::int32_t>(is, path);
  g.length = get<double>(is, path);
  if (get<std::uint32_t>(is, path) != kEndianTag) throw ConfigError("snapshot: endianness mismatch in " + path);
  validate(g, std::numeric_limits<std::size_t>::max());
  const std::size_t count = g.points() * static_cast<std::size_t>(forms6::binomial(6, degree));
  std::vector<double> data(count);
  is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!is) throw ConfigError("snapshot: truncated payload in " + path);
  return {g, std::move(data)};
}

}  // namespace iia::lattice
