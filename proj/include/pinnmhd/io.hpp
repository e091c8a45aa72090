#ifndef PINNMHD_IO_HPP
#define PINNMHD_IO_HPP

// Case files, checkpoints and plot-ready exports.
//
// Case file: sectioned text, '#' starts a comment.
//
//   [global]     psi_b = <Wb>, n_fp = <int>, M = <int>, N = <int>
//   [boundary]   rows "m n R_b Z_b"
//   [axis]       rows "n R_a Z_a" (optional)
//   [profiles]   pressure = c0 c1 ...   iota = c0 c1 ...   (powers of s)
//   [solver]     key = value overrides of SolverConfig
//
// Mode convention: X = sum X_mn cos/sin(m theta - n N_FP zeta), n in units of
// the field period, m = 0 rows only with n >= 0.

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "pinnmhd/netfield.hpp"
#include "pinnmhd/solver.hpp"
#include "pinnmhd/spectral.hpp"

namespace pinnmhd::io {

class ParseError : public std::invalid_argument {
 public:
  ParseError(const std::string& source, int line, const std::string& msg)
      : std::invalid_argument(source + ":" + std::to_string(line) + ": " + msg),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct CaseFile {
  EquilibriumInput input;
  SolverConfig config;
};

// Shortest round-trip decimal, independent of the global locale.
inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (b != e && *b == '+') ++b;
  const auto r = std::from_chars(b, e, out);
  return r.ec == std::errc() && r.ptr == e;
}

}  // namespace detail

inline CaseFile dshape_case() {
  CaseFile c;
  EquilibriumInput& in = c.input;
  in.M = 11;
  in.N = 0;
  in.n_fp = 1;
  in.r_boundary.assign(in.mode_count(), 0.0);
  in.z_boundary.assign(in.mode_count(), 0.0);
  in.r_boundary[0] = 3.51;
  in.r_boundary[1] = -1.0;
  in.r_boundary[2] = 0.106;
  in.z_boundary[1] = 1.47;
  in.z_boundary[2] = 0.16;
  // p = 1600 (1 - s)^2, iota = 1 - 0.67 s
  in.pressure.coefficients = {1600.0, -3200.0, 1600.0};
  in.iota.coefficients = {1.0, -0.67};
  in.psi_b = 1.0;
  c.config.width = 8;
  c.config.n_rho = 50;
  return c;
}

// Same case at poloidal resolution M: boundary rows with m >= M are dropped.
inline EquilibriumInput with_poloidal_resolution(const EquilibriumInput& in,
                                                 int M) {
  if (M < 1) throw std::invalid_argument("poloidal resolution must be >= 1");
  EquilibriumInput r = in;
  r.M = M;
  const ModeSet old_set = in.modes(Coordinate::kR);
  const ModeSet new_set = r.modes(Coordinate::kR);
  r.r_boundary.assign(new_set.size(), 0.0);
  r.z_boundary.assign(new_set.size(), 0.0);
  for (std::size_t k = 0; k < old_set.size(); ++k) {
    const Mode md = old_set[k];
    if (md.m >= M) continue;
    const auto j = static_cast<std::size_t>(new_set.index_of(md.m, md.n));
    r.r_boundary[j] = in.r_boundary[k];
    r.z_boundary[j] = in.z_boundary[k];
  }
  r.validate();
  return r;
}

namespace detail {

using SolverSetter = std::function<bool(SolverConfig&, std::string_view)>;

template <class T>
SolverSetter setter(T SolverConfig::*field) {
  return [field](SolverConfig& c, std::string_view v) {
    return parse_number(v, c.*field);
  };
}

template <class S, class T>
SolverSetter nested(S SolverConfig::*outer, T S::*inner) {
  return [outer, inner](SolverConfig& c, std::string_view v) {
    return parse_number(v, (c.*outer).*inner);
  };
}

struct SolverKey {
  const char* name;
  SolverSetter set;
  std::function<std::string(const SolverConfig&)> get;
};

template <class T>
std::string fmt(T v) {
  if constexpr (std::is_floating_point_v<T>)
    return format_double(v);
  else
    return std::to_string(v);
}

inline const std::vector<SolverKey>& solver_keys() {
  static const std::vector<SolverKey> keys = [] {
    std::vector<SolverKey> k;
    auto add = [&](const char* name, auto field) {
      k.push_back({name, setter(field),
                   [field](const SolverConfig& c) { return fmt(c.*field); }});
    };
    auto add_nested = [&](const char* name, auto outer, auto inner) {
      k.push_back({name, nested(outer, inner),
                   [outer, inner](const SolverConfig& c) {
                     return fmt((c.*outer).*inner);
                   }});
    };
    add("width", &SolverConfig::width);
    add("surfaces", &SolverConfig::n_rho);
    add("n_theta", &SolverConfig::n_theta);
    add("n_zeta", &SolverConfig::n_zeta);
    add("seed", &SolverConfig::seed);
    add_nested("adamw_step", &SolverConfig::adamw, &AdamWSettings::step);
    add_nested("adamw_beta1", &SolverConfig::adamw, &AdamWSettings::beta1);
    add_nested("adamw_beta2", &SolverConfig::adamw, &AdamWSettings::beta2);
    add_nested("adamw_epsilon", &SolverConfig::adamw, &AdamWSettings::epsilon);
    add_nested("adamw_weight_decay", &SolverConfig::adamw,
               &AdamWSettings::weight_decay);
    add_nested("adamw_iterations", &SolverConfig::adamw,
               &AdamWSettings::max_iterations);
    add_nested("bfgs_iterations", &SolverConfig::bfgs,
               &BfgsSettings::max_iterations);
    add_nested("bfgs_c1", &SolverConfig::bfgs, &BfgsSettings::c1);
    add_nested("bfgs_c2", &SolverConfig::bfgs, &BfgsSettings::c2);
    add_nested("bfgs_max_line_search", &SolverConfig::bfgs,
               &BfgsSettings::max_line_search);
    add("param_tolerance", &SolverConfig::param_tolerance);
    add("grad_tolerance", &SolverConfig::grad_tolerance);
    add("target_fvol", &SolverConfig::target_fvol);
    add("target_rtol", &SolverConfig::target_rtol);
    add("target_cadence", &SolverConfig::target_cadence);
    add("checkpoint_every", &SolverConfig::checkpoint_every);
    add("threads", &SolverConfig::threads);
    return k;
  }();
  return keys;
}

}  // namespace detail

inline CaseFile parse_case_text(std::string_view text,
                                const std::string& source = "<case>") {
  struct BoundaryRow {
    int line, m, n;
    double r, z;
  };
  struct AxisRow {
    int line, n;
    double r, z;
  };
  std::vector<BoundaryRow> boundary;
  std::vector<AxisRow> axis;
  CaseFile out;
  bool have_global = false;
  bool have_psi = false, have_nfp = false, have_m = false, have_n = false;
  std::string section;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view raw = text.substr(
        pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos)
      raw = raw.substr(0, hash);
    const std::string_view line = detail::trim(raw);
    if (line.empty()) continue;
    auto fail = [&](const std::string& msg) {
      throw ParseError(source, line_no, msg);
    };
    if (line.front() == '[') {
      if (line.back() != ']') fail("malformed section header");
      section = std::string(line.substr(1, line.size() - 2));
      if (section != "global" && section != "boundary" && section != "axis" &&
          section != "profiles" && section != "solver")
        fail("unknown section [" + section + "]");
      if (section == "global") have_global = true;
      continue;
    }
    if (section.empty()) fail("content before the first section");

    if (section == "boundary" || section == "axis") {
      const auto f = detail::split_ws(line);
      if (section == "boundary") {
        BoundaryRow r{line_no, 0, 0, 0.0, 0.0};
        if (f.size() != 4 || !detail::parse_number(f[0], r.m) ||
            !detail::parse_number(f[1], r.n) ||
            !detail::parse_number(f[2], r.r) ||
            !detail::parse_number(f[3], r.z))
          fail("boundary rows are 'm n R_b Z_b'");
        boundary.push_back(r);
      } else {
        AxisRow r{line_no, 0, 0.0, 0.0};
        if (f.size() != 3 || !detail::parse_number(f[0], r.n) ||
            !detail::parse_number(f[1], r.r) ||
            !detail::parse_number(f[2], r.z))
          fail("axis rows are 'n R_a Z_a'");
        axis.push_back(r);
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail("expected 'key = value'");
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string_view value = detail::trim(line.substr(eq + 1));
    if (section == "global") {
      bool ok = false;
      if (key == "psi_b") ok = have_psi = detail::parse_number(value, out.input.psi_b);
      else if (key == "n_fp") ok = have_nfp = detail::parse_number(value, out.input.n_fp);
      else if (key == "M") ok = have_m = detail::parse_number(value, out.input.M);
      else if (key == "N") ok = have_n = detail::parse_number(value, out.input.N);
      else fail("unknown key '" + key + "' in [global]");
      if (!ok) fail("bad value for '" + key + "'");
    } else if (section == "profiles") {
      Polynomial* poly = key == "pressure" ? &out.input.pressure
                         : key == "iota"   ? &out.input.iota
                                           : nullptr;
      if (poly == nullptr) fail("unknown key '" + key + "' in [profiles]");
      poly->coefficients.clear();
      for (const auto tok : detail::split_ws(value)) {
        double c = 0.0;
        if (!detail::parse_number(tok, c)) fail("bad coefficient for '" + key + "'");
        poly->coefficients.push_back(c);
      }
    } else {  // solver
      const auto& keys = detail::solver_keys();
      const auto it = std::find_if(keys.begin(), keys.end(), [&](const auto& k) {
        return key == k.name;
      });
      if (it == keys.end()) fail("unknown key '" + key + "' in [solver]");
      if (!it->set(out.config, value)) fail("bad value for '" + key + "'");
    }
  }

  if (!have_global) throw ParseError(source, line_no, "missing [global] section");
  if (!have_psi || !have_nfp || !have_m || !have_n)
    throw ParseError(source, line_no, "[global] needs psi_b, n_fp, M and N");
  EquilibriumInput& in = out.input;
  if (in.M < 1 || in.N < 0 || in.n_fp < 1)
    throw ParseError(source, line_no, "invalid M, N or n_fp");
  const ModeSet modes = in.modes(Coordinate::kR);
  in.r_boundary.assign(in.mode_count(), 0.0);
  in.z_boundary.assign(in.mode_count(), 0.0);
  for (const auto& r : boundary) {
    if (r.m < 0 || r.m >= in.M)
      throw ParseError(source, r.line,
                       "boundary mode m=" + std::to_string(r.m) +
                           " is not below M=" + std::to_string(in.M));
    if (std::abs(r.n) > in.N)
      throw ParseError(source, r.line,
                       "boundary mode |n|=" + std::to_string(std::abs(r.n)) +
                           " exceeds N=" + std::to_string(in.N));
    if (r.m == 0 && r.n < 0)
      throw ParseError(source, r.line, "m=0 rows need n >= 0");
    if (r.m == 0 && r.n == 0 && r.z != 0.0)
      throw ParseError(source, r.line, "Z_b(0,0) must be 0");
    const auto k = static_cast<std::size_t>(modes.index_of(r.m, r.n));
    in.r_boundary[k] = r.r;
    in.z_boundary[k] = r.z;
  }
  if (!axis.empty()) {
    in.r_axis.assign(in.N + 1, 0.0);
    in.z_axis.assign(in.N + 1, 0.0);
    for (const auto& a : axis) {
      if (a.n < 0 || a.n > in.N)
        throw ParseError(source, a.line, "axis mode n out of range");
      in.r_axis[a.n] = a.r;
      in.z_axis[a.n] = a.z;
    }
  }
  try {
    in.validate();
    out.config.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(source, line_no, e.what());
  }
  return out;
}

inline CaseFile parse_case(const std::string& path_or_name) {
  if (path_or_name == "dshape") return dshape_case();
  std::ifstream f(path_or_name, std::ios::binary);
  if (!f) throw std::invalid_argument("cannot read case file '" + path_or_name + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_case_text(ss.str(), path_or_name);
}

inline std::string write_case(const CaseFile& c) {
  const EquilibriumInput& in = c.input;
  std::ostringstream o;
  o << "[global]\n"
    << "psi_b = " << format_double(in.psi_b) << "\n"
    << "n_fp = " << in.n_fp << "\n"
    << "M = " << in.M << "\n"
    << "N = " << in.N << "\n\n[boundary]\n# m n R_b Z_b\n";
  const ModeSet modes = in.modes(Coordinate::kR);
  for (std::size_t k = 0; k < modes.size(); ++k) {
    if (in.r_boundary[k] == 0.0 && in.z_boundary[k] == 0.0) continue;
    o << modes[k].m << ' ' << modes[k].n << ' ' << format_double(in.r_boundary[k])
      << ' ' << format_double(in.z_boundary[k]) << "\n";
  }
  if (in.has_axis()) {
    o << "\n[axis]\n# n R_a Z_a\n";
    for (int n = 0; n <= in.N; ++n)
      o << n << ' ' << format_double(in.r_axis[n]) << ' '
        << format_double(in.z_axis[n]) << "\n";
  }
  auto poly = [&](const Polynomial& p) {
    std::string s;
    for (double v : p.coefficients) s += ' ' + format_double(v);
    return s;
  };
  o << "\n[profiles]\npressure =" << poly(in.pressure) << "\n"
    << "iota =" << poly(in.iota) << "\n\n[solver]\n";
  for (const auto& k : detail::solver_keys())
    o << k.name << " = " << k.get(c.config) << "\n";
  return o.str();
}

// 64-bit FNV-1a.
inline std::uint64_t digest(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

inline constexpr char kCheckpointMagic[8] = {'P', 'I', 'N', 'N', 'M', 'H', 'D', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  CaseFile case_file;
  NetParams params;
  std::uint64_t iteration = 0;
};

namespace detail {

template <class T>
void put_le(std::string& buf, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(bytes, bytes + sizeof(T));
  buf.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(std::string_view buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size())
    throw std::invalid_argument("truncated checkpoint");
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, buf.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(bytes, bytes + sizeof(T));
  pos += sizeof(T);
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

}  // namespace detail

// Layout (little endian): magic[8], u32 version, u64 digest of the case text,
// u64 iteration, u32 width, u32 outputs, u64 case length, case bytes,
// u64 parameter count, f64 parameters.
// The worker-thread count is left out (stored as the default) so that runs
// differing only in parallelism write identical files.
inline std::string encode_checkpoint(const CaseFile& c, const NetParams& p,
                                     std::uint64_t iteration) {
  CaseFile stored = c;
  stored.config.threads = SolverConfig{}.threads;
  const std::string text = write_case(stored);
  std::string buf(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put_le(buf, kCheckpointVersion);
  detail::put_le(buf, digest(text));
  detail::put_le(buf, iteration);
  detail::put_le(buf, static_cast<std::uint32_t>(p.layout.width));
  detail::put_le(buf, static_cast<std::uint32_t>(p.layout.outputs));
  detail::put_le(buf, static_cast<std::uint64_t>(text.size()));
  buf += text;
  detail::put_le(buf, static_cast<std::uint64_t>(p.data.size()));
  for (double v : p.data) detail::put_le(buf, v);
  return buf;
}

inline Checkpoint decode_checkpoint(std::string_view buf) {
  if (buf.size() < 8 || std::memcmp(buf.data(), kCheckpointMagic, 8) != 0)
    throw std::invalid_argument("not a checkpoint file");
  std::size_t pos = 8;
  if (detail::get_le<std::uint32_t>(buf, pos) != kCheckpointVersion)
    throw std::invalid_argument("unsupported checkpoint version");
  const auto dig = detail::get_le<std::uint64_t>(buf, pos);
  Checkpoint ck;
  ck.iteration = detail::get_le<std::uint64_t>(buf, pos);
  const auto width = detail::get_le<std::uint32_t>(buf, pos);
  const auto outputs = detail::get_le<std::uint32_t>(buf, pos);
  const auto len = detail::get_le<std::uint64_t>(buf, pos);
  if (pos + len > buf.size()) throw std::invalid_argument("truncated checkpoint");
  const std::string_view text = buf.substr(pos, len);
  pos += len;
  if (digest(text) != dig) throw std::invalid_argument("checkpoint digest mismatch");
  ck.case_file = parse_case_text(text, "<checkpoint>");
  ck.params.layout = {static_cast<int>(width), static_cast<int>(outputs)};
  const auto count = detail::get_le<std::uint64_t>(buf, pos);
  if (count != ck.params.layout.total() ||
      outputs != ck.case_file.input.mode_count())
    throw std::invalid_argument("checkpoint parameter layout mismatch");
  ck.params.data.resize(count);
  for (auto& v : ck.params.data) v = detail::get_le<double>(buf, pos);
  if (pos != buf.size()) throw std::invalid_argument("trailing bytes after checkpoint");
  return ck;
}

inline void write_file(const std::filesystem::path& path, std::string_view data) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  f.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!f) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::invalid_argument("cannot read '" + path.string() + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void save_checkpoint(const std::filesystem::path& path, const CaseFile& c,
                            const NetParams& p, std::uint64_t iteration) {
  write_file(path, encode_checkpoint(c, p, iteration));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

// ---------------------------------------------------------------------------
// Poincare sections and straight-field-line angle contours

struct PoincareRow {
  int surface = 0;
  double rho = 0.0;
  double theta = 0.0;
  double R = 0.0;
  double Z = 0.0;
};

struct ThetaStarRow {
  double target = 0.0;
  double rho = 0.0;
  double theta = 0.0;
  double R = 0.0;
  double Z = 0.0;
};

struct PoincareExport {
  std::vector<PoincareRow> surfaces;
  std::vector<ThetaStarRow> theta_star;
};

// n equally spaced surfaces ending at the boundary: rho = k/n, k = 1..n.
inline std::vector<double> default_surfaces(int n = 10) {
  std::vector<double> r(n);
  for (int k = 1; k <= n; ++k) r[k - 1] = static_cast<double>(k) / n;
  return r;
}

// Closed polylines of R, Z at fixed zeta; each surface repeats its first
// point at theta = 2 pi.
inline std::vector<PoincareRow> poincare_section(const NetParams& params,
                                                 const EquilibriumInput& input,
                                                 double zeta,
                                                 std::span<const double> rhos,
                                                 int theta_samples = 256) {
  if (rhos.empty()) throw std::invalid_argument("empty surface list");
  if (theta_samples < 3) throw std::invalid_argument("need >= 3 theta samples");
  std::vector<double> sorted(rhos.begin(), rhos.end());
  std::sort(sorted.begin(), sorted.end());
  const ModeSet rs = input.modes(Coordinate::kR);
  const ModeSet zs = input.modes(Coordinate::kZ);
  std::vector<PoincareRow> rows;
  for (std::size_t s = 0; s < sorted.size(); ++s) {
    const double rho = sorted[s];
    if (!(rho > 0.0 && rho <= 1.0))
      throw std::invalid_argument("surfaces must lie in (0, 1]");
    const auto modes = mode_values(params, input, rho);
    for (int i = 0; i <= theta_samples; ++i) {
      const double th = 2.0 * std::numbers::pi * (i % theta_samples) / theta_samples;
      rows.push_back({static_cast<int>(s), rho,
                      i == theta_samples ? 2.0 * std::numbers::pi : th,
                      evaluate(rs, modes[0], th, zeta),
                      evaluate(zs, modes[2], th, zeta)});
    }
  }
  return rows;
}

class AngleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Solves theta + lambda(theta) = target on one surface given lambda's modes.
// Requires 1 + d_theta lambda > 0 over the surface.
inline double solve_theta(const ModeSet& sine_modes,
                          std::span<const double> lambda, double target,
                          double zeta, double lambda_bound) {
  auto g = [&](double th) {
    const auto [l, dl] = evaluate_with_theta(sine_modes, lambda, th, zeta);
    return std::pair{th + l - target, 1.0 + dl};
  };
  double lo = target - lambda_bound - 1e-3;
  double hi = target + lambda_bound + 1e-3;
  double th = target;
  for (int it = 0; it < 200; ++it) {
    const auto [v, dv] = g(th);
    if (std::abs(v) <= 1e-14) return th;
    if (v > 0.0) hi = th; else lo = th;
    double next = dv > 0.0 ? th - v / dv : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == th) return th;
    th = next;
  }
  return th;
}

// Arcs of constant theta* = theta + lambda from axis to boundary at fixed zeta.
inline std::vector<ThetaStarRow> theta_star_contours(
    const NetParams& params, const EquilibriumInput& input,
    std::span<const double> targets, double zeta, int rho_samples = 50) {
  if (rho_samples < 2) throw std::invalid_argument("need >= 2 radial samples");
  const ModeSet rs = input.modes(Coordinate::kR);
  const ModeSet ss = input.modes(Coordinate::kZ);
  std::vector<ThetaStarRow> rows;
  const int check = std::max(64, 16 * input.M);
  for (int k = 0; k < rho_samples; ++k) {
    const double rho = static_cast<double>(k) / (rho_samples - 1);
    const auto modes = mode_values(params, input, rho);
    const auto& lam = modes[1];
    double bound = 0.0;
    for (int i = 0; i < check; ++i) {
      const double th = 2.0 * std::numbers::pi * i / check;
      const auto [l, dl] = evaluate_with_theta(ss, lam, th, zeta);
      if (!(1.0 + dl > 0.0))
        throw AngleError("theta + lambda is not monotone on surface rho=" +
                         format_double(rho));
      bound = std::max(bound, std::abs(l));
    }
    for (double t : targets) {
      const double th = solve_theta(ss, lam, t, zeta, bound);
      rows.push_back({t, rho, th, evaluate(rs, modes[0], th, zeta),
                      evaluate(ss, modes[2], th, zeta)});
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return a.target < b.target;
  });
  return rows;
}

inline std::vector<double> default_theta_star_targets(int n = 8) {
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) t[i] = 2.0 * std::numbers::pi * i / n;
  return t;
}

// True when any two distinct closed polylines of the section cross.
inline bool surfaces_intersect(std::span<const PoincareRow> rows) {
  std::map<int, std::vector<std::array<double, 2>>> lines;
  for (const auto& r : rows) lines[r.surface].push_back({r.R, r.Z});
  std::vector<const std::vector<std::array<double, 2>>*> ls;
  for (const auto& [k, v] : lines) ls.push_back(&v);
  for (std::size_t a = 0; a < ls.size(); ++a)
    for (std::size_t b = a + 1; b < ls.size(); ++b)
      for (std::size_t i = 0; i + 1 < ls[a]->size(); ++i)
        for (std::size_t j = 0; j + 1 < ls[b]->size(); ++j)
          if (pinnmhd::detail::segments_cross((*ls[a])[i], (*ls[a])[i + 1],
                                              (*ls[b])[j], (*ls[b])[j + 1]))
            return true;
  return false;
}

// ---------------------------------------------------------------------------
// Delimited text exports

class Table {
 public:
  explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}
  template <class... Cells>
  void row(const Cells&... cells) {
    std::vector<std::string> r;
    (r.push_back(cell(cells)), ...);
    if (r.size() != header_.size()) throw std::logic_error("row width mismatch");
    rows_.push_back(std::move(r));
  }
  std::size_t columns() const { return header_.size(); }
  std::string str() const {
    std::string o;
    append(o, header_);
    for (const auto& r : rows_) append(o, r);
    return o;
  }

 private:
  static std::string cell(double v) { return format_double(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(const char* v) { return v; }
  static void append(std::string& o, const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) o += ',';
      o += r[i];
    }
    o += '\n';
  }
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

inline Table poincare_table(std::span<const PoincareRow> rows) {
  Table t({"surface", "rho", "theta", "R", "Z"});
  for (const auto& r : rows) t.row(r.surface, r.rho, r.theta, r.R, r.Z);
  return t;
}

inline Table theta_star_table(std::span<const ThetaStarRow> rows) {
  Table t({"theta_star", "rho", "theta", "R", "Z"});
  for (const auto& r : rows) t.row(r.target, r.rho, r.theta, r.R, r.Z);
  return t;
}

inline Table history_table(std::span<const HistoryEntry> h) {
  Table t({"iteration", "stage", "loss"});
  for (const auto& e : h) t.row(e.iteration, e.stage, e.loss);
  return t;
}

inline Table timing_table(std::span<const HistoryEntry> h) {
  Table t({"iteration", "stage", "wall_seconds"});
  for (const auto& e : h) t.row(e.iteration, e.stage, e.wall_seconds);
  return t;
}

inline Table profile_table(std::span<const double> rho,
                           std::span<const double> f_norm) {
  Table t({"rho", "f_norm_surface_average"});
  for (std::size_t j = 0; j < rho.size(); ++j) t.row(rho[j], f_norm[j]);
  return t;
}

// Spectral width of the R, Z modes on each collocation surface.
inline Table spectral_width_table(const NetParams& params,
                                  const EquilibriumInput& input,
                                  std::span<const double> rho) {
  Table t({"rho", "spectral_width"});
  for (double r : rho) {
    const ModeProfiles p = mode_profiles(params, input, r);
    t.row(r, spectral_width(p.r, p.z));
  }
  return t;
}

struct ExportOptions {
  double zeta = 0.0;
  std::vector<double> surfaces = default_surfaces();
  int theta_samples = 256;
  std::vector<double> theta_star_targets = default_theta_star_targets();
  int theta_star_rho_samples = 50;
};

inline nlohmann::json summary_json(const Solution& sol, const Metrics& m) {
  nlohmann::json j;
  j["f_vol_norm"] = sol.f_vol_norm;
  j["termination"] = to_string(sol.reason);
  j["parameter_count"] = sol.params.data.size();
  j["width"] = sol.params.layout.width;
  j["modes_per_coordinate"] = sol.params.layout.outputs;
  j["adamw_iterations"] = sol.adamw_iterations;
  j["bfgs_iterations"] = sol.bfgs_iterations;
  j["final_loss"] = sol.history.empty() ? 0.0 : sol.history.back().loss;
  j["volume"] = m.volume;
  j["beta"] = m.beta;
  j["seed"] = sol.config.seed;
  if (!sol.diagnostic.empty()) j["diagnostic"] = sol.diagnostic;
  return j;
}

// Writes every plot-ready table plus summary.json into `dir`.
inline void export_metrics(const Solution& sol, const std::filesystem::path& dir,
                           const ExportOptions& opt = {}) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create '" + dir.string() + "'");
  const CollocationGrid grid = sol.config.grid(sol.input);
  const Metrics m = compute_metrics(sol.params, sol.input, grid);
  write_file(dir / "fnorm_profile.csv", profile_table(sol.rho, sol.f_norm_profile).str());
  write_file(dir / "history.csv", history_table(sol.history).str());
  write_file(dir / "timing.csv", timing_table(sol.history).str());
  write_file(dir / "spectral_width.csv",
             spectral_width_table(sol.params, sol.input, sol.rho).str());
  const auto section =
      poincare_section(sol.params, sol.input, opt.zeta, opt.surfaces, opt.theta_samples);
  write_file(dir / "poincare.csv", poincare_table(section).str());
  const auto contours = theta_star_contours(sol.params, sol.input, opt.theta_star_targets,
                                            opt.zeta, opt.theta_star_rho_samples);
  write_file(dir / "theta_star.csv", theta_star_table(contours).str());
  write_file(dir / "summary.json", summary_json(sol, m).dump(2) + "\n");
}

}  // namespace pinnmhd::io

#endif  // PINNMHD_IO_HPP
