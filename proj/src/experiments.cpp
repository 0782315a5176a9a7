#include "magspec/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

namespace magspec {

using json = nlohmann::ordered_json;

namespace {

enum class KeyKind { Double, Count, U64, Bool, List, Text, Choice, OptDouble };

struct KeySpec {
  const char* key;
  const char* fallback;
  KeyKind kind;
  std::vector<std::string> choices = {};
};

const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> table = {
      {"model.omega", "1", KeyKind::Double},
      {"model.b_field", "1", KeyKind::Double},
      {"model.lambda", "-1", KeyKind::Double},
      {"model.kind", "delta", KeyKind::Choice, {"delta", "regular"}},
      {"model.potential_file", "", KeyKind::Text},
      {"model.interpolation", "linear", KeyKind::Choice, {"linear", "cubic"}},
      {"model.well_half_width", "1", KeyKind::Double},
      {"model.well_height", "1", KeyKind::Double},
      {"model.well_ramp", "0.001", KeyKind::Double},
      {"grid.lx", "12", KeyKind::Double},
      {"grid.ly", "12", KeyKind::Double},
      {"grid.h", "0.05", KeyKind::Double},
      {"grid.nx", "0", KeyKind::Count},
      {"grid.ny", "0", KeyKind::Count},
      {"grid.bc", "dirichlet", KeyKind::Choice, {"dirichlet", "neumann"}},
      {"solver.k", "4", KeyKind::Count},
      {"solver.tol", "1e-8", KeyKind::Double},
      {"solver.max_iter", "20000", KeyKind::Count},
      {"solver.krylov_dim", "0", KeyKind::Count},
      {"solver.seed", "1", KeyKind::U64},
      {"solver.method", "auto", KeyKind::Choice, {"auto", "lanczos", "shift_invert"}},
      {"solver.plain_limit", "20000", KeyKind::Count},
      {"solver.shift", "auto", KeyKind::OptDouble},
      {"solver.scheme", "peierls", KeyKind::Choice, {"peierls", "direct"}},
      {"solver.delta", "lattice", KeyKind::Choice, {"lattice", "node"}},
      {"solver.write_matrix", "false", KeyKind::Bool},
      {"experiment.lambda_list", "-1,-2,-3", KeyKind::List},
      {"experiment.ly_list", "8,16,32", KeyKind::List},
      {"experiment.sweep_lx", "4", KeyKind::Double},
      {"experiment.sweep_h", "0.05", KeyKind::Double},
      {"experiment.sweep_levels", "5", KeyKind::Count},
      {"experiment.max_unknowns", "1500000", KeyKind::Count},
      {"experiment.workers", "1", KeyKind::Count},
      {"experiment.drop", "0.5", KeyKind::Double},
      {"experiment.dive_floor", "-1", KeyKind::Double},
      {"experiment.flat_tol", "0.02", KeyKind::Double},
      {"experiment.critical_band", "0.02", KeyKind::Double},
      {"experiment.box_tol", "0.1", KeyKind::Double},
      {"experiment.band", "true", KeyKind::Bool},
      {"experiment.band_n", "40", KeyKind::Double},
      {"experiment.band_xi", "201", KeyKind::Count},
      {"experiment.band_h", "0.05", KeyKind::Double},
      {"experiment.landau_lowest", "8", KeyKind::Count},
      {"experiment.landau_levels", "2", KeyKind::Count},
      {"experiment.landau_per_level", "8", KeyKind::Count},
      {"experiment.landau_tol", "1e-3", KeyKind::Double},
      {"experiment.landau_window", "0.03", KeyKind::Double},
      {"experiment.landau_count", "false", KeyKind::Bool},
      {"experiment.construction", "subcritical", KeyKind::Choice,
       {"subcritical", "supercritical", "critical"}},
      {"experiment.mu", "2", KeyKind::Double},
      {"experiment.eps", "0.1", KeyKind::Double},
      {"experiment.k_list", "16,32,64", KeyKind::List},
      {"experiment.packet_h", "0.1", KeyKind::Double},
      {"experiment.alpha", "2", KeyKind::Double},
      {"experiment.m", "8", KeyKind::Double},
      {"experiment.chi_k_list", "30,100,300", KeyKind::List},
      {"experiment.chi_eps_max", "10", KeyKind::Double},
      {"experiment.n_k", "20", KeyKind::Double},
      {"experiment.n_list", "8,16,32", KeyKind::List},
      {"experiment.critical_hy", "0.05", KeyKind::Double},
      {"experiment.critical_nx", "601", KeyKind::Count},
      {"experiment.dump", "false", KeyKind::Bool},
      {"experiment.eta_list", "0.2,0.1,0.05", KeyKind::List},
      {"experiment.existence_k_list", "8,16,32,64,128,256", KeyKind::List},
      {"experiment.existence_h", "0.05", KeyKind::Double},
      {"experiment.existence_ly", "6", KeyKind::Double},
      {"experiment.existence_ramp", "0.5", KeyKind::Double},
      {"experiment.existence_tilde", "true", KeyKind::Bool},
      {"experiment.lambda_target", "none", KeyKind::OptDouble},
  };
  return table;
}

const KeySpec* find_key(const std::string& key) {
  for (const auto& k : key_table())
    if (key == k.key) return &k;
  return nullptr;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::optional<double> parse_double(const std::string& s) {
  const std::string t = trim(s);
  if (t.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = t.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<std::uint64_t> parse_u64(const std::string& s) {
  const std::string t = trim(s);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) return std::nullopt;
  return v;
}

std::optional<bool> parse_bool(const std::string& s) {
  const std::string t = trim(s);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  return std::nullopt;
}

std::optional<std::vector<double>> parse_list(const std::string& s) {
  std::vector<double> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto v = parse_double(item);
    if (!v) return std::nullopt;
    out.push_back(*v);
  }
  return out;
}

bool is_unset(const std::string& s) {
  const std::string t = trim(s);
  return t.empty() || t == "auto" || t == "none";
}

void check_value(const KeySpec& spec, const std::string& value) {
  bool ok = true;
  switch (spec.kind) {
    case KeyKind::Double: ok = parse_double(value).has_value(); break;
    case KeyKind::Count:
    case KeyKind::U64: ok = parse_u64(value).has_value(); break;
    case KeyKind::Bool: ok = parse_bool(value).has_value(); break;
    case KeyKind::List: ok = parse_list(value).has_value(); break;
    case KeyKind::Text: break;
    case KeyKind::Choice:
      ok = std::find(spec.choices.begin(), spec.choices.end(), trim(value)) != spec.choices.end();
      break;
    case KeyKind::OptDouble: ok = is_unset(value) || parse_double(value).has_value(); break;
  }
  if (!ok) throw Error(ErrorCode::ConfigError, "invalid value '" + value + "' for " + spec.key);
}

std::optional<double> opt_double(const RunConfig& c, const std::string& key) {
  const std::string& v = c.get(key);
  if (is_unset(v)) return std::nullopt;
  return *parse_double(v);
}

std::size_t count(const RunConfig& c, const std::string& key) {
  return static_cast<std::size_t>(c.get_u64(key));
}

}  // namespace

// ---------------------------------------------------------------------------------------------

RunConfig::RunConfig() {
  for (const auto& k : key_table()) values_[k.key] = k.fallback;
}

const std::vector<std::string>& RunConfig::known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& k : key_table()) out.emplace_back(k.key);
    std::sort(out.begin(), out.end());
    return out;
  }();
  return keys;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const KeySpec* spec = find_key(key);
  if (!spec) throw Error(ErrorCode::ConfigError, "unknown key '" + key + "'");
  check_value(*spec, value);
  values_[key] = trim(value);
}

RunConfig RunConfig::parse(std::string_view text) {
  RunConfig c;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::stringstream ss{std::string(text)};
  std::string line;
  while (std::getline(ss, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (!seen.insert(key).second)
      throw Error(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    c.set(key, value);
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  if (path.extension() == ".json") {
    json j;
    try {
      j = json::parse(buf.str());
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ConfigError, std::string("malformed run.json: ") + e.what());
    }
    if (!j.contains("config") || !j["config"].is_object())
      throw Error(ErrorCode::ConfigError, "run.json has no config object");
    RunConfig c;
    for (const auto& [k, v] : j["config"].items()) {
      if (!v.is_string()) throw Error(ErrorCode::ConfigError, "config value for " + k + " is not a string");
      c.set(k, v.get<std::string>());
    }
    return c;
  }
  return parse(buf.str());
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw Error(ErrorCode::ConfigError, "unknown key '" + key + "'");
  return it->second;
}

double RunConfig::get_double(const std::string& key) const {
  const auto v = parse_double(get(key));
  if (!v) throw Error(ErrorCode::ConfigError, key + " is not a number");
  return *v;
}

long long RunConfig::get_int(const std::string& key) const {
  return static_cast<long long>(get_u64(key));
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  const auto v = parse_u64(get(key));
  if (!v) throw Error(ErrorCode::ConfigError, key + " is not a nonnegative integer");
  return *v;
}

bool RunConfig::get_bool(const std::string& key) const {
  const auto v = parse_bool(get(key));
  if (!v) throw Error(ErrorCode::ConfigError, key + " is not a boolean");
  return *v;
}

std::vector<double> RunConfig::get_list(const std::string& key) const {
  const auto v = parse_list(get(key));
  if (!v) throw Error(ErrorCode::ConfigError, key + " is not a list of numbers");
  return *v;
}

std::string RunConfig::dump() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

ModelParams RunConfig::model() const {
  ModelParams p;
  p.omega = get_double("model.omega");
  p.b_field = get_double("model.b_field");
  p.lambda = get_double("model.lambda");
  p.kind = get("model.kind") == "regular" ? ModelKind::RegularV : ModelKind::DeltaLine;
  if (p.kind == ModelKind::RegularV) {
    const Interpolation interp =
        get("model.interpolation") == "cubic" ? Interpolation::CubicClamped : Interpolation::Linear;
    if (!get("model.potential_file").empty())
      p.potential = read_potential_file(get("model.potential_file"), interp);
    else
      p.potential = PotentialSpec::square_well(get_double("model.well_half_width"),
                                               get_double("model.well_height"),
                                               get_double("model.well_ramp"));
  }
  return p;
}

Grid2D RunConfig::grid() const {
  const auto bc = get("grid.bc") == "neumann" ? BoundaryCondition::Neumann : BoundaryCondition::Dirichlet;
  const double lx = get_double("grid.lx"), ly = get_double("grid.ly");
  const auto nx = count(*this, "grid.nx"), ny = count(*this, "grid.ny");
  if (nx > 0 || ny > 0) {
    if (nx == 0 || ny == 0) throw Error(ErrorCode::ConfigError, "set both grid.nx and grid.ny");
    return Grid2D::make(lx, ly, nx, ny, bc);
  }
  const double h = get_double("grid.h");
  return Grid2D::with_spacing(lx, ly, h, h, bc);
}

AssemblyOptions RunConfig::assembly() const {
  AssemblyOptions o;
  o.scheme = get("solver.scheme") == "direct" ? DiscretizationScheme::DirectCentral
                                              : DiscretizationScheme::Peierls;
  o.delta = get("solver.delta") == "node" ? DeltaScheme::NodeBump : DeltaScheme::LatticeMatched;
  return o;
}

LanczosOptions RunConfig::lanczos() const {
  LanczosOptions o;
  o.k = count(*this, "solver.k");
  o.tol = get_double("solver.tol");
  o.max_iter = count(*this, "solver.max_iter");
  o.krylov_dim = count(*this, "solver.krylov_dim");
  o.seed = get_u64("solver.seed");
  return o;
}

// ---------------------------------------------------------------------------------------------

SolvePolicy solve_policy(const RunConfig& config) {
  SolvePolicy p;
  p.lanczos = config.lanczos();
  p.method = config.get("solver.method");
  p.plain_limit = count(config, "solver.plain_limit");
  p.shift = opt_double(config, "solver.shift");
  return p;
}

SpectrumResult solve_lowest(const SparseHermitian& H, const SolvePolicy& policy) {
  const bool plain = policy.method == "lanczos" || (policy.method == "auto" && H.n <= policy.plain_limit);
  if (plain) return lowest_eigs(H, policy.lanczos);
  double sigma = 0.0;
  if (policy.shift) {
    sigma = *policy.shift;
  } else {
    LanczosOptions probe = policy.lanczos;
    probe.k = 1;
    probe.tol = 1e-3;
    probe.max_iter = std::min<std::size_t>(150, H.n - 1);
    probe.want_vectors = false;
    const SpectrumResult r = lowest_eigs(H, probe);
    const double theta = r.eigenvalues.empty() ? 0.0 : r.eigenvalues.front();
    sigma = theta - std::max(0.1, 0.05 * std::abs(theta));
  }
  return lowest_eigs_shift_invert(H, sigma, policy.lanczos);
}

// ---------------------------------------------------------------------------------------------

std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::Subcritical: return "Subcritical";
    case Regime::Critical: return "Critical";
    case Regime::Supercritical: return "Supercritical";
    case Regime::Undetermined: return "Undetermined";
  }
  return "?";
}

Regime classify(const std::vector<double>& e, double threshold, const ClassifierThresholds& t) {
  if (e.size() < 2) return Regime::Undetermined;
  bool dives = true, monotone = true;
  for (std::size_t i = 1; i < e.size(); ++i) {
    dives = dives && e[i - 1] - e[i] > t.drop;
    monotone = monotone && e[i] <= e[i - 1];
  }
  const double last = e.back(), change = std::abs(e.back() - e[e.size() - 2]);
  if (dives && last < t.dive_floor) return Regime::Supercritical;
  if (monotone && last >= -t.critical_band && last < t.critical_band) return Regime::Critical;
  if (change < t.flat_tol && last > t.flat_tol && last < threshold + t.box_tol)
    return Regime::Subcritical;
  return Regime::Undetermined;
}

std::vector<SweepRecord> run_sweep(const ModelParams& base, const std::vector<double>& lambdas,
                                   const std::vector<double>& heights, const SweepOptions& options,
                                   const SolvePolicy& policy, const AssemblyOptions& assembly) {
  require(!lambdas.empty() && !heights.empty(), ErrorCode::InvalidParameter,
          "lambda and height lists must be nonempty");
  require(std::is_sorted(heights.begin(), heights.end()), ErrorCode::InvalidParameter,
          "domain heights must be increasing");
  std::vector<SweepRecord> records(lambdas.size() * heights.size());
  for (std::size_t a = 0; a < lambdas.size(); ++a) {
    ModelParams p = base;
    p.lambda = lambdas[a];
    validate_params(p);
    for (std::size_t b = 0; b < heights.size(); ++b) {
      const Grid2D g = Grid2D::with_spacing(options.lx, heights[b], options.h, options.h);
      require(g.size() <= options.max_unknowns, ErrorCode::InvalidGrid,
              "sweep cell exceeds the unknown cap");
    }
  }

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::optional<Error> first_error;
  auto worker = [&] {
    for (std::size_t cell = next++; cell < records.size(); cell = next++) {
      try {
        const std::size_t a = cell / heights.size(), b = cell % heights.size();
        ModelParams p = base;
        p.lambda = lambdas[a];
        const Grid2D g = Grid2D::with_spacing(options.lx, heights[b], options.h, options.h);
        const SparseHermitian H = assemble(p, g, assembly);
        SolvePolicy pol = policy;
        pol.lanczos.k = std::max<std::size_t>(1, options.levels);
        pol.lanczos.want_vectors = false;
        const SpectrumResult r = solve_lowest(H, pol);
        if (!r.converged) throw Error(ErrorCode::NoConvergence, "sweep cell did not converge");
        SweepRecord& rec = records[cell];
        rec.lambda = p.lambda;
        rec.ly = heights[b];
        rec.unknowns = g.size();
        rec.ground_energy = r.eigenvalues.front();
        rec.residual = r.residual_norms.front();
        for (std::size_t i = 1; i < r.eigenvalues.size() && i <= 4; ++i)
          rec.next_energies.push_back(r.eigenvalues[i]);
      } catch (const Error& e) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = e;
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, records.size());
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (first_error) throw *first_error;

  const double threshold = base.transverse_frequency();
  for (std::size_t a = 0; a < lambdas.size(); ++a) {
    std::vector<double> ground;
    for (std::size_t b = 0; b < heights.size(); ++b)
      ground.push_back(records[a * heights.size() + b].ground_energy);
    const Regime r = classify(ground, threshold, options.thresholds);
    for (std::size_t b = 0; b < heights.size(); ++b) records[a * heights.size() + b].regime = r;
  }
  return records;
}

// ---------------------------------------------------------------------------------------------

LandauReport landau_levels(double b_field, const Grid2D& grid, const LandauOptions& options) {
  require(b_field > 0.0, ErrorCode::InvalidParameter, "Landau levels need B > 0");
  ModelParams p;
  p.omega = 0.0;
  p.b_field = b_field;
  p.lambda = 0.0;
  AssemblyOptions ao;
  ao.scheme = options.scheme;
  ao.allow_zero_omega = true;
  const SparseHermitian H = assemble(p, grid, ao);

  LandauReport rep;
  rep.b_field = b_field;
  LanczosOptions lo;
  lo.k = options.lowest;
  lo.tol = options.tol;
  lo.seed = options.seed;
  const SpectrumResult low = lowest_eigs_shift_invert(H, 0.95 * b_field, lo);
  rep.converged = low.converged;
  rep.lowest = low.eigenvalues;
  rep.lowest_residuals = low.residual_norms;
  for (double e : low.eigenvalues)
    rep.lowest_level.push_back(std::max(0, static_cast<int>(std::lround((e / b_field - 1.0) / 2.0))));

  for (std::size_t n = 0; n < options.levels; ++n) {
    LandauLevel level;
    level.n = static_cast<int>(n);
    level.target = (2.0 * static_cast<double>(n) + 1.0) * b_field;
    if (n == 0) {
      for (std::size_t i = 0; i < low.eigenvalues.size(); ++i)
        if (rep.lowest_level[i] == 0) {
          level.eigenvalues.push_back(low.eigenvalues[i]);
          level.residuals.push_back(low.residual_norms[i]);
        }
    } else {
      LanczosOptions near = lo;
      near.k = options.per_level;
      const SpectrumResult r = eigs_near(H, level.target, near);
      rep.converged = rep.converged && r.converged;
      level.eigenvalues = r.eigenvalues;
      level.residuals = r.residual_norms;
    }
    for (double e : level.eigenvalues)
      level.max_relative_deviation =
          std::max(level.max_relative_deviation, std::abs(e - level.target) / level.target);
    if (level.eigenvalues.empty()) level.max_relative_deviation = INFINITY;
    if (options.count_members)
      level.members = count_below(H, level.target * (1.0 + options.window)) -
                      count_below(H, level.target * (1.0 - options.window));
    rep.levels.push_back(std::move(level));
  }
  return rep;
}

// ---------------------------------------------------------------------------------------------

double square_well_critical_oracle(double omega, double half_width, double height) {
  require(omega > 0.0 && half_width > 0.0 && height > 0.0, ErrorCode::InvalidParameter,
          "oracle needs positive omega, width and height");
  // even zero-energy state: cos(q x) inside, exp(-omega |x|) outside
  const auto f = [&](double q) { return q * std::tan(q * half_width) - omega; };
  double lo = 0.0, hi = std::numbers::pi / (2.0 * half_width) * (1.0 - 1e-15);
  boost::uintmax_t iters = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(
      f, lo, hi, boost::math::tools::eps_tolerance<double>(52), iters);
  const double q = 0.5 * (a + b);
  return -(omega * omega + q * q) / height;
}

double coupling_for_bottom(double omega, const PotentialSpec& V, double target) {
  require(target > 0.0 && target < omega * omega, ErrorCode::InvalidParameter,
          "target bottom must lie in (0, omega^2)");
  const Grid1D grid = default_potential_grid(omega, V);
  const double lstar = critical_lambda(omega, V, CriticalOptions{grid, 1e-10});
  const std::optional<PotentialSpec> pot(V);
  const auto f = [&](double lambda) {
    return tridiag_eigenvalue(assemble_L(omega, lambda, grid, pot), 0) - target;
  };
  boost::uintmax_t iters = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(
      f, lstar, 0.0, f(lstar), f(0.0), boost::math::tools::eps_tolerance<double>(48), iters);
  return 0.5 * (a + b);
}

CriticalLambdaReport critical_lambda_report(const ModelParams& params,
                                            const std::vector<double>& eta_list,
                                            const std::optional<double>& well_half_width) {
  require(params.omega > 0.0, ErrorCode::RejectsNonpositiveOmega, "omega must be > 0");
  CriticalLambdaReport r;
  r.kind = params.kind;
  r.omega = params.omega;
  if (params.kind == ModelKind::DeltaLine) {
    r.lambda_star = -2.0 * params.omega;
    r.analytic = true;
    for (double eta : eta_list) {
      require(eta > 0.0, ErrorCode::InvalidParameter, "eta must be positive");
      const auto V = PotentialSpec::square_well(eta / 2.0, 1.0 / eta, 1e-4);
      r.eta.push_back(eta);
      r.eta_lambda.push_back(critical_lambda(params.omega, V));
    }
  } else {
    require(params.potential.has_value(), ErrorCode::MissingPotential, "regular model needs V");
    r.lambda_star = critical_lambda(params.omega, *params.potential);
    if (well_half_width)
      r.oracle = square_well_critical_oracle(params.omega, *well_half_width,
                                             params.potential->sup_norm());
  }
  return r;
}

// ---------------------------------------------------------------------------------------------

namespace {

double integrate(const std::function<double(double)>& f, double a, double b, std::size_t panels) {
  double s = 0.0;
  for (std::size_t p = 0; p < panels; ++p) {
    const double lo = a + (b - a) * static_cast<double>(p) / static_cast<double>(panels);
    const double hi = a + (b - a) * static_cast<double>(p + 1) / static_cast<double>(panels);
    s += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, 0);
  }
  return s;
}

std::vector<double> real_ground(const std::vector<cplx>& v) {
  std::size_t imax = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[imax])) imax = i;
  const cplx phase = std::conj(v[imax]) / std::abs(v[imax]);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::real(v[i] * phase);
  return out;
}

}  // namespace

ExistenceReport existence_scan(const ModelParams& params, const ExistenceOptions& options) {
  validate_params(params);
  require(!options.k_list.empty(), ErrorCode::InvalidParameter, "k list must be nonempty");
  ExistenceReport rep;
  const double a = params.transverse_frequency();
  rep.threshold = a;
  rep.discrete_threshold = discrete_threshold(params, options.h);
  const double cut = std::min(rep.threshold, rep.discrete_threshold);
  rep.lambda = params.lambda;
  rep.inf_L = params.kind == ModelKind::DeltaLine
                  ? exact_inf_L(params.omega, params.lambda)
                  : tridiag_eigenvalue(assemble_L(params.omega, params.lambda,
                                                     default_potential_grid(params.omega, *params.potential),
                                                     params.potential),
                                          0);
  if (rep.inf_L <= 0.0) throw Error(ErrorCode::NotSubcritical, "inf sigma(L(V)) must be positive");

  CutoffFamily chi = chi_plateau(options.ramp);
  const double mass = integrate([&](double z) { return chi(z) * chi(z); }, -1.0, 1.0, 8);
  chi.amplitude /= std::sqrt(mass);
  const auto h_of = [&](double y) {
    return std::pow(a / std::numbers::pi, 0.25) * std::exp(-0.5 * a * y * y);
  };

  AssemblyOptions ao;
  ao.scheme = DiscretizationScheme::DirectCentral;
  ao.delta = options.delta;
  for (double k : options.k_list) {
    require(k > 0.0, ErrorCode::InvalidParameter, "k must be positive");
    const Grid2D g = Grid2D::with_spacing(k + 2.0 * options.h, options.y_half, options.h, options.h);
    std::vector<double> gx(g.nx), gy(g.ny);
    for (std::size_t i = 0; i < g.nx; ++i) gx[i] = chi(g.x(i) / k) / std::sqrt(k);
    for (std::size_t j = 0; j < g.ny; ++j) gy[j] = h_of(g.y(j));

    // separable parts of the discrete form, Dirichlet edges to the outside included
    auto dirichlet_energy = [](const std::vector<double>& v, double h) {
      double s = v.front() * v.front() + v.back() * v.back();
      for (std::size_t i = 0; i + 1 < v.size(); ++i) s += (v[i + 1] - v[i]) * (v[i + 1] - v[i]);
      return s / (h * h);
    };
    double nx2 = 0.0, ny2 = 0.0, pot = 0.0;
    for (double v : gx) nx2 += v * v;
    for (std::size_t j = 0; j < g.ny; ++j) {
      ny2 += gy[j] * gy[j];
      pot += a * a * g.y(j) * g.y(j) * gy[j] * gy[j];
    }
    ExistenceRow row;
    row.k = k;
    row.unknowns = g.size();
    row.kinetic_x = dirichlet_energy(gx, g.hx) / nx2;
    row.transverse = (dirichlet_energy(gy, g.hy) + pot) / ny2;

    std::vector<cplx> phi(g.size());
    for (std::size_t j = 0; j < g.ny; ++j)
      for (std::size_t i = 0; i < g.nx; ++i) phi[g.index(i, j)] = gx[i] * gy[j];
    const SparseHermitian H = assemble(params, g, ao);
    row.value = form_value(H, phi);
    row.attractive = row.value - row.transverse - row.kinetic_x;
    rep.rows.push_back(row);
    if (row.value < cut && !rep.first_k_below) {
      rep.first_k_below = k;
      if (options.stop_at_first) break;
    }
  }

  double nk = 0.0, dk = 0.0, na = 0.0, da = 0.0;
  for (const auto& r : rep.rows) {
    nk += r.kinetic_x / (r.k * r.k);
    dk += 1.0 / std::pow(r.k, 4);
    na += r.attractive / r.k;
    da += 1.0 / (r.k * r.k);
  }
  rep.fit_kinetic = nk / dk;
  rep.fit_attractive = na / da;
  rep.sign_structure = rep.fit_kinetic > 0.0 && rep.fit_attractive < 0.0;

  if (options.tilde_grid) {
    const SparseSymmetric S = assemble_nonmagnetic_tilde(params, *options.tilde_grid, options.delta);
    SolvePolicy pol = options.policy;
    pol.lanczos.k = 1;
    pol.lanczos.want_vectors = true;
    const SpectrumResult r = solve_lowest(to_hermitian(S), pol);
    if (!r.converged) throw Error(ErrorCode::NoConvergence, "nonmagnetic ground state did not converge");
    rep.tilde_energy = r.eigenvalues.front();
    const std::vector<double> u = real_ground(r.eigenvectors.front());
    const std::vector<cplx> uc(u.begin(), u.end());
    rep.tilde_form_value = form_value(assemble(params, *options.tilde_grid, ao), uc);
  }
  return rep;
}

// ---------------------------------------------------------------------------------------------
// Commands

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::IoError: return 2;
    case ErrorCode::NoConvergence:
    case ErrorCode::BreakdownUnrecoverable:
    case ErrorCode::SolveFailed:
    case ErrorCode::QuadratureUnderResolved:
    case ErrorCode::BracketFailure: return 3;
    default: return 4;
  }
}

std::string_view to_string(Command c) {
  switch (c) {
    case Command::Spectrum: return "spectrum";
    case Command::Sweep: return "sweep";
    case Command::Landau: return "landau";
    case Command::Quasimode: return "quasimode";
    case Command::CriticalLambda: return "critical-lambda";
    case Command::Existence: return "existence";
  }
  return "?";
}

std::optional<Command> parse_command(std::string_view name) {
  for (Command c : {Command::Spectrum, Command::Sweep, Command::Landau, Command::Quasimode,
                    Command::CriticalLambda, Command::Existence})
    if (to_string(c) == name) return c;
  return std::nullopt;
}

namespace {

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
      : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
    if (!out_) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    row(header);
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
    if (!out_) throw Error(ErrorCode::IoError, "write failed: " + path_.string());
  }

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

std::string fmt(double v) { return format_double(v); }
std::string fmt(std::size_t v) { return std::to_string(v); }

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json num_array(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

void write_run_json(const std::filesystem::path& out, Command command, const RunConfig& config,
                    json results) {
  json j;
  j["command"] = std::string(to_string(command));
  json cfg = json::object();
  for (const auto& [k, v] : config.values()) cfg[k] = v;
  j["config"] = std::move(cfg);
  j["results"] = std::move(results);
  std::ofstream f(out / "run.json", std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, "cannot write run.json");
  f << j.dump(2) << '\n';
}

json spectrum_json(const SpectrumResult& r) {
  json j;
  j["eigenvalues"] = num_array(r.eigenvalues);
  j["residuals"] = num_array(r.residual_norms);
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["seed"] = r.seed;
  j["shift"] = r.shift ? num(*r.shift) : json(nullptr);
  return j;
}

void cmd_spectrum(const RunConfig& cfg, const std::filesystem::path& out) {
  const ModelParams params = cfg.model();
  const Grid2D grid = cfg.grid();
  const SparseHermitian H = assemble(params, grid, cfg.assembly());
  if (cfg.get_bool("solver.write_matrix")) write_matrix_market(out / "matrix.mtx", H);
  const SpectrumResult r = solve_lowest(H, solve_policy(cfg));

  {
    CsvWriter csv(out / "spectrum.csv", {"index", "eigenvalue", "residual"});
    for (std::size_t i = 0; i < r.eigenvalues.size(); ++i)
      csv.row({fmt(i), fmt(r.eigenvalues[i]), fmt(r.residual_norms[i])});
  }

  json res;
  res["unknowns"] = grid.size();
  res["nx"] = grid.nx;
  res["ny"] = grid.ny;
  res["hx"] = grid.hx;
  res["hy"] = grid.hy;
  res["spectrum"] = spectrum_json(r);
  const double threshold = params.transverse_frequency();
  res["threshold"] = threshold;
  const double band_h = std::min(cfg.get_double("experiment.band_h"), grid.hy);
  res["discrete_threshold"] = num(discrete_threshold(params, band_h));
  std::size_t below = 0;
  for (double e : r.eigenvalues) below += e < threshold;
  res["eigenvalues_below_threshold"] = below;
  res["ground_gap"] = r.eigenvalues.empty() ? json(nullptr) : num(threshold - r.eigenvalues.front());

  if (cfg.get_bool("experiment.band")) {
    const double n = cfg.get_double("experiment.band_n");
    const BandFunction band =
        band_scan(params, n, default_xi_range(params, n), count(cfg, "experiment.band_xi"), band_h);
    CsvWriter csv(out / "band.csv", {"xi", "band_min", "residual"});
    for (std::size_t i = 0; i < band.xi_samples.size(); ++i)
      csv.row({fmt(band.xi_samples[i]), fmt(band.band_min[i]), fmt(band.residuals[i])});
    res["band"] = {{"n", n},
                   {"minimum", num(band.minimum)},
                   {"argmin", num(band.argmin)},
                   {"deficit", num(threshold - band.minimum)}};
  }

  if (params.kind == ModelKind::DeltaLine && params.lambda >= -2.0 * params.omega) {
    const BracketingCertificate c =
        bracketing_lower_bound_sm(params, grid.ly, band_h, count(cfg, "experiment.band_xi"));
    json pieces = json::array();
    for (const auto& p : c.pieces) pieces.push_back({{"name", p.name}, {"lower_bound", num(p.lower_bound)}});
    res["bracketing"] = {{"n", c.n},
                         {"pieces", pieces},
                         {"overall_lower_bound", num(c.overall_lower_bound)},
                         {"central_essential", num(c.central_essential)}};
  } else {
    res["bracketing"] = nullptr;
  }
  write_run_json(out, Command::Spectrum, cfg, res);
  if (!r.converged) throw Error(ErrorCode::NoConvergence, "eigensolver did not reach solver.tol");
}

ClassifierThresholds thresholds(const RunConfig& cfg) {
  ClassifierThresholds t;
  t.drop = cfg.get_double("experiment.drop");
  t.dive_floor = cfg.get_double("experiment.dive_floor");
  t.flat_tol = cfg.get_double("experiment.flat_tol");
  t.critical_band = cfg.get_double("experiment.critical_band");
  t.box_tol = cfg.get_double("experiment.box_tol");
  return t;
}

void cmd_sweep(const RunConfig& cfg, const std::filesystem::path& out) {
  SweepOptions o;
  o.lx = cfg.get_double("experiment.sweep_lx");
  o.h = cfg.get_double("experiment.sweep_h");
  o.levels = count(cfg, "experiment.sweep_levels");
  o.max_unknowns = count(cfg, "experiment.max_unknowns");
  o.workers = count(cfg, "experiment.workers");
  o.thresholds = thresholds(cfg);
  const auto lambdas = cfg.get_list("experiment.lambda_list");
  const auto heights = cfg.get_list("experiment.ly_list");
  const auto records = run_sweep(cfg.model(), lambdas, heights, o, solve_policy(cfg), cfg.assembly());

  CsvWriter csv(out / "sweep.csv",
                {"lambda", "ly", "unknowns", "ground_energy", "e1", "e2", "e3", "e4", "residual", "regime"});
  json rows = json::array();
  for (const auto& r : records) {
    std::vector<std::string> cells{fmt(r.lambda), fmt(r.ly), fmt(r.unknowns), fmt(r.ground_energy)};
    for (std::size_t i = 0; i < 4; ++i)
      cells.push_back(i < r.next_energies.size() ? fmt(r.next_energies[i]) : std::string("nan"));
    cells.push_back(fmt(r.residual));
    cells.emplace_back(to_string(r.regime));
    csv.row(cells);
    rows.push_back({{"lambda", r.lambda},
                    {"ly", r.ly},
                    {"ground_energy", num(r.ground_energy)},
                    {"next_energies", num_array(r.next_energies)},
                    {"regime", std::string(to_string(r.regime))}});
  }
  json res;
  res["threshold"] = cfg.model().transverse_frequency();
  res["records"] = rows;
  write_run_json(out, Command::Sweep, cfg, res);
}

void cmd_landau(const RunConfig& cfg, const std::filesystem::path& out) {
  const ModelParams p = cfg.model();
  require(p.omega == 0.0, ErrorCode::InvalidParameter, "landau needs model.omega = 0");
  require(p.lambda == 0.0, ErrorCode::InvalidParameter, "landau needs model.lambda = 0");
  LandauOptions o;
  o.lowest = count(cfg, "experiment.landau_lowest");
  o.levels = count(cfg, "experiment.landau_levels");
  o.per_level = count(cfg, "experiment.landau_per_level");
  o.tol = cfg.get_double("experiment.landau_tol");
  o.window = cfg.get_double("experiment.landau_window");
  o.count_members = cfg.get_bool("experiment.landau_count");
  o.seed = cfg.get_u64("solver.seed");
  o.scheme = cfg.assembly().scheme;
  const LandauReport rep = landau_levels(p.b_field, cfg.grid(), o);

  {
    CsvWriter csv(out / "spectrum.csv", {"index", "eigenvalue", "residual", "level", "relative_deviation"});
    for (std::size_t i = 0; i < rep.lowest.size(); ++i) {
      const double target = (2.0 * rep.lowest_level[i] + 1.0) * p.b_field;
      csv.row({fmt(i), fmt(rep.lowest[i]), fmt(rep.lowest_residuals[i]),
               std::to_string(rep.lowest_level[i]), fmt(std::abs(rep.lowest[i] - target) / target)});
    }
  }
  CsvWriter csv(out / "levels.csv", {"level", "target", "eigenvalue", "residual", "relative_deviation"});
  json levels = json::array();
  for (const auto& l : rep.levels) {
    for (std::size_t i = 0; i < l.eigenvalues.size(); ++i)
      csv.row({std::to_string(l.n), fmt(l.target), fmt(l.eigenvalues[i]), fmt(l.residuals[i]),
               fmt(std::abs(l.eigenvalues[i] - l.target) / l.target)});
    levels.push_back({{"n", l.n},
                      {"target", l.target},
                      {"eigenvalues", num_array(l.eigenvalues)},
                      {"max_relative_deviation", num(l.max_relative_deviation)},
                      {"members", l.members ? json(*l.members) : json(nullptr)}});
  }
  json res;
  res["unknowns"] = cfg.grid().size();
  res["lowest"] = num_array(rep.lowest);
  res["levels"] = levels;
  res["converged"] = rep.converged;
  write_run_json(out, Command::Landau, cfg, res);
  if (!rep.converged) throw Error(ErrorCode::NoConvergence, "Landau eigensolves did not converge");
}

void cmd_quasimode(const RunConfig& cfg, const std::filesystem::path& out) {
  const ModelParams p = cfg.model();
  const std::string construction = cfg.get("experiment.construction");
  const double mu = cfg.get_double("experiment.mu");
  const bool dump = cfg.get_bool("experiment.dump");
  AssemblyOptions ao = cfg.assembly();

  CsvWriter csv(out / "residuals.csv",
                {"construction", "parameter", "n_k", "mu", "norm", "relative_residual", "eps", "bound"});
  json rows = json::array();
  json res;
  auto emit = [&](double param, double n_k, double norm, double rel, double eps, double bound) {
    csv.row({construction, fmt(param), fmt(n_k), fmt(mu), fmt(norm), fmt(rel), fmt(eps), fmt(bound)});
    rows.push_back({{"parameter", param},
                    {"n_k", n_k},
                    {"norm", num(norm)},
                    {"relative_residual", num(rel)},
                    {"eps", num(eps)},
                    {"bound", num(bound)}});
  };
  auto dump_to = [&](const std::string& tag, double param, const Quasimode& q) {
    if (dump) write_quasimode(out / ("quasimode_" + tag + "_" + format_double(param) + ".csv"), q);
  };

  if (construction == "subcritical") {
    const double eps = cfg.get_double("experiment.eps");
    PacketOptions po;
    po.alpha = cfg.get_double("experiment.alpha");
    po.m = cfg.get_double("experiment.m");
    const auto [d1, d2] = build_E_window(mu, eps, p.omega, p.b_field);
    res["window"] = {d1, d2};
    for (double k : cfg.get_list("experiment.k_list")) {
      const Quasimode q =
          build_subcritical_packet_auto(p, mu, eps, k, cfg.get_double("experiment.packet_h"), po);
      const double rel = residual(q, ao);
      const double sup = q.meta.at("eta_sup") * q.meta.at("chi_sup");
      emit(k, 0.0, q.norm(), rel, eps, std::sqrt(70.0) * eps * sup);
      dump_to("subcritical", k, q);
    }
  } else if (construction == "supercritical") {
    const ScalingMap map = normalize_supercritical(p);
    const ModelParams& np = map.normalized;
    ChannelProfile profile;
    double orth = 0.0;
    if (np.kind == ModelKind::DeltaLine) {
      profile = delta_channel_profile(np);
      orth = orthogonality_integral(np.omega, np.lambda, np.b_field);
    } else {
      const FSolution fs = solve_f_ode(np, default_f_grid(np));
      orth = fs.orthogonality_defect;
      profile = interpolated_profile(np, fs);
    }
    const double nmu = map.to_normalized_mu(mu);
    const double unit = 1.0 / (map.s * map.s);
    double n_k = cfg.get_double("experiment.n_k"), k_prev = 0.0;
    for (double k : cfg.get_list("experiment.chi_k_list")) {
      if (k_prev > 0.0) n_k = std::max(n_k, next_channel_start(k_prev, n_k));
      const CutoffFamily chi = make_chi_k(k, cfg.get_double("experiment.chi_eps_max"));
      const ContinuumResidual c = supercritical_continuum(np, nmu, chi, n_k, profile);
      emit(k, n_k, c.norm, unit * c.residual / c.norm, c.eps, NAN);
      k_prev = chi.k;
    }
    res["scale"] = map.s;
    res["normalized_mu"] = nmu;
    res["orthogonality_defect"] = num(orth);
  } else {
    const double hy = cfg.get_double("experiment.critical_hy");
    const std::size_t nx = count(cfg, "experiment.critical_nx");
    for (double n : cfg.get_list("experiment.n_list")) {
      const Quasimode q = build_critical(p, mu, n, critical_grid(p, n, hy, nx));
      emit(n, 0.0, q.norm(), residual(q, ao), 0.0, NAN);
      dump_to("critical", n, q);
    }
  }
  res["rows"] = rows;
  write_run_json(out, Command::Quasimode, cfg, res);
}

void cmd_critical_lambda(const RunConfig& cfg, const std::filesystem::path& out) {
  const ModelParams p = cfg.model();
  std::optional<double> width;
  if (p.kind == ModelKind::RegularV && cfg.get("model.potential_file").empty())
    width = cfg.get_double("model.well_half_width");
  const CriticalLambdaReport r = critical_lambda_report(p, cfg.get_list("experiment.eta_list"), width);
  json res;
  res["kind"] = std::string(to_string(r.kind));
  res["omega"] = r.omega;
  res["lambda_star"] = num(r.lambda_star);
  res["analytic"] = r.analytic;
  res["oracle"] = r.oracle ? num(*r.oracle) : json(nullptr);
  json sched = json::array();
  for (std::size_t i = 0; i < r.eta.size(); ++i)
    sched.push_back({{"eta", r.eta[i]},
                     {"lambda_star", num(r.eta_lambda[i])},
                     {"error", num(std::abs(r.eta_lambda[i] - r.lambda_star))}});
  res["eta_schedule"] = sched;
  write_run_json(out, Command::CriticalLambda, cfg, res);
}

void cmd_existence(const RunConfig& cfg, const std::filesystem::path& out) {
  ModelParams p = cfg.model();
  if (const auto target = opt_double(cfg, "experiment.lambda_target")) {
    require(p.kind == ModelKind::RegularV, ErrorCode::UnsupportedCombination,
            "experiment.lambda_target needs model.kind = regular");
    p.lambda = coupling_for_bottom(p.omega, *p.potential, *target);
  }
  ExistenceOptions o;
  o.k_list = cfg.get_list("experiment.existence_k_list");
  o.h = cfg.get_double("experiment.existence_h");
  o.y_half = cfg.get_double("experiment.existence_ly");
  o.ramp = cfg.get_double("experiment.existence_ramp");
  o.delta = cfg.assembly().delta;
  o.policy = solve_policy(cfg);
  if (cfg.get_bool("experiment.existence_tilde")) o.tilde_grid = cfg.grid();
  const ExistenceReport rep = existence_scan(p, o);

  CsvWriter csv(out / "existence.csv",
                {"k", "value", "transverse", "kinetic_x", "attractive", "below_threshold", "unknowns"});
  json rows = json::array();
  for (const auto& r : rep.rows) {
    csv.row({fmt(r.k), fmt(r.value), fmt(r.transverse), fmt(r.kinetic_x), fmt(r.attractive),
             r.value < std::min(rep.threshold, rep.discrete_threshold) ? "1" : "0",
             fmt(r.unknowns)});
    rows.push_back({{"k", r.k},
                    {"value", num(r.value)},
                    {"transverse", num(r.transverse)},
                    {"kinetic_x", num(r.kinetic_x)},
                    {"attractive", num(r.attractive)}});
  }
  json res;
  res["lambda"] = rep.lambda;
  res["inf_L"] = num(rep.inf_L);
  res["threshold"] = rep.threshold;
  res["discrete_threshold"] = rep.discrete_threshold;
  res["rows"] = rows;
  res["first_k_below"] = rep.first_k_below ? json(*rep.first_k_below) : json(nullptr);
  res["never_below_threshold"] = !rep.first_k_below.has_value();
  res["fit_kinetic"] = num(rep.fit_kinetic);
  res["fit_attractive"] = num(rep.fit_attractive);
  res["sign_structure"] = rep.sign_structure;
  res["tilde_energy"] = rep.tilde_energy ? num(*rep.tilde_energy) : json(nullptr);
  res["tilde_form_value"] = rep.tilde_form_value ? num(*rep.tilde_form_value) : json(nullptr);
  write_run_json(out, Command::Existence, cfg, res);
}

}  // namespace

void run_command(Command command, const RunConfig& config, const std::filesystem::path& out) {
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + out.string() + ": " + ec.message());
  switch (command) {
    case Command::Spectrum: cmd_spectrum(config, out); break;
    case Command::Sweep: cmd_sweep(config, out); break;
    case Command::Landau: cmd_landau(config, out); break;
    case Command::Quasimode: cmd_quasimode(config, out); break;
    case Command::CriticalLambda: cmd_critical_lambda(config, out); break;
    case Command::Existence: cmd_existence(config, out); break;
  }
}

}  // namespace magspec
