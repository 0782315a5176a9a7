#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "magspec/fiber.hpp"
#include "magspec/hamiltonian.hpp"
#include "magspec/lanczos.hpp"
#include "magspec/model.hpp"
#include "magspec/quasimode.hpp"

namespace magspec {

// ---------------------------------------------------------------------------------------------
// Configuration

/// Flat `key = value` configuration. Every known key is always present (defaults filled in),
/// values keep the exact text they were given so the resolved config round-trips.
class RunConfig {
 public:
  RunConfig();

  /// Parses `key = value` lines; `#` starts a comment. Unknown or duplicate keys and
  /// malformed lines throw ConfigError.
  static RunConfig parse(std::string_view text);
  /// Reads a config file, or the "config" object of a previously emitted run.json.
  static RunConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  long long get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_list(const std::string& key) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  /// `key = value` lines in key order; parse(dump()) reproduces this config.
  std::string dump() const;

  static const std::vector<std::string>& known_keys();

  ModelParams model() const;
  /// Grid from grid.lx, grid.ly and either grid.nx/grid.ny (when nonzero) or grid.h.
  Grid2D grid() const;
  AssemblyOptions assembly() const;
  LanczosOptions lanczos() const;

 private:
  std::map<std::string, std::string> values_;
};

// ---------------------------------------------------------------------------------------------
// Eigensolver policy

struct SolvePolicy {
  LanczosOptions lanczos;
  /// "auto": plain Lanczos up to plain_limit unknowns, shift-invert above.
  std::string method = "auto";
  std::size_t plain_limit = 20000;
  std::optional<double> shift;
};

SolvePolicy solve_policy(const RunConfig& config);
SpectrumResult solve_lowest(const SparseHermitian& H, const SolvePolicy& policy);

// ---------------------------------------------------------------------------------------------
// Regime classification

enum class Regime { Subcritical, Critical, Supercritical, Undetermined };
std::string_view to_string(Regime r);

struct ClassifierThresholds {
  double drop = 0.5;           // minimal decrease between successive domain heights
  double dive_floor = -1.0;    // final value required for a dive
  double flat_tol = 0.02;      // change over the last two heights for a bound state
  double critical_band = 0.02; // |E| below this at the largest height
  double box_tol = 0.1;        // allowance above the threshold for box-confined states
};

/// Ground energies ordered by increasing domain height.
Regime classify(const std::vector<double>& ground_by_height, double threshold,
                const ClassifierThresholds& t = {});

struct SweepRecord {
  double lambda = 0.0;
  double ly = 0.0;
  double ground_energy = 0.0;
  std::vector<double> next_energies;
  Regime regime = Regime::Undetermined;
  double residual = 0.0;
  std::size_t unknowns = 0;
};

struct SweepOptions {
  double lx = 4.0;
  double h = 0.05;
  std::size_t levels = 5;
  std::size_t max_unknowns = 1500000;
  std::size_t workers = 1;
  ClassifierThresholds thresholds;
};

/// One record per (lambda, ly); regime labels are shared by all records of a lambda.
std::vector<SweepRecord> run_sweep(const ModelParams& base, const std::vector<double>& lambdas,
                                   const std::vector<double>& heights, const SweepOptions& options,
                                   const SolvePolicy& policy, const AssemblyOptions& assembly);

// ---------------------------------------------------------------------------------------------
// Landau levels

struct LandauLevel {
  int n = 0;
  double target = 0.0;  // (2n + 1) B
  std::vector<double> eigenvalues;
  std::vector<double> residuals;
  double max_relative_deviation = 0.0;
  std::optional<std::size_t> members;  // eigenvalues within the relative window
};

struct LandauReport {
  double b_field = 1.0;
  std::vector<double> lowest;
  std::vector<double> lowest_residuals;
  std::vector<int> lowest_level;  // nearest level index of each lowest eigenvalue
  std::vector<LandauLevel> levels;
  bool converged = true;
};

struct LandauOptions {
  std::size_t lowest = 8;
  std::size_t levels = 2;
  std::size_t per_level = 8;
  double tol = 1e-3;
  double window = 0.03;
  bool count_members = false;
  std::uint64_t seed = 1;
  DiscretizationScheme scheme = DiscretizationScheme::Peierls;
};

LandauReport landau_levels(double b_field, const Grid2D& grid, const LandauOptions& options);

// ---------------------------------------------------------------------------------------------
// Critical coupling

/// Coupling at which the square well height * 1_{[-w, w]} makes inf sigma(L(V)) vanish, from
/// q tan(q w) = omega.
double square_well_critical_oracle(double omega, double half_width, double height = 1.0);

/// Coupling lambda < 0 with inf sigma(L(V)) = target (0 < target < omega^2).
double coupling_for_bottom(double omega, const PotentialSpec& V, double target);

struct CriticalLambdaReport {
  ModelKind kind = ModelKind::DeltaLine;
  double omega = 1.0;
  double lambda_star = 0.0;
  bool analytic = false;
  std::optional<double> oracle;
  std::vector<double> eta;
  std::vector<double> eta_lambda;  // critical coupling of the mass-one wells of width eta
};

CriticalLambdaReport critical_lambda_report(const ModelParams& params,
                                            const std::vector<double>& eta_list,
                                            const std::optional<double>& well_half_width);

// ---------------------------------------------------------------------------------------------
// Existence via trial functions

struct ExistenceRow {
  double k = 0.0;
  double value = 0.0;       // discrete Rayleigh quotient of phi
  double transverse = 0.0;  // y-part: discrete oscillator quotient of h
  double kinetic_x = 0.0;   // sum |D_x phi|^2 / ||phi||^2
  double attractive = 0.0;  // coupling term / ||phi||^2
  std::size_t unknowns = 0;
};

struct ExistenceReport {
  double threshold = 0.0;  // sqrt(omega^2 + B^2)
  /// Ground energy of the transverse oscillator at the scan spacing; a quotient counts as
  /// below the threshold only when it is below both values.
  double discrete_threshold = 0.0;
  double lambda = 0.0;
  double inf_L = 0.0;
  std::vector<ExistenceRow> rows;
  std::optional<double> first_k_below;
  /// Least-squares fits kinetic_x ~ a / k^2 and attractive ~ c / k.
  double fit_kinetic = 0.0;
  double fit_attractive = 0.0;
  bool sign_structure = false;
  /// Ground state of the nonmagnetic operator fed to the magnetic form.
  std::optional<double> tilde_energy;
  std::optional<double> tilde_form_value;
};

struct ExistenceOptions {
  std::vector<double> k_list{8, 16, 32, 64, 128, 256};
  double h = 0.05;
  double y_half = 6.0;
  double ramp = 0.5;  // plateau ramp of chi on [-1, 1]
  bool stop_at_first = false;
  std::optional<Grid2D> tilde_grid;
  SolvePolicy policy;
  DeltaScheme delta = DeltaScheme::LatticeMatched;
};

/// phi(x, y) = k^{-1/2} h(y) chi(x/k) with h the oscillator ground state of frequency
/// sqrt(omega^2 + B^2) and chi supported in [-1, 1], int chi^2 = 1.
ExistenceReport existence_scan(const ModelParams& params, const ExistenceOptions& options);

// ---------------------------------------------------------------------------------------------
// Commands

enum class Command { Spectrum, Sweep, Landau, Quasimode, CriticalLambda, Existence };
std::string_view to_string(Command c);
std::optional<Command> parse_command(std::string_view name);

/// Runs a command, writing its files into `out`. Throws magspec::Error on failure.
void run_command(Command command, const RunConfig& config, const std::filesystem::path& out);

/// 0 success, 2 config or I/O error, 3 solver non-convergence, 4 precondition violation.
int exit_code_for(ErrorCode code);

/// %.17g
std::string format_double(double v);

}  // namespace magspec
