// Acceptance checks 1-12: one PASS/FAIL line each, nonzero exit if any check fails.
#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "magspec/comparison.hpp"
#include "magspec/experiments.hpp"
#include "magspec/fiber.hpp"
#include "magspec/hamiltonian.hpp"
#include "magspec/lanczos.hpp"
#include "magspec/quasimode.hpp"

using namespace magspec;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string f(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

ModelParams delta_model(double omega, double b, double lambda) {
  ModelParams p;
  p.omega = omega;
  p.b_field = b;
  p.lambda = lambda;
  return p;
}

double ground_2d(const ModelParams& p, const Grid2D& g) {
  SolvePolicy pol;
  pol.lanczos.k = 1;
  pol.lanczos.tol = 1e-9;
  const SpectrumResult r = solve_lowest(assemble(p, g), pol);
  if (!r.converged) throw Error(ErrorCode::NoConvergence, "ground state did not converge");
  return r.eigenvalues.front();
}

// 1 -----------------------------------------------------------------------------------------
Outcome delta_comparison() {
  auto inf_at = [](std::size_t n) {
    return inf_spectrum_1d(assemble_L(1.0, -1.0, Grid1D::make(20.0, n)));
  };
  const double e4001 = std::abs(inf_at(4001) - 0.75);
  const double e2001 = std::abs(inf_at(2001) - 0.75);
  const double e1001 = std::abs(inf_at(1001) - 0.75);
  const double order = std::log2(e2001 / e4001);
  const double order_coarse = std::log2(e1001 / e2001);
  return {e4001 <= 1e-3 && std::min(order, order_coarse) >= 1.0 - 0.05,
          "|inf - 0.75| = " + f("%.3e", e4001) + ", observed order " + f("%.3f", order) + " / " +
              f("%.3f", order_coarse)};
}

// 2 -----------------------------------------------------------------------------------------
Outcome critical_coupling() {
  ModelParams d = delta_model(1.0, 1.0, -1.0);
  const auto rep = critical_lambda_report(d, {0.2, 0.1, 0.05}, std::nullopt);
  const double rel = std::abs(rep.eta_lambda.back() - rep.lambda_star) / std::abs(rep.lambda_star);
  // zero-energy even state of the square well: q tan q = omega, lambda* = -(omega^2 + q^2)
  double lo = 0.0, hi = std::numbers::pi / 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mid * std::tan(mid) < 1.0 ? lo : hi) = mid;
  }
  const double q = 0.5 * (lo + hi), oracle = -(1.0 + q * q);
  const double well = critical_lambda(1.0, PotentialSpec::square_well(1.0));
  const double err = std::abs(well - oracle);
  return {rel <= 0.02 && err <= 1e-4 && rep.lambda_star == -2.0,
          "eta=0.05 lambda* = " + f("%.5f", rep.eta_lambda.back()) + " (rel " + f("%.4f", rel) +
              "), square well " + f("%.7f", well) + " vs oracle " + f("%.7f", oracle)};
}

// 3 -----------------------------------------------------------------------------------------
Outcome landau() {
  LandauOptions o;
  o.tol = 1e-3;
  const LandauReport r = landau_levels(1.0, Grid2D::make(14.0, 14.0, 561, 561), o);
  bool ok = r.converged && r.levels.size() == 2;
  for (int l : r.lowest_level) ok = ok && l == 0;
  const double d0 = r.levels[0].max_relative_deviation, d1 = r.levels[1].max_relative_deviation;
  ok = ok && d0 <= 0.03 && d1 <= 0.03;
  return {ok, "lowest 8 at level 1 (max rel dev " + f("%.2e", d0) + "), 8 nearest 3 (max rel dev " +
                  f("%.2e", d1) + ")"};
}

// 4 -----------------------------------------------------------------------------------------
Outcome essential_threshold() {
  const ModelParams p = delta_model(1.0, 1.0, 0.0);
  const double e = ground_2d(p, Grid2D::make(12.0, 12.0, 481, 481));
  const double t = std::sqrt(2.0);
  const double b40 = band_scan(p, 40.0, default_xi_range(p, 40.0), 201).minimum;
  const double b80 = band_scan(p, 80.0, default_xi_range(p, 80.0), 201).minimum;
  const double thr = discrete_threshold(p);
  const double d40 = std::max(0.0, thr - b40), d80 = std::max(0.0, thr - b80);
  return {e >= t - 0.01 && b40 >= t - 0.05 && d80 <= d40 / 2.0 + 1e-9,
          "ground " + f("%.6f", e) + ", band min n=40 " + f("%.6f", b40) + ", deficit vs lattice threshold n=40 " +
              f("%.1e", d40) + ", n=80 " + f("%.1e", d80)};
}

// 5 -----------------------------------------------------------------------------------------
Outcome subcritical() {
  const ModelParams p = delta_model(1.0, 1.0, -1.0);
  const double e12 = ground_2d(p, Grid2D::with_spacing(12.0, 12.0, 0.05, 0.05));
  const double e24 = ground_2d(p, Grid2D::with_spacing(12.0, 24.0, 0.05, 0.05));
  const BracketingCertificate c = bracketing_lower_bound_sm(p, 12.0, 0.05);
  const double t = std::sqrt(2.0);
  return {e12 > 0.0 && e12 < t && std::abs(e24 - e12) < 1e-3 && c.overall_lower_bound <= e12,
          "E(ly=12) = " + f("%.8f", e12) + ", E(ly=24) = " + f("%.8f", e24) + ", certificate " +
              f("%.6f", c.overall_lower_bound)};
}

// 6 -----------------------------------------------------------------------------------------
Outcome supercritical_dive() {
  SweepOptions o;
  o.lx = 4.0;
  o.h = 0.05;
  SolvePolicy pol;
  pol.lanczos.tol = 1e-8;
  const auto rec = run_sweep(delta_model(1.0, 1.0, -3.0), {-3.0}, {8.0, 16.0, 32.0}, o, pol, {});
  bool strict = true;
  for (std::size_t i = 1; i < rec.size(); ++i) strict = strict && rec[i].ground_energy < rec[i - 1].ground_energy;
  const double drop = rec.front().ground_energy - rec.back().ground_energy;
  return {strict && drop > 2.0 && rec.back().ground_energy < -1.0 && rec.back().regime == Regime::Supercritical,
          "E = " + f("%.3f", rec[0].ground_energy) + ", " + f("%.3f", rec[1].ground_energy) + ", " +
              f("%.3f", rec[2].ground_energy) + ", label " + std::string(to_string(rec.back().regime))};
}

// 7 -----------------------------------------------------------------------------------------
Outcome critical_regime() {
  const ModelParams p = delta_model(1.0, 1.0, -2.0);
  const double e = ground_2d(p, Grid2D::with_spacing(4.0, 32.0, 0.05, 0.05));
  bool ok = e >= -0.02 && e <= 0.1;
  std::string detail = "E(ly=32) = " + f("%.5f", e) + "; residuals";
  for (double mu : {0.0, 1.0}) {
    double prev = INFINITY;
    detail += " mu=" + f("%.0f", mu) + ":";
    for (double n : {8.0, 16.0, 32.0}) {
      const double r = residual(build_critical(p, mu, n, critical_grid(p, n)), AssemblyOptions{});
      ok = ok && r < prev;
      prev = r;
      detail += " " + f("%.3f", r);
    }
  }
  return {ok, detail};
}

// 8 -----------------------------------------------------------------------------------------
Outcome quasimode_certificates() {
  const ModelParams p = delta_model(1.0, 1.0, -1.0);
  const double eps = 0.1;
  const Quasimode q = build_subcritical_packet_auto(p, 2.0, eps, 64.0);
  const double r = residual(q, AssemblyOptions{});
  const double budget = 70.0 * eps * eps * std::pow(q.meta.at("eta_sup") * q.meta.at("chi_sup"), 2);
  const bool packet_ok = q.meta.at("norm2") >= 1.0 / 64.0 && r * r <= budget;

  const ModelParams np = normalize_supercritical(delta_model(1.0, 1.0, -3.0)).normalized;
  const ContinuumResidual c =
      supercritical_continuum(np, -1.0, make_chi_k(100.0, 10.0), 20.0, delta_channel_profile(np));
  const double orth = orthogonality_integral(np.omega, np.lambda, np.b_field);
  const double orth_lattice = solve_f_ode(np, default_f_grid(np)).orthogonality_defect;
  const bool super_ok = c.norm >= 0.5 && orth <= 1e-8 && orth_lattice <= 1e-8;
  return {packet_ok && super_ok,
          "packet |phi|^2 = " + f("%.4f", q.meta.at("norm2")) + ", res^2 = " + f("%.2e", r * r) +
              " <= " + f("%.2e", budget) + "; channel |psi| = " + f("%.4f", c.norm) +
              ", <g,h> = " + f("%.1e", orth) + " (lattice " + f("%.1e", orth_lattice) + ")"};
}

// 9 -----------------------------------------------------------------------------------------
SparseHermitian dense_to_csr(const Eigen::MatrixXcd& A) {
  SparseHermitian H;
  H.n = static_cast<std::size_t>(A.rows());
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    for (Eigen::Index c = 0; c < A.cols(); ++c) H.push(static_cast<std::size_t>(c), A(r, c));
    H.end_row();
  }
  return H;
}

Eigen::MatrixXcd csr_to_dense(const SparseHermitian& H) {
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(H.n), static_cast<Eigen::Index>(H.n));
  for (std::size_t r = 0; r < H.n; ++r)
    for (std::size_t p = H.row_ptr[r]; p < H.row_ptr[r + 1]; ++p)
      A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(H.col[p])) = H.val[p];
  return A;
}

Outcome oracle_equivalence() {
  constexpr std::size_t k = 6;
  double worst = 0.0;
  bool converged = true;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    XorShift64Star rng(1000 + seed);
    Eigen::MatrixXcd A(200, 200);
    for (Eigen::Index i = 0; i < 200; ++i)
      for (Eigen::Index j = 0; j <= i; ++j) {
        const cplx z(rng.symmetric(), i == j ? 0.0 : rng.symmetric());
        A(i, j) = z;
        A(j, i) = std::conj(z);
      }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(A, Eigen::EigenvaluesOnly);
    const SpectrumResult r = lowest_eigs(dense_to_csr(A), k, 1e-10, 20000, seed);
    converged = converged && r.converged;
    for (std::size_t i = 0; i < k; ++i)
      worst = std::max(worst, std::abs(r.eigenvalues[i] - es.eigenvalues()(static_cast<Eigen::Index>(i))));
  }
  const double worst_random = worst;

  const SparseHermitian H = assemble(delta_model(1.0, 1.0, -1.0), Grid2D::make(4.0, 4.0, 41, 41));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(csr_to_dense(H), Eigen::EigenvaluesOnly);
  worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const SpectrumResult r = lowest_eigs(H, k, 1e-10, 20000, seed);
    converged = converged && r.converged;
    for (std::size_t i = 0; i < k; ++i)
      worst = std::max(worst, std::abs(r.eigenvalues[i] - es.eigenvalues()(static_cast<Eigen::Index>(i))));
  }
  return {converged && worst_random <= 1e-8 && worst <= 1e-8,
          "max |dE| random 200x200: " + f("%.1e", worst_random) + ", 41x41 Hamiltonian: " + f("%.1e", worst)};
}

// 10 ----------------------------------------------------------------------------------------
Outcome real_form_identity() {
  const ModelParams p = delta_model(1.0, 1.0, -1.0);
  const Grid2D g = Grid2D::make(3.0, 4.0, 31, 41);
  const SparseHermitian H = assemble(p, g, DiscretizationScheme::DirectCentral);
  const SparseSymmetric S = assemble_nonmagnetic_tilde(p, g);
  double worst = 0.0;
  XorShift64Star rng(2024);
  for (int t = 0; t < 10; ++t) {
    std::vector<double> u(g.size());
    for (double& v : u) v = rng.symmetric();
    const std::vector<cplx> uc(u.begin(), u.end());
    const double a = form_value(H, uc), b = form_value(S, u);
    worst = std::max(worst, std::abs(a - b) / std::abs(b));
  }
  return {worst <= 1e-12, "max relative difference " + f("%.1e", worst)};
}

// 11 ----------------------------------------------------------------------------------------
Outcome regular_existence() {
  ModelParams p = delta_model(1.0, 1.0, -1.0);
  p.kind = ModelKind::RegularV;
  p.potential = PotentialSpec::square_well(1.0);
  p.lambda = coupling_for_bottom(1.0, *p.potential, 0.2);
  ExistenceOptions o;
  const ExistenceReport r = existence_scan(p, o);
  const bool ok = r.first_k_below && *r.first_k_below <= 256.0 && r.sign_structure;
  std::string detail = "lambda = " + f("%.5f", p.lambda) + ", inf sigma(L(V)) = " + f("%.4f", r.inf_L) +
                       ", first k below sqrt2: " + (r.first_k_below ? f("%.0f", *r.first_k_below) : "none");
  if (!r.rows.empty()) detail += " (Q = " + f("%.5f", r.rows.front().value) + ")";
  detail += ", fit kinetic " + f("%.3f", r.fit_kinetic) + "/k^2, attractive " + f("%.3f", r.fit_attractive) + "/k";
  return {ok, detail};
}

// 12 ----------------------------------------------------------------------------------------
Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "magspec_acceptance_determinism";
  fs::remove_all(root);
  struct Job {
    Command command;
    const char* config;
  };
  const std::vector<Job> jobs = {
      {Command::Spectrum, "grid.lx = 4\ngrid.ly = 4\ngrid.h = 0.1\nsolver.k = 4\nexperiment.band_n = 8\n"},
      {Command::Sweep, "experiment.lambda_list = -1, -3\nexperiment.ly_list = 4, 8\nexperiment.sweep_h = 0.1\n"},
      {Command::Quasimode, "model.lambda = -2\nexperiment.construction = critical\nexperiment.mu = 0\n"
                           "experiment.n_list = 4, 8\nexperiment.critical_hy = 0.1\nexperiment.critical_nx = 201\n"},
      {Command::Quasimode, "model.lambda = -3\nexperiment.construction = supercritical\nexperiment.mu = -1\n"
                           "experiment.chi_k_list = 30\n"},
      {Command::CriticalLambda, "model.kind = regular\n"},
      {Command::Existence, "model.kind = regular\nexperiment.lambda_target = 0.2\n"
                           "experiment.existence_k_list = 8, 16\nexperiment.existence_h = 0.1\n"
                           "grid.lx = 4\ngrid.ly = 4\ngrid.h = 0.1\n"},
  };
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  std::size_t files = 0, mismatches = 0;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const RunConfig c = RunConfig::parse(jobs[j].config);
    const fs::path a = root / (std::to_string(j) + "a"), b = root / (std::to_string(j) + "b"),
                   rt = root / (std::to_string(j) + "rt");
    run_command(jobs[j].command, c, a);
    run_command(jobs[j].command, c, b);
    run_command(jobs[j].command, RunConfig::load(a / "run.json"), rt);
    for (const auto& e : fs::directory_iterator(a)) {
      ++files;
      const auto name = e.path().filename();
      if (slurp(e.path()) != slurp(b / name) || slurp(e.path()) != slurp(rt / name)) ++mismatches;
    }
  }
  fs::remove_all(root);
  return {files > 0 && mismatches == 0,
          std::to_string(files) + " files from 6 runs compared against a rerun and a run.json replay, " +
              std::to_string(mismatches) + " differ"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "1D delta comparison operator", 1.0, delta_comparison},
      {2, "critical coupling", 10.0, critical_coupling},
      {3, "Landau levels", 300.0, landau},
      {4, "essential-spectrum threshold", 300.0, essential_threshold},
      {5, "subcritical discrete spectrum", 600.0, subcritical},
      {6, "supercritical dive", 900.0, supercritical_dive},
      {7, "critical regime", 600.0, critical_regime},
      {8, "quasimode certificates", 600.0, quasimode_certificates},
      {9, "oracle equivalence", 60.0, oracle_equivalence},
      {10, "real-form identity", 1.0, real_form_identity},
      {11, "regular-model existence", 300.0, regular_existence},
      {12, "determinism", INFINITY, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("criterion %2d %s: %s [%.1f s%s] %s\n", c.id, c.name, pass ? "PASS" : "FAIL", secs,
                in_time ? "" : ", over budget", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
