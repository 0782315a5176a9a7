#include "magspec/quasimode.hpp"

#include <Eigen/Dense>
#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/legendre.hpp>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <memory>
#include <numbers>

namespace magspec {

std::string_view to_string(Construction c) {
  switch (c) {
    case Construction::SubcriticalPacket: return "SubcriticalPacket";
    case Construction::Supercritical: return "Supercritical";
    case Construction::Critical: return "Critical";
  }
  return "?";
}

double Quasimode::norm() const {
  double s = 0.0;
  for (const cplx& z : values) s += std::norm(z);
  return std::sqrt(s * grid.hx * grid.hy);
}

std::pair<double, double> build_E_window(double mu, double eps, double omega, double b_field) {
  require(omega > 0.0, ErrorCode::RejectsNonpositiveOmega, "omega must be positive");
  require(eps >= 0.0, ErrorCode::InvalidParameter, "eps must be nonnegative");
  const double a2 = omega * omega + b_field * b_field;
  const double mt = mu - std::sqrt(a2);
  if (!(mt - eps > 1e-12 * std::max(1.0, std::abs(mu)))) throw Error(ErrorCode::WindowEmpty, "mu must exceed sqrt(omega^2+B^2) + eps");
  return {std::sqrt((mt - eps) * a2) / omega, std::sqrt((mt + eps) * a2) / omega};
}

// ---------------------------------------------------------------------------------------------

namespace {

constexpr double kS2 = 181.0 / 462.0;  // int_0^1 S^2 for the quintic smoothstep
constexpr double kDS2 = 10.0 / 7.0;    // int_0^1 S'^2

double step(double x) { return x * x * x * (10.0 + x * (-15.0 + 6.0 * x)); }
double step1(double x) { return 30.0 * x * x * (1.0 - x) * (1.0 - x); }
double step2(double x) { return 60.0 * x * (1.0 - x) * (1.0 - 2.0 * x); }

// Plateau P on [0, 1] with ramps of width w, and its first two derivatives.
std::array<double, 3> plateau(double u, double w) {
  if (u <= 0.0 || u >= 1.0) return {0.0, 0.0, 0.0};
  if (u < w) return {step(u / w), step1(u / w) / w, step2(u / w) / (w * w)};
  if (u > 1.0 - w) {
    const double v = (1.0 - u) / w;
    return {step(v), -step1(v) / w, step2(v) / (w * w)};
  }
  return {1.0, 0.0, 0.0};
}

template <class F>
double composite_gauss(F f, double a, double b, std::size_t panels) {
  double s = 0.0;
  const double d = (b - a) / static_cast<double>(panels);
  for (std::size_t p = 0; p < panels; ++p)
    s += boost::math::quadrature::gauss<double, 20>::integrate(
        f, a + d * static_cast<double>(p), a + d * static_cast<double>(p + 1));
  return s;
}

void verify_chi_k(CutoffFamily& c) {
  const double L = std::log(c.k);
  c.weighted_norm = composite_gauss(
      [&](double s) {
        const double v = c(std::exp(s));
        return v * v;
      },
      0.0, L, 64);
  c.eps = composite_gauss(
      [&](double s) {
        const double z = std::exp(s);
        const double d = c.d1(z);
        return z * z * d * d;
      },
      0.0, L, 64);
}

double chi_k_eps_formula(double k, double w) {
  const double L = std::log(k);
  return 2.0 * kDS2 / w / (L * L * (1.0 - 2.0 * w + 2.0 * w * kS2));
}

double optimal_ramp() { return std::min(0.5, 1.0 / (4.0 * (1.0 - kS2))); }

}  // namespace

double CutoffFamily::operator()(double z) const {
  const double u = kind == CutoffKind::ChiK_log ? (z > 0.0 ? std::log(z) / std::log(k) : -1.0)
                                                : (z - a) / (b - a);
  return amplitude * plateau(u, ramp)[0];
}

double CutoffFamily::d1(double z) const {
  if (kind == CutoffKind::ChiK_log) {
    if (z <= 0.0) return 0.0;
    const double L = std::log(k);
    return amplitude * plateau(std::log(z) / L, ramp)[1] / (z * L);
  }
  return amplitude * plateau((z - a) / (b - a), ramp)[1] / (b - a);
}

double CutoffFamily::d2(double z) const {
  if (kind == CutoffKind::ChiK_log) {
    if (z <= 0.0) return 0.0;
    const double L = std::log(k);
    const auto p = plateau(std::log(z) / L, ramp);
    return amplitude * (p[2] / (z * z * L * L) - p[1] / (z * z * L));
  }
  const double w = b - a;
  return amplitude * plateau((z - a) / w, ramp)[2] / (w * w);
}

double chi_k_min_eps(double k) {
  require(k > 1.0, ErrorCode::InvalidParameter, "k must exceed 1");
  return chi_k_eps_formula(k, optimal_ramp());
}

CutoffFamily make_chi_k(double k, double eps_target, bool allow_rescale) {
  require(k >= 8.0, ErrorCode::InvalidParameter, "k must be at least 8");
  require(eps_target > 0.0, ErrorCode::InvalidParameter, "eps_target must be positive");
  while (chi_k_min_eps(k) > eps_target) {
    if (!allow_rescale || k > 1e150) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "int z chi_k'^2 >= %.6g for k = %.6g", chi_k_min_eps(k), k);
      throw Error(ErrorCode::TargetUnreachable, buf);
    }
    k *= 2.0;
  }
  CutoffFamily c;
  c.kind = CutoffKind::ChiK_log;
  c.k = k;
  c.a = 1.0;
  c.b = k;
  c.ramp = optimal_ramp();
  const double i2 = 1.0 - 2.0 * c.ramp + 2.0 * c.ramp * kS2;
  c.amplitude = 1.0 / std::sqrt(std::log(k) * i2);
  verify_chi_k(c);
  require(std::abs(c.weighted_norm - 1.0) <= 1e-6, ErrorCode::InvalidParameter,
          "chi_k normalization failed");
  return c;
}

CutoffFamily chi_fixed() {
  CutoffFamily c;
  c.kind = CutoffKind::ChiFixed;
  c.a = 1.0;
  c.b = 2.0;
  c.ramp = 0.5;
  c.amplitude = std::sqrt(1.0 / kS2);
  c.weighted_norm = composite_gauss(
      [&](double z) {
        const double v = c(z);
        return v * v;
      },
      1.0, 2.0, 8);
  return c;
}

CutoffFamily eta_plateau(double m, double ramp) {
  require(m > 1.0 + 2.0 * ramp, ErrorCode::InvalidParameter, "eta plateau is empty");
  CutoffFamily c;
  c.kind = CutoffKind::EtaPlateau;
  c.a = 1.0;
  c.b = m;
  c.ramp = ramp / (m - 1.0);
  return c;
}

CutoffFamily chi_plateau(double ramp) {
  require(ramp > 0.0 && ramp < 1.0, ErrorCode::InvalidParameter, "ramp must lie in (0, 1)");
  CutoffFamily c;
  c.kind = CutoffKind::ChiPlateau;
  c.a = -1.0;
  c.b = 1.0;
  c.ramp = ramp / 2.0;
  return c;
}

// ---------------------------------------------------------------------------------------------

namespace {

// Gauss-Legendre nodes and weights on [a, b].
void gauss_legendre(std::size_t n, double a, double b, std::vector<double>& x,
                    std::vector<double>& w) {
  const auto zeros = boost::math::legendre_p_zeros<double>(static_cast<int>(n));
  x.clear();
  w.clear();
  const double c = 0.5 * (a + b), r = 0.5 * (b - a);
  auto push = [&](double t) {
    const double dp = boost::math::legendre_p_prime(static_cast<int>(n), t);
    x.push_back(c + r * t);
    w.push_back(r * 2.0 / ((1.0 - t * t) * dp * dp));
  };
  for (auto it = zeros.rbegin(); it != zeros.rend(); ++it)
    if (*it != 0.0) push(-*it);
  for (double t : zeros) push(t);
}

double oscillator_g(double a, double y) {
  return std::pow(a / std::numbers::pi, 0.25) * std::exp(-0.5 * a * y * y);
}

}  // namespace

Grid2D packet_grid(const ModelParams& params, double mu, double eps, double k, double m,
                   double h) {
  const auto [d1, d2] = build_E_window(mu, eps, params.omega, params.b_field);
  (void)d1;
  const double a = params.transverse_frequency();
  const double shift = d2 * params.b_field / (a * a);
  const double half_y = std::min(k, shift + 12.0 / std::sqrt(a));
  const double half_x = 0.5 * (m * k - k) + 2.0 * h;
  return Grid2D::with_spacing(half_x, half_y, h, h, BoundaryCondition::Dirichlet,
                              0.5 * (k + m * k), 0.0);
}

Quasimode build_subcritical_packet(const ModelParams& params, double mu, double eps, double k,
                                   const PacketOptions& options, const Grid2D& grid) {
  validate_params(params);
  require(k > 0.0 && options.alpha > 0.0 && options.m > 2.0, ErrorCode::InvalidParameter,
          "packet parameters out of range");
  const auto [d1, d2] = build_E_window(mu, eps, params.omega, params.b_field);
  const double k_lo = k, k_hi = options.m * k;
  if (grid.x_min() > k_lo || grid.x_max() < k_hi)
    throw Error(ErrorCode::SupportOverflow, "grid does not cover [k, m k] in x");

  const double a2 = params.omega * params.omega + params.b_field * params.b_field;
  const double a = std::sqrt(a2);
  const double vol = d2 - d1;
  const double xc = options.alpha * k;

  // the xi-integrand turns through vol * |x - alpha k| radians across E
  const double phase = vol * std::max(std::abs(grid.x_min() - xc), std::abs(grid.x_max() - xc));
  std::size_t nodes = std::max(options.nodes, std::size_t{200});
  const auto needed = static_cast<std::size_t>(std::ceil(0.75 * phase)) + 40;
  if (nodes < needed) nodes = needed;
  if (nodes > options.max_nodes)
    throw Error(ErrorCode::QuadratureUnderResolved, "xi-quadrature needs more nodes than allowed");

  std::vector<double> xi, wq;
  gauss_legendre(nodes, d1, d2, xi, wq);
  const auto Q = static_cast<Eigen::Index>(xi.size());
  const auto NX = static_cast<Eigen::Index>(grid.nx), NY = static_cast<Eigen::Index>(grid.ny);
  const CutoffFamily eta = eta_plateau(options.m);
  const CutoffFamily chi = chi_plateau();

  Eigen::MatrixXcd P(NX, Q);
  for (Eigen::Index i = 0; i < NX; ++i) {
    const double x = grid.x(static_cast<std::size_t>(i));
    const double e = eta(x / k);
    for (Eigen::Index q = 0; q < Q; ++q)
      P(i, q) = e == 0.0 ? cplx(0.0) : std::polar(e, xi[static_cast<std::size_t>(q)] * (x - xc));
  }
  Eigen::MatrixXcd G(Q, NY);
  for (Eigen::Index j = 0; j < NY; ++j) {
    const double y = grid.y(static_cast<std::size_t>(j));
    const double c = chi(y / k);
    for (Eigen::Index q = 0; q < Q; ++q) {
      const auto qq = static_cast<std::size_t>(q);
      G(q, j) = wq[qq] * c * oscillator_g(a, y + xi[qq] * params.b_field / a2);
    }
  }
  Eigen::MatrixXcd M = P * G;
  M /= std::sqrt(2.0 * std::numbers::pi * vol);

  Quasimode qm;
  qm.grid = grid;
  qm.values.assign(M.data(), M.data() + M.size());
  qm.mu = mu;
  qm.params = params;
  qm.construction = Construction::SubcriticalPacket;
  const double n = qm.norm();
  qm.meta = {{"k", k},           {"alpha", options.alpha},  {"m", options.m},
             {"eps", eps},       {"nodes", double(nodes)},  {"delta1", d1},
             {"delta2", d2},     {"norm2", n * n},          {"eta_sup", eta.sup()},
             {"chi_sup", chi.sup()}, {"norm2_bound", 1.0 / 64.0}};
  return qm;
}

Quasimode build_subcritical_packet_auto(const ModelParams& params, double mu, double eps, double k,
                                        double h, PacketOptions options, int max_doublings) {
  for (int d = 0;; ++d) {
    const Grid2D grid = packet_grid(params, mu, eps, k, options.m, h);
    Quasimode q = build_subcritical_packet(params, mu, eps, k, options, grid);
    if (q.meta.at("norm2") >= 1.0 / 64.0) return q;
    if (d >= max_doublings)
      throw Error(ErrorCode::QuadratureUnderResolved, "packet norm stays below 1/64");
    options.alpha *= 2.0;
    options.m *= 2.0;
  }
}

// ---------------------------------------------------------------------------------------------

ScalingMap normalize_supercritical(const ModelParams& params, const std::optional<Grid1D>& grid) {
  validate_params(params);
  double inf_l = 0.0;
  if (params.kind == ModelKind::DeltaLine) {
    inf_l = exact_inf_L(params.omega, params.lambda);
  } else {
    const PotentialSpec& V = *params.potential;
    const Grid1D g = grid ? *grid : default_potential_grid(params.omega, V);
    inf_l = tridiag_eigenvalue(assemble_L(params.omega, params.lambda, g, V), 0);
  }
  if (!(inf_l < 0.0)) throw Error(ErrorCode::InvalidParameter, "parameters are not supercritical");
  ScalingMap m;
  m.original = params;
  m.s = std::pow(-inf_l, -0.25);
  const double s2 = m.s * m.s;
  m.normalized = params;
  m.normalized.omega = params.omega * s2;
  m.normalized.b_field = params.b_field * s2;
  if (params.kind == ModelKind::DeltaLine) {
    m.normalized.lambda = params.lambda * s2;
  } else {
    m.normalized.lambda = params.lambda * s2 * s2;
    m.normalized.potential = params.potential->dilated(s2);
  }
  return m;
}

namespace {

void require_normalized_delta(const ModelParams& p) {
  const double kappa = 0.5 * std::abs(p.lambda);
  require(p.lambda < 0.0 && std::abs(p.omega * p.omega - kappa * kappa + 1.0) <= 1e-8,
          ErrorCode::InvalidParameter, "requires omega^2 - lambda^2/4 = -1");
}

}  // namespace

double orthogonality_integral(double omega, double lambda, double b_field) {
  require(lambda < 0.0, ErrorCode::RejectsPositiveLambda, "lambda must be negative");
  (void)omega;
  const double kappa = 0.5 * std::abs(lambda);
  const double c = std::sqrt(kappa);
  const double T = 40.0 / kappa;
  auto part = [&](double sign) {
    double re = 0.0, im = 0.0;
    const auto fr = [&](double u) {
      const double t = sign * u, h = c * std::exp(-kappa * u);
      return 2.0 * b_field * t * h * h;
    };
    const auto fi = [&](double u) {
      const double t = sign * u, h = c * std::exp(-kappa * u), dh = -kappa * sign * h;
      return (2.0 * t * dh + h) * h;
    };
    re = composite_gauss(fr, 0.0, T, 32);
    im = composite_gauss(fi, 0.0, T, 32);
    return cplx(re, im);
  };
  return std::abs(part(1.0) + part(-1.0));
}

Grid1D default_f_grid(const ModelParams& normalized) {
  const double kappa = 0.5 * std::abs(normalized.lambda);
  const double h = 0.005 / std::max(1.0, kappa);
  return Grid1D::with_spacing(40.0 / std::max(kappa, 1e-3), h);
}

FSolution solve_f_ode(const ModelParams& normalized, const Grid1D& grid) {
  validate_params(normalized);
  const bool delta = normalized.kind == ModelKind::DeltaLine;
  if (delta) require_normalized_delta(normalized);
  const std::optional<PotentialSpec> V =
      delta ? std::nullopt : std::optional<PotentialSpec>(*normalized.potential);
  const Tridiag T = assemble_L(normalized.omega, normalized.lambda, grid, V, true,
                               delta ? DeltaScheme::LatticeMatched : DeltaScheme::NodeBump);
  const Eigenpair1D g0 = eigenpair_1d(T, 0);
  if (!delta)
    require(std::abs(g0.value + 1.0) <= 1e-3, ErrorCode::InvalidParameter,
            "requires inf sigma(L(V)) = -1");

  const std::size_t n = grid.n;
  const double h = grid.h, B = normalized.b_field;
  const std::vector<double>& hd = g0.vector;
  auto at = [&](const std::vector<double>& v, std::ptrdiff_t i) {
    return (i < 0 || i >= static_cast<std::ptrdiff_t>(n)) ? 0.0 : v[static_cast<std::size_t>(i)];
  };
  std::vector<double> th(n);
  for (std::size_t i = 0; i < n; ++i) th[i] = grid.x(i) * hd[i];
  // skew-symmetric form of 2 t h' + h keeps <g, h> = 0 on the lattice
  std::vector<double> g_im(n), g_re(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<std::ptrdiff_t>(i);
    const double t = grid.x(i);
    const double d_th = (at(th, ii + 1) - at(th, ii - 1)) / (2.0 * h);
    const double d_h = (at(hd, ii + 1) - at(hd, ii - 1)) / (2.0 * h);
    g_im[i] = d_th + t * d_h;
    g_re[i] = 2.0 * B * t * hd[i];
  }
  auto inner = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s * h;
  };
  auto project = [&](std::vector<double>& v) {
    const double c = inner(v, hd);
    for (std::size_t i = 0; i < n; ++i) v[i] -= c * hd[i];
  };
  auto solve = [&](const std::vector<double>& rhs_in) {
    std::vector<double> rhs = rhs_in;
    project(rhs);
    std::vector<double> x = solve_shifted(T, g0.value, rhs);
    project(x);
    for (int it = 0; it < 2; ++it) {
      std::vector<double> ax = T.apply(x);
      std::vector<double> r(n);
      for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - (ax[i] - g0.value * x[i]);
      project(r);
      std::vector<double> dx = solve_shifted(T, g0.value, r);
      project(dx);
      for (std::size_t i = 0; i < n; ++i) x[i] += dx[i];
    }
    return x;
  };
  const std::vector<double> f_re = solve(g_re), f_im = solve(g_im);

  FSolution out;
  out.grid = grid;
  out.h = hd;
  out.ground_energy = g0.value;
  out.b_field = B;
  out.f.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.f[i] = cplx(f_re[i], f_im[i]);
  const std::vector<double> ar = T.apply(f_re), ai = T.apply(f_im);
  double res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(grid.x(i)) <= 2.0 * h) continue;
    const cplx lhs(ar[i] - g0.value * f_re[i], ai[i] - g0.value * f_im[i]);
    res = std::max(res, std::abs(lhs - cplx(g_re[i], g_im[i])));
  }
  out.ode_residual = res;
  out.orthogonality_defect =
      delta ? orthogonality_integral(normalized.omega, normalized.lambda, B)
            : std::abs(cplx(inner(g_re, hd), inner(g_im, hd)));
  if (out.orthogonality_defect > 1e-6)
    throw Error(ErrorCode::OrthogonalityViolated, "right-hand side is not orthogonal to h");
  return out;
}

ChannelProfile delta_channel_profile(const ModelParams& normalized) {
  require_normalized_delta(normalized);
  const double kappa = 0.5 * std::abs(normalized.lambda);
  const double c = std::sqrt(kappa), B = normalized.b_field;
  const cplx I(0.0, 1.0);
  const cplx p2 = c * (B - I * kappa) / (2.0 * kappa);
  const cplx q2 = -c * (B + I * kappa) / (2.0 * kappa);
  const double p1 = c * B / (2.0 * kappa * kappa);
  const cplx p0 = I / (4.0 * kappa * kappa) * c;

  ChannelProfile p;
  p.b_field = B;
  p.t_max = 40.0 / kappa;
  p.h = [=](double t) { return c * std::exp(-kappa * std::abs(t)); };
  p.dh = [=](double t) {
    return (t > 0.0 ? -kappa : t < 0.0 ? kappa : 0.0) * c * std::exp(-kappa * std::abs(t));
  };
  p.q = [=](double) { return kappa * kappa; };
  p.f = [=](double t) {
    const double e = std::exp(-kappa * std::abs(t));
    return (t >= 0.0 ? (p2 * t * t + p1 * t) : (q2 * t * t + p1 * t)) * e + p0 * e;
  };
  p.df = [=](double t) {
    const double e = std::exp(-kappa * std::abs(t));
    if (t >= 0.0) return ((2.0 * p2 * t + p1) - kappa * (p2 * t * t + p1 * t + p0)) * e;
    return ((2.0 * q2 * t + p1) + kappa * (q2 * t * t + p1 * t + p0)) * e;
  };
  return p;
}

ChannelProfile interpolated_profile(const ModelParams& normalized, const FSolution& fs) {
  using Spline = boost::math::interpolators::cardinal_cubic_b_spline<double>;
  const std::size_t n = fs.grid.n;
  std::vector<double> re(n), im(n);
  for (std::size_t i = 0; i < n; ++i) {
    re[i] = fs.f[i].real();
    im[i] = fs.f[i].imag();
  }
  const double t0 = fs.grid.x(0), h = fs.grid.h, t1 = fs.grid.x(n - 1);
  auto sh = std::make_shared<Spline>(fs.h.begin(), fs.h.end(), t0, h);
  auto sr = std::make_shared<Spline>(re.begin(), re.end(), t0, h);
  auto si = std::make_shared<Spline>(im.begin(), im.end(), t0, h);
  auto inside = [=](double t) { return t >= t0 && t <= t1; };

  ChannelProfile p;
  p.b_field = fs.b_field;
  p.t_max = std::min(-t0, t1);
  p.h = [=](double t) { return inside(t) ? (*sh)(t) : 0.0; };
  p.dh = [=](double t) { return inside(t) ? sh->prime(t) : 0.0; };
  p.f = [=](double t) { return inside(t) ? cplx((*sr)(t), (*si)(t)) : cplx(0.0); };
  p.df = [=](double t) { return inside(t) ? cplx(sr->prime(t), si->prime(t)) : cplx(0.0); };
  const double w2 = normalized.omega * normalized.omega, lambda = normalized.lambda;
  if (normalized.kind == ModelKind::DeltaLine) {
    p.q = [=](double) { return w2 + 1.0; };
  } else {
    const PotentialSpec V = *normalized.potential;
    p.q = [=](double t) { return w2 + lambda * V(t) + 1.0; };
  }
  return p;
}

double eps_mu_phase(double mu, double y) {
  const double lo = std::sqrt(std::abs(mu));
  require(y >= lo, ErrorCode::InvalidParameter, "phase defined for y >= sqrt|mu|");
  if (y == lo) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      [mu](double t) { return std::sqrt(std::max(0.0, t * t + mu)); }, lo, y, 15, 1e-12);
}

namespace {

// Residual density e^{-i phi} (H psi - mu psi) and psi e^{-i phi} in the gauge A = (0, B x),
// at t = x y, y, for the channel quasimode (h + f / y^2) e^{i phi(y)} chi(y / n).
struct ChannelPoint {
  cplx residual;
  cplx value;
};

ChannelPoint channel_point(const ModelParams& p, double mu, const CutoffFamily& chi, double n,
                           const ChannelProfile& pr, double t, double y) {
  const cplx I(0.0, 1.0);
  const double B = p.b_field;
  const double x = t / y, z = y / n;
  const double c0 = chi(z), c1 = chi.d1(z) / n, c2 = chi.d2(z) / (n * n);
  const double ph1 = std::sqrt(y * y + mu), ph2 = y / ph1;

  const double h = pr.h(t), dh = pr.dh(t), q = pr.q(t);
  const cplx f = pr.f(t), df = pr.df(t);
  const cplx g = 2.0 * I * t * dh + I * h + 2.0 * B * t * h;
  const double ddh = q * h;
  const cplx ddf = q * f - g;
  const double y2 = y * y, y3 = y2 * y, y4 = y2 * y2;

  const cplx phi = h + f / y2;
  const cplx phi_t = dh + df / y2, phi_tt = ddh + ddf / y2;
  const cplx phi_y = -2.0 * f / y3, phi_ty = -2.0 * df / y3, phi_yy = 6.0 * f / y4;
  const cplx D = x * phi_t + phi_y;
  const cplx D2 = x * x * phi_tt + 2.0 * x * phi_ty + phi_yy;
  const cplx E1 = I * ph1 * c0 + c1;
  const cplx E2 = I * ph2 * c0 - ph1 * ph1 * c0 + 2.0 * I * ph1 * c1 + c2;

  const cplx row = (-y2 * h + g - f) * c0;
  const cplx yy = D2 * c0 + 2.0 * D * E1 + phi * E2;
  const cplx mag = 2.0 * I * B * x * (D * c0 + phi * E1) + B * B * x * x * phi * c0;
  return {row - yy + mag - mu * phi * c0, phi * c0};
}

}  // namespace

ContinuumResidual supercritical_continuum(const ModelParams& normalized, double mu,
                                          const CutoffFamily& chi, double n_k,
                                          const ChannelProfile& profile) {
  require(chi.kind == CutoffKind::ChiK_log, ErrorCode::InvalidParameter, "needs a chi_k cutoff");
  require(n_k >= 1.0 && n_k * n_k + mu > 0.0, ErrorCode::InvalidParameter,
          "n_k must satisfy n_k >= 1 and n_k^2 + mu > 0");
  const double s0 = std::log(n_k), s1 = std::log(chi.k * n_k);
  const double T = profile.t_max;
  const std::size_t s_panels = 96, t_panels = 32;
  double res2 = 0.0, norm2 = 0.0;
  using GL = boost::math::quadrature::gauss<double, 20>;
  const double ds = (s1 - s0) / static_cast<double>(s_panels);
  const double dt = T / static_cast<double>(t_panels);
  for (std::size_t a = 0; a < s_panels; ++a) {
    const double sa = s0 + ds * static_cast<double>(a);
    for (std::size_t ia = 0; ia < GL::abscissa().size(); ++ia) {
      for (int sgn_s : {-1, 1}) {
        const double xs = GL::abscissa()[ia] * sgn_s;
        if (ia == 0 && sgn_s == -1 && GL::abscissa()[0] == 0.0) continue;
        const double s = sa + 0.5 * ds * (1.0 + xs), ws = 0.5 * ds * GL::weights()[ia];
        const double y = std::exp(s);
        double rs = 0.0, ns = 0.0;
        for (std::size_t b = 0; b < t_panels; ++b) {
          const double tb = dt * static_cast<double>(b);
          for (std::size_t ib = 0; ib < GL::abscissa().size(); ++ib) {
            for (int sgn_t : {-1, 1}) {
              const double xt = GL::abscissa()[ib] * sgn_t;
              if (ib == 0 && sgn_t == -1 && GL::abscissa()[0] == 0.0) continue;
              const double u = tb + 0.5 * dt * (1.0 + xt), wt = 0.5 * dt * GL::weights()[ib];
              for (double t : {u, -u}) {
                const ChannelPoint cp = channel_point(normalized, mu, chi, n_k, profile, t, y);
                rs += wt * std::norm(cp.residual);
                ns += wt * std::norm(cp.value);
              }
            }
          }
        }
        res2 += ws * rs;
        norm2 += ws * ns;
      }
    }
  }
  return {std::sqrt(norm2), std::sqrt(res2), chi.eps};
}

Quasimode build_supercritical(const ModelParams& normalized, double mu, const CutoffFamily& chi,
                              double n_k, const ChannelProfile& profile, const Grid2D& grid) {
  require(chi.kind == CutoffKind::ChiK_log, ErrorCode::InvalidParameter, "needs a chi_k cutoff");
  require(n_k >= 1.0 && n_k * n_k + mu > 0.0, ErrorCode::InvalidParameter,
          "n_k must satisfy n_k >= 1 and n_k^2 + mu > 0");
  if (grid.y_min() > n_k || grid.y_max() < chi.k * n_k)
    throw Error(ErrorCode::SupportOverflow, "grid does not cover [n_k, k n_k] in y");
  const double B = normalized.b_field;
  Quasimode q;
  q.grid = grid;
  q.mu = mu;
  q.params = normalized;
  q.construction = Construction::Supercritical;
  q.values.assign(grid.size(), cplx(0.0));
  for (std::size_t j = 0; j < grid.ny; ++j) {
    const double y = grid.y(j);
    const double c = chi(y / n_k);
    if (c == 0.0) continue;
    const double ph = mu == 0.0 ? 0.5 * y * y : eps_mu_phase(mu, y);
    for (std::size_t i = 0; i < grid.nx; ++i) {
      const double x = grid.x(i), t = x * y;
      const cplx v = profile.h(t) + profile.f(t) / (y * y);
      q.values[grid.index(i, j)] = v * c * std::polar(1.0, ph - B * x * y);
    }
  }
  q.meta = {{"k", chi.k}, {"n_k", n_k}, {"eps", chi.eps}};
  return q;
}

double next_channel_start(double k_prev, double n_prev) { return std::floor(k_prev * n_prev) + 1.0; }

// ---------------------------------------------------------------------------------------------

Grid2D critical_grid(const ModelParams& params, double n, double hy, std::size_t nx) {
  require(n >= 1.0 && hy > 0.0 && nx >= 3, ErrorCode::InvalidGrid, "invalid critical grid request");
  if (nx % 2 == 0) ++nx;
  const double X = 28.0 / (params.omega * n);
  const double half_y = 0.5 * (n + 2.0);
  const auto ny_half = static_cast<std::size_t>(std::ceil(half_y / hy - 1e-9));
  return Grid2D::make(X, static_cast<double>(ny_half) * hy, nx, 2 * ny_half + 1,
                      BoundaryCondition::Dirichlet, 0.0, 1.5 * n);
}

Quasimode build_critical(const ModelParams& params, double mu, double n, const Grid2D& grid) {
  validate_params(params);
  require(params.kind == ModelKind::DeltaLine, ErrorCode::UnsupportedCombination,
          "critical construction implemented for the delta model");
  if (std::abs(params.lambda + 2.0 * params.omega) > 1e-12)
    throw Error(ErrorCode::NotCritical, "requires lambda = -2 omega");
  require(mu >= 0.0, ErrorCode::InvalidParameter, "mu must be nonnegative");
  require(n >= 1.0, ErrorCode::InvalidParameter, "n must be at least 1");
  const auto i0 = grid.x_zero_node();
  if (!i0) throw Error(ErrorCode::GridMisaligned, "x = 0 must be a node column");
  if (grid.y_min() > n || grid.y_max() < 2.0 * n)
    throw Error(ErrorCode::SupportOverflow, "grid does not cover [n, 2n] in y");

  const CutoffFamily chi = chi_fixed();
  const double B = params.b_field, hx = grid.hx, k = std::sqrt(mu);
  const std::size_t reach = std::min(*i0, grid.nx - 1 - *i0);
  Quasimode q;
  q.grid = grid;
  q.mu = mu;
  q.params = params;
  q.construction = Construction::Critical;
  q.values.assign(grid.size(), cplx(0.0));
  for (std::size_t j = 0; j < grid.ny; ++j) {
    const double y = grid.y(j);
    const double c = chi(y / n);
    if (c == 0.0) continue;
    const double kappa = 0.5 * std::abs(params.lambda) * y;
    const double qq = 2.0 + kappa * kappa * hx * hx;
    const double r = 2.0 / (qq + std::sqrt(qq * qq - 4.0));
    if (std::pow(r, static_cast<double>(reach)) > 1e-12)
      throw Error(ErrorCode::SupportOverflow, "grid too narrow in x for the channel profile");
    const double amp = 1.0 / std::sqrt(y * hx * (1.0 + r * r) / (1.0 - r * r));
    for (std::size_t i = 0; i < grid.nx; ++i) {
      const double x = grid.x(i);
      const auto d = static_cast<double>(i > *i0 ? i - *i0 : *i0 - i);
      q.values[grid.index(i, j)] = amp * std::pow(r, d) * c * std::polar(1.0, k * y - B * x * y);
    }
  }
  q.meta = {{"n", n}};
  return q;
}

// ---------------------------------------------------------------------------------------------

double residual(const Quasimode& q, const SparseHermitian& H) {
  require(H.n == q.values.size(), ErrorCode::GridMismatch, "quasimode and matrix sizes differ");
  const std::vector<cplx> hv = H * q.values;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < hv.size(); ++i) {
    num += std::norm(hv[i] - q.mu * q.values[i]);
    den += std::norm(q.values[i]);
  }
  require(den > 0.0, ErrorCode::ZeroVector, "quasimode vanishes");
  return std::sqrt(num / den);
}

double residual(const Quasimode& q, const AssemblyOptions& options) {
  return residual(q, assemble(q.params, q.grid, options));
}

void write_quasimode(const std::filesystem::path& csv_path, const Quasimode& q) {
  std::ofstream out(csv_path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + csv_path.string());
  out << "x,y,re,im\n";
  char buf[128];
  for (std::size_t j = 0; j < q.grid.ny; ++j)
    for (std::size_t i = 0; i < q.grid.nx; ++i) {
      const cplx v = q.values[q.grid.index(i, j)];
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", q.grid.x(i), q.grid.y(j),
                    v.real(), v.imag());
      out << buf;
    }
  nlohmann::ordered_json j;
  j["construction"] = std::string(to_string(q.construction));
  j["mu"] = q.mu;
  j["gauge"] = "A=(-By,0)";
  j["params"] = {{"omega", q.params.omega},
                 {"b_field", q.params.b_field},
                 {"lambda", q.params.lambda},
                 {"kind", std::string(to_string(q.params.kind))}};
  j["grid"] = {{"lx", q.grid.lx},           {"ly", q.grid.ly},
               {"nx", q.grid.nx},           {"ny", q.grid.ny},
               {"x_center", q.grid.x_center}, {"y_center", q.grid.y_center}};
  j["norm"] = q.norm();
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
  for (const auto& [key, value] : q.meta) meta[key] = value;
  j["meta"] = meta;
  std::ofstream side(csv_path.string() + ".json", std::ios::binary);
  if (!side) throw Error(ErrorCode::IoError, "cannot open sidecar for " + csv_path.string());
  side << j.dump(2) << "\n";
}

}  // namespace magspec
