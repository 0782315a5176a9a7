#include "magspec/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace magspec {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::RejectsNonpositiveOmega: return "RejectsNonpositiveOmega";
    case ErrorCode::RejectsPositiveLambda: return "RejectsPositiveLambda";
    case ErrorCode::MissingPotential: return "MissingPotential";
    case ErrorCode::InvalidPotential: return "InvalidPotential";
    case ErrorCode::InvalidGrid: return "InvalidGrid";
    case ErrorCode::GridTooCoarse: return "GridTooCoarse";
    case ErrorCode::GridMisaligned: return "GridMisaligned";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::BracketFailure: return "BracketFailure";
    case ErrorCode::DimensionTooSmall: return "DimensionTooSmall";
    case ErrorCode::BreakdownUnrecoverable: return "BreakdownUnrecoverable";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::SupercriticalInput: return "SupercriticalInput";
    case ErrorCode::NotSubcritical: return "NotSubcritical";
    case ErrorCode::NotCritical: return "NotCritical";
    case ErrorCode::WindowEmpty: return "WindowEmpty";
    case ErrorCode::QuadratureUnderResolved: return "QuadratureUnderResolved";
    case ErrorCode::TargetUnreachable: return "TargetUnreachable";
    case ErrorCode::OrthogonalityViolated: return "OrthogonalityViolated";
    case ErrorCode::SolveFailed: return "SolveFailed";
    case ErrorCode::SupportOverflow: return "SupportOverflow";
    case ErrorCode::NeverBelowThreshold: return "NeverBelowThreshold";
    case ErrorCode::UnsupportedCombination: return "UnsupportedCombination";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

std::string_view to_string(ModelKind kind) {
  return kind == ModelKind::DeltaLine ? "DeltaLine" : "RegularV";
}

std::string_view to_string(BoundaryCondition bc) {
  return bc == BoundaryCondition::Dirichlet ? "Dirichlet" : "Neumann";
}

std::string_view to_string(Interpolation interp) {
  return interp == Interpolation::Linear ? "Linear" : "CubicClamped";
}

namespace {

// Moments of the cubic spline with zero end slopes on a uniform grid.
std::vector<double> clamped_spline_moments(const std::vector<double>& y, double h) {
  const std::size_t n = y.size();
  std::vector<double> a(n, 1.0), b(n, 4.0), c(n, 1.0), r(n, 0.0);
  b[0] = 2.0;
  b[n - 1] = 2.0;
  a[0] = 0.0;
  c[n - 1] = 0.0;
  r[0] = 6.0 / h * ((y[1] - y[0]) / h);
  r[n - 1] = 6.0 / h * (-(y[n - 1] - y[n - 2]) / h);
  for (std::size_t i = 1; i + 1 < n; ++i) r[i] = 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]) / (h * h);
  for (std::size_t i = 1; i < n; ++i) {
    const double w = a[i] / b[i - 1];
    b[i] -= w * c[i - 1];
    r[i] -= w * r[i - 1];
  }
  std::vector<double> m(n);
  m[n - 1] = r[n - 1] / b[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) m[i] = (r[i] - c[i] * m[i + 1]) / b[i];
  return m;
}

}  // namespace

PotentialSpec::PotentialSpec(double s0, std::vector<double> samples, Interpolation interpolation)
    : s0_(s0), samples_(std::move(samples)), interpolation_(interpolation) {
  require(std::isfinite(s0) && s0 > 0.0, ErrorCode::InvalidPotential, "s0 must be positive");
  require(samples_.size() >= 3, ErrorCode::InvalidPotential, "need at least 3 samples");
  for (double v : samples_)
    require(std::isfinite(v) && v >= 0.0, ErrorCode::InvalidPotential, "samples must be finite and >= 0");
  require(samples_.front() == 0.0 && samples_.back() == 0.0, ErrorCode::InvalidPotential,
          "V(+-s0) must vanish");
  ds_ = 2.0 * s0_ / static_cast<double>(samples_.size() - 1);
  if (interpolation_ == Interpolation::CubicClamped)
    second_derivatives_ = clamped_spline_moments(samples_, ds_);
}

PotentialSpec PotentialSpec::from_function(double s0, std::size_t n,
                                           const std::function<double(double)>& f,
                                           Interpolation interpolation) {
  require(n >= 3, ErrorCode::InvalidPotential, "need at least 3 samples");
  std::vector<double> v(n);
  const double ds = 2.0 * s0 / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = -s0 + static_cast<double>(i) * ds;
    v[i] = std::max(0.0, f(s));
  }
  v.front() = 0.0;
  v.back() = 0.0;
  return PotentialSpec(s0, std::move(v), interpolation);
}

PotentialSpec PotentialSpec::square_well(double half_width, double height, double ramp) {
  require(half_width > 0.0 && height >= 0.0 && ramp > 0.0, ErrorCode::InvalidPotential,
          "square well needs positive width and ramp");
  const double s0 = half_width + 0.5 * ramp;
  const auto intervals = static_cast<std::size_t>(std::ceil(2.0 * s0 / ramp - 1e-9));
  return from_function(
      s0, intervals + 1,
      [=](double s) { return height * std::clamp((s0 - std::abs(s)) / ramp, 0.0, 1.0); });
}

double PotentialSpec::operator()(double s) const {
  if (!(std::abs(s) < s0_)) return 0.0;
  const double u = (s + s0_) / ds_;
  const std::size_t n = samples_.size();
  auto i = static_cast<std::size_t>(std::floor(u));
  if (i >= n - 1) i = n - 2;
  const double t = u - static_cast<double>(i);
  const double y0 = samples_[i], y1 = samples_[i + 1];
  if (interpolation_ == Interpolation::Linear) return (1.0 - t) * y0 + t * y1;
  const double m0 = second_derivatives_[i], m1 = second_derivatives_[i + 1];
  const double h2 = ds_ * ds_;
  const double a = 1.0 - t;
  const double v = a * y0 + t * y1 + h2 / 6.0 * ((a * a * a - a) * m0 + (t * t * t - t) * m1);
  return std::max(0.0, v);
}

double PotentialSpec::sup_norm() const {
  double m = *std::max_element(samples_.begin(), samples_.end());
  if (interpolation_ == Interpolation::CubicClamped) {
    for (std::size_t i = 0; i + 1 < samples_.size(); ++i)
      for (int q = 1; q < 8; ++q) m = std::max(m, (*this)(-s0_ + (i + q / 8.0) * ds_));
  }
  return m;
}

double PotentialSpec::integral() const {
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < samples_.size(); ++i) {
    sum += 0.5 * (samples_[i] + samples_[i + 1]) * ds_;
    if (interpolation_ == Interpolation::CubicClamped)
      sum -= ds_ * ds_ * ds_ / 24.0 * (second_derivatives_[i] + second_derivatives_[i + 1]);
  }
  return sum;
}

bool PotentialSpec::is_symmetric(double tol) const {
  const std::size_t n = samples_.size();
  for (std::size_t i = 0; i < n / 2; ++i)
    if (std::abs(samples_[i] - samples_[n - 1 - i]) > tol) return false;
  return true;
}

bool PotentialSpec::is_zero() const {
  return std::all_of(samples_.begin(), samples_.end(), [](double v) { return v == 0.0; });
}

PotentialSpec PotentialSpec::dilated(double factor) const {
  require(factor > 0.0, ErrorCode::InvalidPotential, "dilation factor must be positive");
  return PotentialSpec(s0_ / factor, samples_, interpolation_);
}

PotentialSpec read_potential_file(const std::filesystem::path& path, Interpolation interpolation) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::IoError, "cannot open potential file " + path.string());
  std::string line;
  std::optional<double> s0;
  std::vector<double> s, v;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    if (line[first] == '#') {
      const auto pos = line.find("s0=");
      if (!s0 && line.find("potential") != std::string::npos && pos != std::string::npos) {
        try {
          s0 = std::stod(line.substr(pos + 3));
        } catch (const std::exception&) {
          throw Error(ErrorCode::InvalidPotential, "malformed s0 in header");
        }
      }
      continue;
    }
    require(s0.has_value(), ErrorCode::InvalidPotential, "missing '# potential s0=' header");
    std::istringstream row(line);
    double a = 0.0, b = 0.0;
    require(static_cast<bool>(row >> a >> b), ErrorCode::InvalidPotential, "malformed row: " + line);
    s.push_back(a);
    v.push_back(b);
  }
  require(s0.has_value(), ErrorCode::InvalidPotential, "missing '# potential s0=' header");
  require(s.size() >= 3, ErrorCode::InvalidPotential, "need at least 3 samples");
  const double ds = 2.0 * *s0 / static_cast<double>(s.size() - 1);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i > 0) require(s[i] > s[i - 1], ErrorCode::InvalidPotential, "s must be strictly increasing");
    const double expected = -*s0 + static_cast<double>(i) * ds;
    require(std::abs(s[i] - expected) <= 1e-6 * std::max(1.0, *s0), ErrorCode::InvalidPotential,
            "samples must be uniform on [-s0, s0]");
  }
  return PotentialSpec(*s0, std::move(v), interpolation);
}

void write_potential_file(const std::filesystem::path& path, const PotentialSpec& potential) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::IoError, "cannot write " + path.string());
  out << std::setprecision(17) << "# potential s0=" << potential.s0() << '\n';
  const auto& v = potential.samples();
  for (std::size_t i = 0; i < v.size(); ++i)
    out << -potential.s0() + static_cast<double>(i) * potential.spacing() << ' ' << v[i] << '\n';
}

double ModelParams::transverse_frequency() const {
  return std::sqrt(omega * omega + b_field * b_field);
}

ModelParams validate_params(const ModelParams& p) {
  if (!(std::isfinite(p.omega) && p.omega > 0.0))
    throw Error(ErrorCode::RejectsNonpositiveOmega, "omega must be > 0");
  if (!(std::isfinite(p.lambda) && p.lambda <= 0.0))
    throw Error(ErrorCode::RejectsPositiveLambda, "lambda must be <= 0");
  if (!(std::isfinite(p.b_field) && p.b_field >= 0.0))
    throw Error(ErrorCode::InvalidParameter, "magnetic field must be >= 0");
  if (p.kind == ModelKind::RegularV && !p.potential)
    throw Error(ErrorCode::MissingPotential, "RegularV model requires a potential");
  return p;
}

Grid1D Grid1D::make(double l, std::size_t n, BoundaryCondition bc, double center) {
  require(std::isfinite(l) && l > 0.0, ErrorCode::InvalidGrid, "half-width must be positive");
  require(n >= 3 && n % 2 == 1, ErrorCode::InvalidGrid, "node count must be odd and >= 3");
  return Grid1D{l, n, 2.0 * l / static_cast<double>(n - 1), bc, center};
}

namespace {
std::size_t odd_count_for(double l, double h_max) {
  require(h_max > 0.0, ErrorCode::InvalidGrid, "spacing must be positive");
  auto intervals = static_cast<std::size_t>(std::ceil(2.0 * l / h_max - 1e-9));
  if (intervals < 2) intervals = 2;
  if (intervals % 2 == 1) ++intervals;
  return intervals + 1;
}
}  // namespace

Grid1D Grid1D::with_spacing(double l, double h_max, BoundaryCondition bc, double center) {
  return make(l, odd_count_for(l, h_max), bc, center);
}

std::vector<double> Grid1D::nodes() const {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = x(i);
  return out;
}

Grid2D Grid2D::make(double lx, double ly, std::size_t nx, std::size_t ny, BoundaryCondition bc,
                    double x_center, double y_center) {
  const Grid1D gx = Grid1D::make(lx, nx, bc, x_center);
  const Grid1D gy = Grid1D::make(ly, ny, bc, y_center);
  return Grid2D{lx, ly, nx, ny, gx.h, gy.h, bc, x_center, y_center};
}

Grid2D Grid2D::with_spacing(double lx, double ly, double hx_max, double hy_max,
                            BoundaryCondition bc, double x_center, double y_center) {
  return make(lx, ly, odd_count_for(lx, hx_max), odd_count_for(ly, hy_max), bc, x_center,
              y_center);
}

bool Grid2D::spans_x_zero() const { return x_min() <= 0.0 && x_max() >= 0.0; }

std::optional<std::size_t> Grid2D::x_zero_node() const {
  if (!spans_x_zero()) return std::nullopt;
  const double u = -x_min() / hx;
  const auto i = static_cast<std::size_t>(std::llround(u));
  if (i < nx && std::abs(x(i)) <= 1e-9 * hx) return i;
  return std::nullopt;
}

Grid1D Grid2D::x_grid() const { return Grid1D{lx, nx, hx, bc, x_center}; }
Grid1D Grid2D::y_grid() const { return Grid1D{ly, ny, hy, bc, y_center}; }

bool Grid2D::same_layout(const Grid2D& o) const {
  return nx == o.nx && ny == o.ny && hx == o.hx && hy == o.hy && bc == o.bc &&
         x_center == o.x_center && y_center == o.y_center;
}

EsaReport esa_condition_check(const ModelParams& p, const PotentialSpec& V, std::size_t annuli) {
  EsaReport r;
  r.K = 0.5;
  r.k = std::abs(p.lambda) * V.sup_norm();
  r.annuli_checked = annuli;
  bool ok = std::isfinite(r.k);
  for (std::size_t m = 0; m < annuli && ok; ++m) {
    const double a = static_cast<double>(m), b = a + 1.0, nu = a + 1.0;
    ok = ok && (b - a) * (b - a) * nu > r.K;
    // On A_m one has y^2 < b^2 = nu^2, so the potential is bounded below by -|lambda| |V|_inf nu^2.
    const double lower = -std::abs(p.lambda) * V.sup_norm() * b * b;
    ok = ok && lower >= -r.k * nu * nu * (b - a) * (b - a);
    r.harmonic_partial_sum += 1.0 / nu;
  }
  r.holds = ok;
  return r;
}

}  // namespace magspec
