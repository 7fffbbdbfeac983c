#include "rigidform/curve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <type_traits>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "rigidform/errors.hpp"
#include "rigidform/taylor.hpp"

namespace rigidform {

namespace {

using Jet3 = Taylor<3>;
constexpr double kPi = std::numbers::pi;

struct FamilyInfo {
  CurveFamily family;
  const char* name;
  std::vector<std::pair<std::string, double>> defaults;  // positional order
};

const std::vector<FamilyInfo>& family_table() {
  static const std::vector<FamilyInfo> table = {
      {CurveFamily::Circle, "circle", {{"radius", 1.0}}},
      {CurveFamily::Ellipse, "ellipse", {{"a", 2.0}, {"b", 1.0}}},
      {CurveFamily::Superellipse, "superellipse", {{"a", 1.5}, {"b", 1.0}, {"p", 4.0}}},
      {CurveFamily::Cassini, "cassini", {{"a", 1.1}, {"c", 1.0}}},
      {CurveFamily::Lemniscate, "lemniscate", {{"a", 1.5}}},
      {CurveFamily::Lissajous,
       "lissajous",
       {{"ax", 2.0}, {"ay", 2.0}, {"kx", 3.0}, {"ky", 2.0}, {"phase", kPi / 2.0}}},
      {CurveFamily::Rose, "rose", {{"a", 1.8}, {"k", 3.0}}},
      {CurveFamily::FourierSum,
       "fourier-sum",
       {{"cx1", 1.0}, {"sx1", 0.0}, {"cy1", 0.0}, {"sy1", 1.0},
        {"cx2", 0.25}, {"sx2", 0.0}, {"cy2", 0.0}, {"sy2", 0.15},
        {"cx3", 0.0}, {"sx3", 0.1}, {"cy3", -0.1}, {"sy3", 0.0}}},
      {CurveFamily::Peanut, "peanut", {{"a", 1.5}, {"b", 0.6}}},
      {CurveFamily::Deltoid, "deltoid", {{"a", 1.0}}},
      {CurveFamily::Nephroid, "nephroid", {{"a", 1.0}}},
      {CurveFamily::Spirograph, "spirograph", {{"R", 5.0}, {"r", 1.0}, {"d", 1.5}}},
      {CurveFamily::GearHermite,
       "gear-hermite",
       {{"teeth", 6.0}, {"r_outer", 1.2}, {"r_inner", 0.9}}},
  };
  return table;
}

const FamilyInfo& find_family(const std::string& name) {
  for (const auto& f : family_table())
    if (name == f.name) return f;
  throw ConfigError("unknown curve family '" + name + "'");
}

bool is_integer(double v) { return std::abs(v - std::round(v)) < 1e-12; }

template <class T>
T wrap_taylor(const T& s) {
  T w = s;
  const double v = value_of(s);
  const double k = std::floor(v / kTwoPi);
  if constexpr (std::is_same_v<T, double>) {
    w = s - k * kTwoPi;
  } else {
    w.c[0] = v - k * kTwoPi;
  }
  return w;
}

template <class T>
T hermite(double L, const T& s) {
  const T u = s / L;
  return L * (3.0 * u * u - 2.0 * u * u * u);
}

}  // namespace

double wrap_parameter(double s) {
  double w = std::fmod(s, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w = 0.0;
  return w;
}

double wrap_angle(double a) {
  double w = std::remainder(a, kTwoPi);  // [-pi, pi]
  if (w <= -kPi) w += kTwoPi;
  return w;
}

double hermite_reparam(double segment_length, double s) {
  if (!(segment_length > 0.0)) throw std::domain_error("hermite_reparam: segment length must be positive");
  if (s < 0.0 || s > segment_length)
    throw std::domain_error("hermite_reparam: s outside [0, L]");
  return hermite(segment_length, s);
}

double hermite_reparam_rate(double segment_length, double s) {
  if (!(segment_length > 0.0)) throw std::domain_error("hermite_reparam: segment length must be positive");
  if (s < 0.0 || s > segment_length)
    throw std::domain_error("hermite_reparam: s outside [0, L]");
  const double u = s / segment_length;
  return 6.0 * u * (1.0 - u);
}

std::vector<std::string> curve_families() {
  std::vector<std::string> names;
  for (const auto& f : family_table()) names.emplace_back(f.name);
  return names;
}

std::map<std::string, double> family_defaults(const std::string& family) {
  std::map<std::string, double> out;
  for (const auto& [k, v] : find_family(family).defaults) out[k] = v;
  return out;
}

Curve::Curve(const CurveSpec& spec, DerivativeMode mode) : mode_(mode) {
  const FamilyInfo& info = find_family(spec.family);
  family_ = info.family;
  spec_.family = info.name;
  for (const auto& [key, value] : spec.params) {
    const bool known = std::any_of(info.defaults.begin(), info.defaults.end(),
                                   [&](const auto& d) { return d.first == key; });
    if (!known) throw ConfigError("unknown parameter '" + key + "' for curve family '" + spec.family + "'");
    if (!std::isfinite(value)) throw ConfigError("curve parameter '" + key + "' is not finite");
  }
  for (const auto& [key, def] : info.defaults) {
    auto it = spec.params.find(key);
    const double v = it == spec.params.end() ? def : it->second;
    spec_.params[key] = v;
    p_.push_back(v);
  }

  auto require = [&](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(spec_.family + ": " + msg);
  };
  switch (family_) {
    case CurveFamily::Circle:
      require(p_[0] > 0.0, "radius must be positive");
      break;
    case CurveFamily::Ellipse:
      require(p_[0] > 0.0 && p_[1] > 0.0, "semi-axes must be positive");
      break;
    case CurveFamily::Superellipse:
      require(p_[0] > 0.0 && p_[1] > 0.0, "semi-axes must be positive");
      require(p_[2] >= 2.0 && is_integer(p_[2]) && static_cast<long>(std::round(p_[2])) % 2 == 0,
              "exponent p must be an even integer >= 2");
      break;
    case CurveFamily::Cassini:
      require(p_[1] > 0.0 && p_[0] > p_[1], "need a > c > 0 for a single closed oval");
      break;
    case CurveFamily::Lemniscate:
    case CurveFamily::Deltoid:
    case CurveFamily::Nephroid:
      require(p_[0] > 0.0, "scale parameter must be positive");
      break;
    case CurveFamily::Lissajous:
      require(p_[0] > 0.0 && p_[1] > 0.0, "amplitudes must be positive");
      require(is_integer(p_[2]) && is_integer(p_[3]) && p_[2] >= 1.0 && p_[3] >= 1.0,
              "frequencies must be positive integers");
      break;
    case CurveFamily::Rose:
      require(p_[0] > 0.0, "amplitude must be positive");
      require(is_integer(p_[1]) && p_[1] >= 1.0, "k must be a positive integer");
      break;
    case CurveFamily::FourierSum:
      break;
    case CurveFamily::Peanut:
      require(p_[0] > 0.0 && p_[1] >= 0.0 && p_[1] < 1.0, "need a > 0 and 0 <= b < 1");
      break;
    case CurveFamily::Spirograph:
      require(p_[1] > 0.0 && p_[0] > p_[1], "need R > r > 0");
      require(is_integer((p_[0] - p_[1]) / p_[1]), "(R - r) / r must be an integer for 2*pi closure");
      break;
    case CurveFamily::GearHermite: {
      require(is_integer(p_[0]) && p_[0] >= 2.0, "teeth must be an integer >= 2");
      require(p_[2] > 0.0 && p_[1] > p_[2], "need r_outer > r_inner > 0");
      const int teeth = static_cast<int>(std::round(p_[0]));
      const double q = kTwoPi / teeth;
      for (int j = 0; j < teeth; ++j) {
        const double a = j * q;
        const double radii[4] = {p_[2], p_[1], p_[1], p_[2]};
        for (int m = 0; m < 4; ++m) {
          const double ang = a + m * q / 4.0;
          vertices_.emplace_back(radii[m] * std::cos(ang), radii[m] * std::sin(ang));
        }
      }
      break;
    }
  }

  constexpr int kScaleSamples = 4096;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (int k = 0; k < kScaleSamples; ++k) {
    const double s = kTwoPi * k / kScaleSamples;
    const Vec2 q = eval(s);
    xmin = std::min(xmin, q.x());
    xmax = std::max(xmax, q.x());
    ymin = std::min(ymin, q.y());
    ymax = std::max(ymax, q.y());
    max_speed_ = std::max(max_speed_, deriv(s, 1).norm());
  }
  scale_ = 0.5 * std::hypot(xmax - xmin, ymax - ymin);
  length_ = arclength(0.0, kTwoPi);
}

template <class T>
void Curve::shape(const T& s_in, T& x, T& y) const {
  using std::cos;
  using std::pow;
  using std::sin;
  using std::sqrt;
  const T s = wrap_taylor(s_in);
  const auto& p = p_;
  switch (family_) {
    case CurveFamily::Circle:
      x = p[0] * cos(s);
      y = p[0] * sin(s);
      return;
    case CurveFamily::Ellipse:
      x = p[0] * cos(s);
      y = p[1] * sin(s);
      return;
    case CurveFamily::Superellipse: {
      // Polar form r = (cos^p/a^p + sin^p/b^p)^(-1/p); smooth for even p.
      const int half = static_cast<int>(std::round(p[2])) / 2;
      const T c2 = cos(s) * cos(s), s2 = sin(s) * sin(s);
      T cp(1.0), sp(1.0);
      for (int i = 0; i < half; ++i) {
        cp = cp * c2;
        sp = sp * s2;
      }
      const T f = cp / std::pow(p[0], p[2]) + sp / std::pow(p[1], p[2]);
      const T r = pow(f, -1.0 / p[2]);
      x = r * cos(s);
      y = r * sin(s);
      return;
    }
    case CurveFamily::Cassini: {
      // Single oval of (x^2+y^2)^2 - 2c^2(x^2-y^2) = a^4 - c^4 in polar form.
      const double a4 = std::pow(p[0], 4.0), c2 = p[1] * p[1], c4 = c2 * c2;
      const T s2 = sin(2.0 * s);
      const T r2 = c2 * cos(2.0 * s) + sqrt(a4 - c4 * s2 * s2);
      const T r = sqrt(r2);
      x = r * cos(s);
      y = r * sin(s);
      return;
    }
    case CurveFamily::Lemniscate: {
      const T den = 1.0 + sin(s) * sin(s);
      x = p[0] * cos(s) / den;
      y = p[0] * sin(s) * cos(s) / den;
      return;
    }
    case CurveFamily::Lissajous:
      x = p[0] * sin(p[2] * s + p[4]);
      y = p[1] * sin(p[3] * s);
      return;
    case CurveFamily::Rose:
      x = p[0] * cos(p[1] * s) * cos(s);
      y = p[0] * cos(p[1] * s) * sin(s);
      return;
    case CurveFamily::FourierSum: {
      x = T(0.0);
      y = T(0.0);
      for (int h = 1; h <= 3; ++h) {
        const T ch = cos(static_cast<double>(h) * s), sh = sin(static_cast<double>(h) * s);
        const double* q = &p[4 * (h - 1)];
        x += q[0] * ch + q[1] * sh;
        y += q[2] * ch + q[3] * sh;
      }
      return;
    }
    case CurveFamily::Peanut: {
      const T r = p[0] * (1.0 + p[1] * cos(2.0 * s));
      x = r * cos(s);
      y = r * sin(s);
      return;
    }
    case CurveFamily::Deltoid:
      x = p[0] * (2.0 * cos(s) + cos(2.0 * s));
      y = p[0] * (2.0 * sin(s) - sin(2.0 * s));
      return;
    case CurveFamily::Nephroid:
      x = p[0] * (3.0 * cos(s) - cos(3.0 * s));
      y = p[0] * (3.0 * sin(s) - sin(3.0 * s));
      return;
    case CurveFamily::Spirograph: {
      const double big = p[0] - p[1];
      const double k = big / p[1];
      x = big * cos(s) + p[2] * cos(k * s);
      y = big * sin(s) - p[2] * sin(k * s);
      return;
    }
    case CurveFamily::GearHermite: {
      // Straight edges between outline vertices, each traversed with the
      // smoothstep warp so the velocity vanishes at every corner.
      const int m = static_cast<int>(vertices_.size());
      const double seg = kTwoPi / m;
      int j = static_cast<int>(std::floor(value_of(s) / seg));
      j = std::clamp(j, 0, m - 1);
      const T u = s - j * seg;
      const T w = hermite(seg, u) / seg;
      const Vec2& a = vertices_[j];
      const Vec2& b = vertices_[(j + 1) % m];
      x = a.x() + (b.x() - a.x()) * w;
      y = a.y() + (b.y() - a.y()) * w;
      return;
    }
  }
}

Vec2 Curve::eval(double s) const {
  double x = 0.0, y = 0.0;
  shape(s, x, y);
  return {x, y};
}

CurveJet Curve::analytic_jet(double s) const {
  Jet3 x, y;
  shape(Jet3::variable(s), x, y);
  return {{x.derivative(0), y.derivative(0)},
          {x.derivative(1), y.derivative(1)},
          {x.derivative(2), y.derivative(2)},
          {x.derivative(3), y.derivative(3)}};
}

CurveJet Curve::finite_difference_jet(double s) const {
  const double h = kFiniteDifferenceStep;
  const Vec2 f0 = eval(s), fp = eval(s + h), fm = eval(s - h);
  // The third difference needs a wider stencil to stay above roundoff.
  const double h3 = 1e-3;
  const Vec2 gp = eval(s + h3), gm = eval(s - h3), gp2 = eval(s + 2 * h3), gm2 = eval(s - 2 * h3);
  return {f0, (fp - fm) / (2 * h), (fp - 2 * f0 + fm) / (h * h),
          (gp2 - 2 * gp + 2 * gm - gm2) / (2 * h3 * h3 * h3)};
}

CurveJet Curve::jet(double s) const {
  return mode_ == DerivativeMode::Analytic ? analytic_jet(s) : finite_difference_jet(s);
}

Vec2 Curve::deriv(double s, int order) const {
  if (order < 1 || order > 3) throw std::invalid_argument("deriv: order must be 1, 2 or 3");
  if (mode_ == DerivativeMode::Analytic) {
    const CurveJet j = analytic_jet(s);
    return order == 1 ? j.d1 : order == 2 ? j.d2 : j.d3;
  }
  const double h = kFiniteDifferenceStep;
  if (order == 1) return (eval(s + h) - eval(s - h)) / (2 * h);
  if (order == 2) return (eval(s + h) - 2 * eval(s) + eval(s - h)) / (h * h);
  return finite_difference_jet(s).d3;
}

FrenetFrame Curve::frenet(double s) const {
  auto frame_at = [&](double u, const Vec2& d1, const Vec2& d2) {
    FrenetFrame f;
    f.parameter = u;
    f.speed = d1.norm();
    f.tangent = d1 / f.speed;
    f.normal = Vec2(-f.tangent.y(), f.tangent.x());
    f.tangent_angle = std::atan2(f.tangent.y(), f.tangent.x());
    f.signed_curvature = cross(d1, d2) / (f.speed * f.speed * f.speed);
    f.curvature = std::abs(f.signed_curvature);
    return f;
  };

  const double eps = singular_speed();
  const Vec2 d1 = deriv(s, 1);
  if (d1.norm() >= eps) return frame_at(s, d1, deriv(s, 2));

  // Nearest regular parameter, probing outward; ties go to the forward side.
  for (double delta = 1e-9;; delta = std::min(2.0 * delta, kSingularWindow)) {
    for (double u : {s + delta, s - delta}) {
      const Vec2 e1 = deriv(u, 1);
      if (e1.norm() >= eps) return frame_at(u, e1, deriv(u, 2));
    }
    if (delta >= kSingularWindow) break;
  }
  throw SingularPoint("no regular parameter within the fallback window around s = " + std::to_string(s));
}

double Curve::arclength(double s0, double s1) const {
  if (s1 < s0) throw std::invalid_argument("arclength: need s0 <= s1");
  if (s1 == s0) return 0.0;
  auto speed = [this](double u) { return deriv(u, 1).norm(); };
  // Split at whole periods and breakpoints so every panel is smooth enough
  // for the adaptive Gauss-Kronrod rule.
  std::vector<double> cuts = {s0, s1};
  const auto bps = breakpoints();
  for (double k = std::floor(s0 / kTwoPi); k * kTwoPi < s1; k += 1.0) {
    for (double b : bps) {
      const double c = k * kTwoPi + b;
      if (c > s0 && c < s1) cuts.push_back(c);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] <= cuts[i]) continue;
    total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(speed, cuts[i], cuts[i + 1], 10,
                                                                           1e-12);
  }
  return total;
}

double Curve::arclength_inverse(double fraction) const {
  if (fraction < 0.0 || fraction > 1.0) throw std::invalid_argument("arclength_inverse: fraction outside [0, 1]");
  if (fraction == 0.0) return 0.0;
  if (fraction == 1.0) return kTwoPi;
  const double target = fraction * length_;
  double lo = 0.0, hi = kTwoPi;
  // Bisection keeps the bracket valid even across flat (zero-speed) stretches.
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    if (arclength(0.0, mid) < target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<double> Curve::breakpoints() const {
  std::vector<double> out;
  switch (family_) {
    case CurveFamily::GearHermite: {
      const int m = static_cast<int>(vertices_.size());
      for (int j = 0; j < m; ++j) out.push_back(kTwoPi * j / m);
      break;
    }
    case CurveFamily::Deltoid:
      // Cusps: |gamma'| has a kink there.
      for (int j = 0; j < 3; ++j) out.push_back(kTwoPi * j / 3.0);
      break;
    case CurveFamily::Nephroid:
      out = {0.0, kPi};
      break;
    case CurveFamily::Spirograph:
      if (std::abs(p_[2] - p_[1]) < 1e-12) {
        const int cusps = static_cast<int>(std::round(p_[0] / p_[1]));
        for (int j = 0; j < cusps; ++j) out.push_back(kTwoPi * j / cusps);
      }
      break;
    default:
      break;
  }
  return out;
}

std::vector<NamedCurve> inscribed_square_suite() {
  return {
      {"ellipse", {"ellipse", {{"a", 2.0}, {"b", 1.0}}}},
      {"superellipse", {"superellipse", {{"a", 1.5}, {"b", 1.0}, {"p", 4.0}}}},
      {"cassini-waist", {"cassini", {{"a", 1.1}, {"c", 1.0}}}},
      {"cassini-oval", {"cassini", {{"a", 1.4}, {"c", 1.0}}}},
      {"lemniscate", {"lemniscate", {{"a", 1.5}}}},
      {"lissajous-3-2", {"lissajous", {{"ax", 2.0}, {"ay", 2.0}, {"kx", 3.0}, {"ky", 2.0}, {"phase", kPi / 2}}}},
      {"lissajous-1-2", {"lissajous", {{"ax", 2.0}, {"ay", 1.0}, {"kx", 1.0}, {"ky", 2.0}, {"phase", 0.0}}}},
      {"rose-3", {"rose", {{"a", 1.8}, {"k", 3.0}}}},
      {"rose-2", {"rose", {{"a", 1.5}, {"k", 2.0}}}},
      {"fourier-a", {"fourier-sum", {}}},
      {"fourier-b",
       {"fourier-sum",
        {{"cx1", 1.2}, {"sy1", 0.9}, {"cx2", -0.2}, {"sy2", 0.3}, {"sx3", 0.15}, {"cy3", 0.12}}}},
      {"peanut", {"peanut", {{"a", 1.5}, {"b", 0.6}}}},
      {"deltoid", {"deltoid", {{"a", 1.0}}}},
      {"nephroid", {"nephroid", {{"a", 1.0}}}},
      {"spirograph", {"spirograph", {{"R", 5.0}, {"r", 1.0}, {"d", 1.5}}}},
      {"gear-hermite", {"gear-hermite", {{"teeth", 6.0}, {"r_outer", 1.2}, {"r_inner", 0.9}}}},
  };
}

}  // namespace rigidform
