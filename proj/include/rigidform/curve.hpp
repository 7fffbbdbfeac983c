#pragma once

// Closed planar parametric curves with period 2*pi and the differential
// geometry queries used by the formation finder and the agent controllers.

#include <map>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace rigidform {

using Vec2 = Eigen::Vector2d;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Wraps a parameter into [0, 2*pi).
double wrap_parameter(double s);

// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

// z-component of the planar cross product.
inline double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

enum class CurveFamily {
  Circle,
  Ellipse,
  Superellipse,
  Cassini,
  Lemniscate,
  Lissajous,
  Rose,
  FourierSum,
  Peanut,
  Deltoid,
  Nephroid,
  Spirograph,
  GearHermite,
};

enum class DerivativeMode { Analytic, FiniteDifference };

// Family name plus shape parameters. Parameters not listed take the family
// defaults; unknown parameter names are rejected when the curve is built.
struct CurveSpec {
  std::string family;
  std::map<std::string, double> params;

  bool operator==(const CurveSpec&) const = default;
};

struct FrenetFrame {
  Vec2 tangent;
  Vec2 normal;  // tangent rotated by +pi/2
  double tangent_angle = 0.0;
  double speed = 0.0;  // |gamma'| at `parameter`
  double curvature = 0.0;
  double signed_curvature = 0.0;
  // Parameter the frame was evaluated at. Differs from the query only when
  // the query sits on a singular point and the nearby fallback was used.
  double parameter = 0.0;
};

// gamma and its first three parameter derivatives at one parameter.
struct CurveJet {
  Vec2 point;
  Vec2 d1;
  Vec2 d2;
  Vec2 d3;
};

class Curve {
 public:
  static constexpr double kFiniteDifferenceStep = 1e-5;
  // Relative window searched for a regular parameter when the tangent vanishes.
  static constexpr double kSingularWindow = 1e-3;

  // Throws ConfigError for an unknown family, unknown parameter or an
  // invalid parameter value.
  explicit Curve(const CurveSpec& spec, DerivativeMode mode = DerivativeMode::Analytic);

  static Curve circle(double radius = 1.0) { return Curve({"circle", {{"radius", radius}}}); }

  CurveFamily family() const { return family_; }
  const std::string& family_name() const { return spec_.family; }
  // Curve description with every parameter filled in.
  const CurveSpec& spec() const { return spec_; }
  DerivativeMode derivative_mode() const { return mode_; }

  Vec2 eval(double s) const;
  // order in {1, 2, 3}; the third derivative feeds the tracking controller.
  Vec2 deriv(double s, int order) const;
  CurveJet jet(double s) const;

  // Throws SingularPoint if no regular parameter exists within the window.
  FrenetFrame frenet(double s) const;

  // Length of the arc between s0 <= s1 (unwrapped parameters).
  double arclength(double s0, double s1) const;
  double length() const { return length_; }
  // Parameter theta in [0, 2*pi] with arclength(0, theta) = fraction * length().
  double arclength_inverse(double fraction) const;

  // Half the bounding-box diagonal of 4096 uniform samples.
  double scale() const { return scale_; }
  // Tangent speed below which a parameter is treated as singular.
  double singular_speed() const { return 1e-6 * scale_; }
  double max_speed() const { return max_speed_; }

  // Parameters where gamma'' is discontinuous (piecewise families only).
  std::vector<double> breakpoints() const;

 private:
  template <class T>
  void shape(const T& s, T& x, T& y) const;
  CurveJet analytic_jet(double s) const;
  CurveJet finite_difference_jet(double s) const;

  CurveSpec spec_;
  CurveFamily family_;
  DerivativeMode mode_;
  std::vector<double> p_;        // positional copy of the parameters
  std::vector<Vec2> vertices_;   // gear outline
  double scale_ = 0.0;
  double length_ = 0.0;
  double max_speed_ = 0.0;
};

// Smoothstep time warp on [0, L]: t(0) = 0, t(L) = L, dt/ds = 0 at both ends.
// Throws std::domain_error for s outside [0, L].
double hermite_reparam(double segment_length, double s);
double hermite_reparam_rate(double segment_length, double s);

std::vector<std::string> curve_families();
// Default parameters for a family; throws ConfigError for unknown names.
std::map<std::string, double> family_defaults(const std::string& family);

struct NamedCurve {
  std::string label;
  CurveSpec spec;
};

// The sixteen-curve inscribed-square suite: convex, analytic nonconvex,
// harmonic, cusped/self-intersecting and piecewise Hermite shapes.
std::vector<NamedCurve> inscribed_square_suite();

}  // namespace rigidform
