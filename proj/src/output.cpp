#include "rigidform/output.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "rigidform/errors.hpp"

namespace rigidform {

using nlohmann::ordered_json;

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_file(const std::string& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  body(os);
  os.flush();
  if (!os) throw std::runtime_error("write to '" + path + "' failed");
}

namespace {

// JSON numbers must be finite; anything else becomes null.
ordered_json num(double x) { return std::isfinite(x) ? ordered_json(x) : ordered_json(nullptr); }

ordered_json point(const Vec2& p) { return ordered_json::array({num(p.x()), num(p.y())}); }

class CsvRow {
 public:
  explicit CsvRow(std::ostream& os) : os_(os) {}
  ~CsvRow() { os_ << '\n'; }
  CsvRow& operator<<(double x) { return text(format_number(x)); }
  CsvRow& operator<<(int x) { return text(std::to_string(x)); }
  CsvRow& operator<<(const std::string& s) { return text(s); }

 private:
  CsvRow& text(const std::string& s) {
    if (!first_) os_ << ',';
    first_ = false;
    os_ << s;
    return *this;
  }
  std::ostream& os_;
  bool first_ = true;
};

struct Box {
  Vec2 lo, hi;
};

Box curve_box(const Curve& curve) {
  Box b{Vec2::Constant(std::numeric_limits<double>::infinity()), Vec2::Constant(-std::numeric_limits<double>::infinity())};
  for (int k = 0; k < 1024; ++k) {
    const Vec2 p = curve.eval(kTwoPi * k / 1024);
    b.lo = b.lo.cwiseMin(p);
    b.hi = b.hi.cwiseMax(p);
  }
  return b;
}

const char* kPalette[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

const char* colour(int i) { return kPalette[i % 8]; }

std::string svg_num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.5g", x);
  return buf;
}

std::string svg_point(const Vec2& p) { return svg_num(p.x()) + "," + svg_num(-p.y()); }

}  // namespace

void write_solution_json(std::ostream& os, const FormationSolution& s, const Curve& curve, const FinderConfig& config) {
  ordered_json j;
  j["curve"] = {{"family", curve.family_name()}, {"params", curve.spec().params}};
  j["n"] = config.n;
  j["square_mode"] = config.square_mode;
  j["target"] = config.target ? point(*config.target) : ordered_json(nullptr);
  j["seed"] = config.seed;
  ordered_json theta = ordered_json::array();
  for (Eigen::Index i = 0; i < s.theta.size(); ++i) theta.push_back(num(s.theta[i]));
  j["theta"] = theta;
  ordered_json vertices = ordered_json::array();
  for (const Vec2& v : s.vertices) vertices.push_back(point(v));
  j["vertices"] = vertices;
  j["center"] = point(s.center);
  j["mean_side"] = num(s.mean_side);
  j["residual_norm"] = num(s.residual_norm);
  j["cost"] = num(s.cost);
  j["iterations"] = s.iterations;
  j["start_index"] = s.start_index;
  j["init"] = to_string(s.init_kind);
  j["stop"] = to_string(s.stop);
  j["feasible"] = s.feasible;
  j["convex"] = s.convex;
  j["accepted"] = s.accepted;
  j["scale"] = num(curve.scale());
  os << j.dump(2) << '\n';
}

void write_starts_csv(std::ostream& os, const MultistartResult& result) {
  os << "start,kind,iterations,cost,residual_norm,center_x,center_y,mean_side,feasible,convex,accepted,stop\n";
  for (size_t k = 0; k < result.runs.size(); ++k) {
    const FormationSolution& s = result.runs[k];
    CsvRow(os) << static_cast<int>(k) << to_string(s.init_kind) << s.iterations << s.cost << s.residual_norm
               << s.center.x() << s.center.y() << s.mean_side << static_cast<int>(s.feasible)
               << static_cast<int>(s.convex) << static_cast<int>(s.accepted) << to_string(s.stop);
  }
}

void write_cost_trace_csv(std::ostream& os, const MultistartResult& result) {
  os << "start,iteration,cost\n";
  for (size_t k = 0; k < result.runs.size(); ++k) {
    const auto& trace = result.runs[k].cost_trace;
    for (size_t it = 0; it < trace.size(); ++it)
      CsvRow(os) << static_cast<int>(k) << static_cast<int>(it) << trace[it];
  }
}

void write_metrics_csv(std::ostream& os, const MissionMetrics& m) {
  const int n = static_cast<int>(m.sigma.size());
  os << "t,min_distance,mean_adherence";
  for (int i = 0; i < n; ++i) os << ",sigma_" << i;
  for (int i = 0; i < n; ++i) os << ",vertex_error_" << i;
  os << '\n';
  for (size_t k = 0; k < m.time.size(); ++k) {
    CsvRow row(os);
    row << m.time[k] << m.min_distance[k] << m.adherence[k];
    for (int i = 0; i < n; ++i) row << m.sigma[i][k];
    for (int i = 0; i < n; ++i) row << m.vertex_error[i][k];
  }
}

void write_trajectory_csv(std::ostream& os, const MissionResult& result) {
  os << "t,agent,x,y,psi,v,z,v_z,revs,sigma,alpha,a,omega,a_z\n";
  for (const TrajectoryRow& r : result.trajectory) {
    const LiftedAgentState& s = r.state;
    CsvRow(os) << r.t << r.agent << s.p.x() << s.p.y() << s.psi << s.v << s.z << s.v_z << s.revs << s.sigma
               << r.control.alpha << r.control.a << r.control.omega << r.control.a_z;
  }
}

void write_snapshot_svg(std::ostream& os, const Curve& curve, const MissionResult& result, const Snapshot& snapshot) {
  const Box box = curve_box(curve);
  const Vec2 mid = 0.5 * (box.lo + box.hi);
  const double half = 1.25 * curve.scale();
  const double unit = curve.scale() / 100.0;  // stroke and marker size

  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"800\" viewBox=\"" << svg_num(mid.x() - half)
     << ' ' << svg_num(-mid.y() - half) << ' ' << svg_num(2 * half) << ' ' << svg_num(2 * half) << "\">\n";
  os << "  <rect x=\"" << svg_num(mid.x() - half) << "\" y=\"" << svg_num(-mid.y() - half) << "\" width=\""
     << svg_num(2 * half) << "\" height=\"" << svg_num(2 * half) << "\" fill=\"white\"/>\n";

  os << "  <polyline fill=\"none\" stroke=\"#888888\" stroke-width=\"" << svg_num(0.4 * unit) << "\" points=\"";
  for (int k = 0; k <= 720; ++k) os << (k ? " " : "") << svg_point(curve.eval(kTwoPi * k / 720));
  os << "\"/>\n";

  const auto& targets = result.assignment.targets;
  if (!result.formation.vertices.empty()) {
    os << "  <polygon fill=\"none\" stroke=\"#444444\" stroke-dasharray=\"" << svg_num(2 * unit) << "\" stroke-width=\""
       << svg_num(0.3 * unit) << "\" points=\"";
    for (size_t k = 0; k < result.formation.vertices.size(); ++k)
      os << (k ? " " : "") << svg_point(result.formation.vertices[k]);
    os << "\"/>\n";
  }

  const int n = static_cast<int>(snapshot.states.size());
  for (int i = 0; i < n; ++i) {
    os << "  <polyline fill=\"none\" stroke=\"" << colour(i) << "\" stroke-opacity=\"0.6\" stroke-width=\""
       << svg_num(0.5 * unit) << "\" points=\"";
    bool first = true;
    int stride = 0;
    for (const TrajectoryRow& r : result.trajectory) {
      if (r.agent != i || r.t > snapshot.t) continue;
      if (stride++ % 5) continue;
      os << (first ? "" : " ") << svg_point(r.state.p);
      first = false;
    }
    os << ' ' << svg_point(snapshot.states[i].p) << "\"/>\n";
  }

  for (int i = 0; i < static_cast<int>(targets.size()); ++i) {
    const Vec2& q = targets[i].point;
    os << "  <rect x=\"" << svg_num(q.x() - 1.5 * unit) << "\" y=\"" << svg_num(-q.y() - 1.5 * unit) << "\" width=\""
       << svg_num(3 * unit) << "\" height=\"" << svg_num(3 * unit) << "\" fill=\"none\" stroke=\"" << colour(i)
       << "\" stroke-width=\"" << svg_num(0.5 * unit) << "\"/>\n";
  }

  for (int i = 0; i < n; ++i) {
    const LiftedAgentState& s = snapshot.states[i];
    const Vec2 tip = s.p + 4 * unit * Vec2(std::cos(s.psi), std::sin(s.psi));
    os << "  <circle cx=\"" << svg_num(s.p.x()) << "\" cy=\"" << svg_num(-s.p.y()) << "\" r=\"" << svg_num(1.5 * unit)
       << "\" fill=\"" << colour(i) << "\"/>\n";
    os << "  <line x1=\"" << svg_num(s.p.x()) << "\" y1=\"" << svg_num(-s.p.y()) << "\" x2=\"" << svg_num(tip.x())
       << "\" y2=\"" << svg_num(-tip.y()) << "\" stroke=\"" << colour(i) << "\" stroke-width=\"" << svg_num(0.5 * unit)
       << "\"/>\n";
  }

  os << "  <text x=\"" << svg_num(mid.x() - half + 3 * unit) << "\" y=\"" << svg_num(-mid.y() - half + 6 * unit)
     << "\" font-family=\"sans-serif\" font-size=\"" << svg_num(5 * unit) << "\">t = " << svg_num(snapshot.t)
     << " s</text>\n";
  os << "</svg>\n";
}

void write_mission_summary_json(std::ostream& os, const MissionResult& result, const MissionConfig& config) {
  const MissionMetrics& m = result.metrics;
  ordered_json j;
  j["curve"] = config.curve.family;
  j["n"] = config.n;
  j["seed"] = config.seed;
  j["scale"] = num(result.scale);
  j["formation_found"] = result.formation_found;
  j["formation_residual_norm"] = num(result.formation.residual_norm);
  j["formation_center"] = point(result.formation.center);
  j["formation_side"] = num(result.formation.mean_side);
  j["d_safe"] = num(result.params.d_safe);
  j["steps"] = m.time.size();
  j["min_distance"] = num(m.min_distance_overall);
  j["min_distance_over_d_safe"] =
      result.params.d_safe > 0 ? num(m.min_distance_overall / result.params.d_safe) : ordered_json(nullptr);
  j["max_control"] = num(m.max_control);
  j["collision"] = m.collision;
  j["aborted"] = m.aborted;
  j["abort_reason"] = m.abort_reason;
  ordered_json sigma = ordered_json::array(), errors = ordered_json::array();
  for (const auto& s : m.sigma) sigma.push_back(s.empty() ? ordered_json(nullptr) : num(s.back()));
  for (double e : m.final_vertex_error) errors.push_back(num(e));
  j["final_sigma"] = sigma;
  j["final_vertex_error"] = errors;
  os << j.dump(2) << '\n';
}

void write_curve_samples_csv(std::ostream& os, const Curve& curve, int rows) {
  if (rows < 2) throw ConfigError("n: at least 2 samples are required");
  os << "s,x,y,tangent_x,tangent_y,normal_x,normal_y,kappa,signed_kappa,speed\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int k = 0; k < rows; ++k) {
    const double s = kTwoPi * k / (rows - 1);
    const Vec2 p = curve.eval(s);
    const double speed = curve.deriv(s, 1).norm();
    CsvRow row(os);
    row << s << p.x() << p.y();
    try {
      const FrenetFrame f = curve.frenet(s);
      row << f.tangent.x() << f.tangent.y() << f.normal.x() << f.normal.y() << f.curvature << f.signed_curvature;
    } catch (const SingularPoint&) {
      row << nan << nan << nan << nan << nan << nan;
    }
    row << speed;
  }
}

}  // namespace rigidform
