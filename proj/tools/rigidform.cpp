// rigidform: rigid-formation search on closed curves and the sweep-then-form
// multi-agent mission.
//
// Exit codes: 0 success, 2 usage or configuration error, 3 no feasible
// formation, 4 mission aborted (collision or numerical failure).

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rigidform/config.hpp"
#include "rigidform/curve.hpp"
#include "rigidform/errors.hpp"
#include "rigidform/formation.hpp"
#include "rigidform/mission.hpp"
#include "rigidform/output.hpp"

namespace fs = std::filesystem;
using namespace rigidform;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitAborted = 4;

struct Overrides {
  std::string config_path;
  std::optional<std::string> curve;
  std::optional<int> n;
  std::optional<std::string> target;
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
  std::optional<double> horizon;
  bool square_mode = false;
  bool dump = false;
  std::string out = "out";
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "JSON configuration file");
  cmd->add_option("--curve", o.curve, "curve family (see `curves list`)");
  cmd->add_option("--n", o.n, "number of vertices / agents");
  cmd->add_option("--target", o.target, "preferred formation center as x,y (or `none`)");
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_flag("--square-mode", o.square_mode, "add the diagonal residuals (n = 4)");
  cmd->add_option("--out", o.out, "output directory")->capture_default_str();
  cmd->add_flag("--dump-config", o.dump, "print the effective configuration as JSON and exit");
}

std::optional<Vec2> parse_target(const std::string& text) {
  if (text == "none") return std::nullopt;
  std::istringstream in(text);
  double x = 0, y = 0;
  char comma = 0;
  if (!(in >> x >> comma >> y) || comma != ',' || !(in >> std::ws).eof())
    throw ConfigError("target: expected x,y but got '" + text + "'");
  return Vec2(x, y);
}

// File values first, then flags, then one validation pass over the result.
ConfigFile effective_config(const Overrides& o) {
  ConfigFile cfg = o.config_path.empty() ? ConfigFile{} : load_config(o.config_path);
  MissionConfig& m = cfg.mission;
  if (o.curve) {
    if (!cfg.has_curve || m.curve.family != *o.curve) m.curve = CurveSpec{*o.curve, {}};
    cfg.has_curve = true;
  }
  if (o.n) m.n = *o.n;
  if (o.target) m.target = parse_target(*o.target);
  if (o.seed) m.seed = *o.seed;
  if (o.dt) m.dt = *o.dt;
  if (o.horizon) {
    m.horizon = *o.horizon;
    std::erase_if(m.snapshots, [&](double t) { return t > m.horizon; });
  }
  if (o.square_mode) m.finder.square_mode = true;
  m.finder.n = m.n;
  m.finder.target = m.target;
  m.finder.seed = m.seed;
  // Reparse the dump so flag values pass the same checks as file values.
  cfg = parse_config(dump_config(cfg));
  if (!cfg.has_curve) throw ConfigError("missing key 'curve' (give --curve or a curve section)");
  return cfg;
}

std::string join(const fs::path& dir, const std::string& name) { return (dir / name).string(); }

std::string describe(const Vec2& p) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "(%.6g, %.6g)", p.x(), p.y());
  return buf;
}

int cmd_find(const Overrides& o) {
  const ConfigFile cfg = effective_config(o);
  if (o.dump) {
    std::cout << dump_config(cfg);
    return kExitOk;
  }
  const Curve curve(cfg.mission.curve);
  const FinderConfig& finder = cfg.mission.finder;
  const MultistartResult result = multistart_all(curve, finder);
  const FormationSolution& best = result.best;

  const fs::path dir(o.out);
  fs::create_directories(dir);
  write_file(join(dir, "solution.json"), [&](std::ostream& os) { write_solution_json(os, best, curve, finder); });
  write_file(join(dir, "starts.csv"), [&](std::ostream& os) { write_starts_csv(os, result); });
  write_file(join(dir, "cost_trace.csv"), [&](std::ostream& os) { write_cost_trace_csv(os, result); });

  std::printf("curve %s, n = %d%s\n", curve.family_name().c_str(), finder.n, finder.square_mode ? ", square mode" : "");
  std::printf("residual norm %.6g, cost %.6g, iterations %d, start %d (%s)\n", best.residual_norm, best.cost,
              best.iterations, best.start_index, to_string(best.init_kind).c_str());
  std::printf("center %s, side %.6g, %s, %s\n", describe(best.center).c_str(), best.mean_side,
              best.accepted ? "rigid formation" : "best fit only", best.convex ? "convex" : "non-convex");
  for (size_t i = 0; i < best.vertices.size(); ++i)
    std::printf("  vertex %zu: theta %.10f at %s\n", i, best.theta[static_cast<Eigen::Index>(i)],
                describe(best.vertices[i]).c_str());
  std::printf("wrote %s\n", dir.string().c_str());
  if (!best.feasible) {
    std::fprintf(stderr, "error: no feasible formation found\n");
    return kExitInfeasible;
  }
  return kExitOk;
}

std::string snapshot_name(double t) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "snapshot_t%07.2f.svg", t);
  return buf;
}

int cmd_simulate(const Overrides& o) {
  const ConfigFile cfg = effective_config(o);
  if (o.dump) {
    std::cout << dump_config(cfg);
    return kExitOk;
  }
  const MissionConfig& m = cfg.mission;
  const Curve curve(m.curve);
  const MissionResult result = run_mission(m);

  const fs::path dir(o.out);
  fs::create_directories(dir);
  write_file(join(dir, "config.json"), [&](std::ostream& os) { os << dump_config(cfg); });
  write_file(join(dir, "solution.json"),
             [&](std::ostream& os) { write_solution_json(os, result.formation, curve, m.finder); });
  write_file(join(dir, "summary.json"), [&](std::ostream& os) { write_mission_summary_json(os, result, m); });
  if (!result.formation_found) {
    std::fprintf(stderr, "error: no feasible formation found on %s with n = %d\n", m.curve.family.c_str(), m.n);
    return kExitInfeasible;
  }
  write_file(join(dir, "metrics.csv"), [&](std::ostream& os) { write_metrics_csv(os, result.metrics); });
  write_file(join(dir, "trajectory.csv"), [&](std::ostream& os) { write_trajectory_csv(os, result); });
  for (const Snapshot& s : result.snapshots)
    write_file(join(dir, snapshot_name(s.t)), [&](std::ostream& os) { write_snapshot_svg(os, curve, result, s); });

  const MissionMetrics& mm = result.metrics;
  std::printf("curve %s, %d agents, %zu steps of %.4g s\n", m.curve.family.c_str(), m.n, mm.time.size(), m.dt);
  std::printf("formation center %s, side %.6g, residual %.3g\n", describe(result.formation.center).c_str(),
              result.formation.mean_side, result.formation.residual_norm);
  std::printf("min distance %.6g (%.3f d_safe), max |u| %.4g\n", mm.min_distance_overall,
              mm.min_distance_overall / result.params.d_safe, mm.max_control);
  for (int i = 0; i < m.n; ++i)
    std::printf("  agent %d: sigma %.4f, vertex error %.4g\n", i, mm.sigma[i].back(), mm.final_vertex_error[i]);
  std::printf("wrote %s\n", dir.string().c_str());
  if (mm.aborted) {
    std::fprintf(stderr, "error: mission aborted: %s\n", mm.abort_reason.c_str());
    return kExitAborted;
  }
  return kExitOk;
}

int cmd_curves_list() {
  for (const std::string& name : curve_families()) {
    std::printf("%s", name.c_str());
    for (const auto& [k, v] : family_defaults(name)) std::printf(" %s=%g", k.c_str(), v);
    std::printf("\n");
  }
  return kExitOk;
}

int cmd_curves_sample(const std::string& name, int rows) {
  const Curve curve(CurveSpec{name, {}});
  write_curve_samples_csv(std::cout, curve, rows);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rigid formations on closed curves and the sweep-then-form mission"};
  app.require_subcommand(1);

  Overrides find_opts;
  CLI::App* find = app.add_subcommand("find", "search for a regular polygon inscribed in a curve");
  add_common(find, find_opts);

  Overrides sim_opts;
  CLI::App* simulate = app.add_subcommand("simulate", "run the multi-agent sweep-then-form mission");
  add_common(simulate, sim_opts);
  simulate->add_option("--dt", sim_opts.dt, "integration step (s)");
  simulate->add_option("--horizon", sim_opts.horizon, "simulated time (s)");

  CLI::App* curves = app.add_subcommand("curves", "inspect the curve catalog");
  curves->require_subcommand(1);
  curves->add_subcommand("list", "list curve families with default parameters");
  std::string sample_name;
  int sample_rows = 100;
  CLI::App* sample = curves->add_subcommand("sample", "sample a curve as CSV");
  sample->add_option("name", sample_name, "curve family")->required();
  sample->add_option("--n", sample_rows, "number of rows")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*find) return cmd_find(find_opts);
    if (*simulate) return cmd_simulate(sim_opts);
    if (curves->got_subcommand("list")) return cmd_curves_list();
    return cmd_curves_sample(sample_name, sample_rows);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
