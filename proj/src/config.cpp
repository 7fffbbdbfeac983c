#include "rigidform/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rigidform/errors.hpp"

namespace rigidform {

using nlohmann::json;
using nlohmann::ordered_json;

std::string to_string(BlendStrategy b) { return b == BlendStrategy::Product ? "product" : "anti-deadlock"; }

namespace {

// One JSON object being read; every key must be consumed before finish().
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + "expected an object");
  }

  const json* find(const std::string& key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    used_.insert(key);
    return &*it;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(name(key) + ": expected a number");
      out = v->get<double>();
    }
  }

  void integer(const std::string& key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) throw ConfigError(name(key) + ": expected an integer");
      out = v->get<int>();
    }
  }

  void unsigned_integer(const std::string& key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) throw ConfigError(name(key) + ": expected a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(name(key) + ": expected true or false");
      out = v->get<bool>();
    }
  }

  void vector3(const std::string& key, Eigen::Vector3d& out) {
    if (const json* v = find(key)) {
      if (!v->is_array() || v->size() != 3) throw ConfigError(name(key) + ": expected an array of 3 numbers");
      for (int k = 0; k < 3; ++k) {
        if (!(*v)[k].is_number()) throw ConfigError(name(key) + ": expected an array of 3 numbers");
        out[k] = (*v)[k].get<double>();
      }
    }
  }

  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw ConfigError("unknown key '" + name(it.key()) + "'");
  }

 private:
  std::string where() const { return path_.empty() ? "" : path_ + ": "; }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

void read_curve(Section& root, ConfigFile& out) {
  const json* c = root.find("curve");
  if (!c) return;
  Section s(*c, "curve");
  const json* family = s.find("family");
  if (!family) throw ConfigError("missing key 'curve.family'");
  if (!family->is_string()) throw ConfigError("curve.family: expected a string");
  out.mission.curve.family = family->get<std::string>();
  out.mission.curve.params.clear();
  if (const json* p = s.find("params")) {
    if (!p->is_object()) throw ConfigError("curve.params: expected an object");
    for (auto it = p->begin(); it != p->end(); ++it) {
      if (!it->is_number()) throw ConfigError("curve.params." + it.key() + ": expected a number");
      out.mission.curve.params[it.key()] = it->get<double>();
    }
  }
  s.finish();
  out.has_curve = true;
}

void read_finder(Section& root, FinderConfig& f) {
  const json* j = root.find("finder");
  if (!j) return;
  Section s(*j, "finder");
  s.number("w_length", f.w_length);
  s.number("w_angle", f.w_angle);
  s.number("w_diagonal", f.w_diagonal);
  s.integer("n_init", f.n_init);
  s.integer("k_max", f.k_max);
  s.number("armijo_c1", f.armijo_c1);
  s.number("backtrack", f.backtrack);
  s.number("eta0", f.eta0);
  s.number("eta_min", f.eta_min);
  s.number("step_tol", f.step_tol);
  s.number("cost_rel_tol", f.cost_rel_tol);
  s.number("cost_accept", f.cost_accept);
  s.number("lambda0", f.lambda0);
  s.number("lambda_max", f.lambda_max);
  s.boolean("square_mode", f.square_mode);
  s.integer("workers", f.workers);
  s.finish();
}

void read_controller(Section& root, ControlSettings& c) {
  const json* j = root.find("controller");
  if (!j) return;
  Section s(*j, "controller");
  s.vector3("K_p", c.K_p);
  s.vector3("K_d", c.K_d);
  s.number("k_p", c.k_p);
  s.number("k_v", c.k_v);
  s.number("k_psi", c.k_psi);
  s.number("k_z", c.k_z);
  s.number("revs_target", c.revs_target);
  s.number("d_sw", c.d_sw);
  s.number("d_ao", c.d_ao);
  s.number("d_safe", c.d_safe);
  s.number("k_avoid", c.k_avoid);
  s.number("k_va", c.k_va);
  s.number("k_wa", c.k_wa);
  s.number("k_za", c.k_za);
  s.number("sigma_accept", c.sigma_accept);
  s.number("delta_sigma", c.delta_sigma);
  s.number("codir_factor", c.codir_factor);
  s.number("omega_ref", c.omega_ref);
  s.number("v_min_factor", c.v_min_factor);
  s.number("v_max_factor", c.v_max_factor);
  s.number("ref_blend", c.ref_blend);
  s.number("shrink_sigma", c.shrink_sigma);
  s.number("shrink_radius_factor", c.shrink_radius_factor);
  s.number("sensing_factor", c.sensing_factor);
  if (const json* b = s.find("blend")) {
    const std::string v = b->is_string() ? b->get<std::string>() : "";
    if (v == "product") c.blend = BlendStrategy::Product;
    else if (v == "anti-deadlock") c.blend = BlendStrategy::AntiDeadlock;
    else throw ConfigError("controller.blend: expected \"product\" or \"anti-deadlock\"");
  }
  s.finish();
}

void read_init(Section& root, InitialConditionSpec& init) {
  const json* j = root.find("init");
  if (!j) return;
  Section s(*j, "init");
  s.number("normal_offset", init.normal_offset);
  s.number("heading_perturbation", init.heading_perturbation);
  s.number("min_separation", init.min_separation);
  s.number("sweep_clearance", init.sweep_clearance);
  s.finish();
}

void read_simulation(Section& root, MissionConfig& m) {
  const json* j = root.find("simulation");
  if (!j) return;
  Section s(*j, "simulation");
  s.number("dt", m.dt);
  s.number("horizon", m.horizon);
  if (const json* snaps = s.find("snapshots")) {
    if (!snaps->is_array()) throw ConfigError("simulation.snapshots: expected an array of times");
    m.snapshots.clear();
    for (const json& t : *snaps) {
      if (!t.is_number()) throw ConfigError("simulation.snapshots: expected an array of times");
      m.snapshots.push_back(t.get<double>());
    }
  }
  s.finish();
}

// Controller settings are validated by resolving them against a unit circle;
// the checks are scale-free.
void validate_controller(const ControlSettings& c) { resolve_controller(c, Curve::circle()); }

}  // namespace

ConfigFile parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  ConfigFile out;
  MissionConfig& m = out.mission;
  Section root(doc, "");
  root.unsigned_integer("seed", m.seed);
  root.integer("n", m.n);
  if (const json* t = root.find("target")) {
    if (t->is_null()) {
      m.target.reset();
    } else {
      if (!t->is_array() || t->size() != 2 || !(*t)[0].is_number() || !(*t)[1].is_number())
        throw ConfigError("target: expected [x, y] or null");
      m.target = Vec2((*t)[0].get<double>(), (*t)[1].get<double>());
    }
  }
  read_curve(root, out);
  read_finder(root, m.finder);
  read_controller(root, m.control);
  read_init(root, m.init);
  read_simulation(root, m);
  root.finish();

  m.finder.n = m.n;
  m.finder.target = m.target;
  m.finder.seed = m.seed;
  m.validate();
  validate_controller(m.control);
  if (out.has_curve) Curve check(m.curve);
  return out;
}

ConfigFile load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string dump_config(const ConfigFile& config) {
  const MissionConfig& m = config.mission;
  auto vec3 = [](const Eigen::Vector3d& v) { return ordered_json::array({v[0], v[1], v[2]}); };
  ordered_json j;
  j["seed"] = m.seed;
  j["n"] = m.n;
  j["target"] = m.target ? ordered_json::array({m.target->x(), m.target->y()}) : ordered_json(nullptr);
  if (config.has_curve) {
    ordered_json params = ordered_json::object();
    for (const auto& [k, v] : m.curve.params) params[k] = v;
    j["curve"] = {{"family", m.curve.family}, {"params", params}};
  }
  const FinderConfig& f = m.finder;
  j["finder"] = {{"w_length", f.w_length},       {"w_angle", f.w_angle},     {"w_diagonal", f.w_diagonal},
                 {"n_init", f.n_init},           {"k_max", f.k_max},         {"armijo_c1", f.armijo_c1},
                 {"backtrack", f.backtrack},     {"eta0", f.eta0},           {"eta_min", f.eta_min},
                 {"step_tol", f.step_tol},       {"cost_rel_tol", f.cost_rel_tol},
                 {"cost_accept", f.cost_accept}, {"lambda0", f.lambda0},     {"lambda_max", f.lambda_max},
                 {"square_mode", f.square_mode}, {"workers", f.workers}};
  const ControlSettings& c = m.control;
  j["controller"] = {{"K_p", vec3(c.K_p)},
                     {"K_d", vec3(c.K_d)},
                     {"k_p", c.k_p},
                     {"k_v", c.k_v},
                     {"k_psi", c.k_psi},
                     {"k_z", c.k_z},
                     {"revs_target", c.revs_target},
                     {"d_sw", c.d_sw},
                     {"d_ao", c.d_ao},
                     {"d_safe", c.d_safe},
                     {"k_avoid", c.k_avoid},
                     {"k_va", c.k_va},
                     {"k_wa", c.k_wa},
                     {"k_za", c.k_za},
                     {"sigma_accept", c.sigma_accept},
                     {"delta_sigma", c.delta_sigma},
                     {"codir_factor", c.codir_factor},
                     {"omega_ref", c.omega_ref},
                     {"v_min_factor", c.v_min_factor},
                     {"v_max_factor", c.v_max_factor},
                     {"ref_blend", c.ref_blend},
                     {"shrink_sigma", c.shrink_sigma},
                     {"shrink_radius_factor", c.shrink_radius_factor},
                     {"sensing_factor", c.sensing_factor},
                     {"blend", to_string(c.blend)}};
  j["init"] = {{"normal_offset", m.init.normal_offset},
               {"heading_perturbation", m.init.heading_perturbation},
               {"min_separation", m.init.min_separation},
               {"sweep_clearance", m.init.sweep_clearance}};
  j["simulation"] = {{"dt", m.dt}, {"horizon", m.horizon}, {"snapshots", m.snapshots}};
  return j.dump(2) + "\n";
}

}  // namespace rigidform
