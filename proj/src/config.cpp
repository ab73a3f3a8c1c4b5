#include "nv/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "nv/errors.hpp"
#include "nv/snn.hpp"
#include "nv/vesicle.hpp"

namespace nv {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

const char* type_name(const json& j) { return j.type_name(); }

// One JSON object being read; remembers which keys were consumed so the
// rest can be rejected.
class Section {
 public:
  Section(const json* j, std::string path) : j_(j), path_(std::move(path)) {
    if (j_ && !j_->is_object()) throw ConfigError(path_ + ": expected an object, got " + type_name(*j_));
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    if (!j_) return nullptr;
    auto it = j_->find(key);
    if (it == j_->end() || it->is_null()) return nullptr;
    return &*it;
  }

  double num(const std::string& key, double def) {
    const json* v = raw(key);
    if (!v) return def;
    if (!v->is_number()) throw ConfigError(key_path(key) + ": expected a number, got " + type_name(*v));
    return v->get<double>();
  }

  std::int64_t integer(const std::string& key, std::int64_t def) {
    const json* v = raw(key);
    if (!v) return def;
    if (!v->is_number_integer()) throw ConfigError(key_path(key) + ": expected an integer, got " + type_name(*v));
    return v->get<std::int64_t>();
  }

  std::uint64_t count(const std::string& key, std::uint64_t def) {
    const json* v = raw(key);
    if (!v) return def;
    if (!v->is_number_integer() || v->get<std::int64_t>() < 0)
      throw ConfigError(key_path(key) + ": expected a non-negative integer");
    return v->get<std::uint64_t>();
  }

  bool flag(const std::string& key, bool def) {
    const json* v = raw(key);
    if (!v) return def;
    if (!v->is_boolean()) throw ConfigError(key_path(key) + ": expected a boolean, got " + type_name(*v));
    return v->get<bool>();
  }

  std::string str(const std::string& key, const std::string& def, std::initializer_list<const char*> allowed) {
    const json* v = raw(key);
    if (!v) return def;
    if (!v->is_string()) throw ConfigError(key_path(key) + ": expected a string, got " + type_name(*v));
    const std::string s = v->get<std::string>();
    if (allowed.size() == 0) return s;
    std::string list;
    for (const char* a : allowed) {
      if (s == a) return s;
      list += std::string(list.empty() ? "" : ", ") + a;
    }
    throw ConfigError(key_path(key) + ": '" + s + "' is not one of {" + list + "}");
  }

  std::optional<Eigen::MatrixXd> matrix(const std::string& key) {
    const json* v = raw(key);
    if (!v) return std::nullopt;
    const std::string p = key_path(key);
    if (!v->is_array() || v->empty()) throw ConfigError(p + ": expected a non-empty array of rows");
    const std::size_t cols = (*v)[0].is_array() ? (*v)[0].size() : 0;
    Eigen::MatrixXd m(static_cast<Eigen::Index>(v->size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < v->size(); ++r) {
      const json& row = (*v)[r];
      if (!row.is_array() || row.size() != cols || cols == 0)
        throw ConfigError(p + "[" + std::to_string(r) + "]: rows must be equal-length non-empty arrays");
      for (std::size_t c = 0; c < cols; ++c) {
        if (!row[c].is_number()) throw ConfigError(p + "[" + std::to_string(r) + "][" + std::to_string(c) + "]: expected a number");
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c].get<double>();
      }
    }
    return m;
  }

  std::vector<std::int64_t> int_list(const std::string& key) {
    const json* v = raw(key);
    if (!v) return {};
    if (!v->is_array()) throw ConfigError(key_path(key) + ": expected an array");
    std::vector<std::int64_t> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_number_integer())
        throw ConfigError(key_path(key) + "[" + std::to_string(i) + "]: expected an integer");
      out.push_back((*v)[i].get<std::int64_t>());
    }
    return out;
  }

  std::vector<std::pair<std::int64_t, std::int64_t>> pair_list(const std::string& key) {
    const json* v = raw(key);
    if (!v) return {};
    if (!v->is_array()) throw ConfigError(key_path(key) + ": expected an array of pairs");
    std::vector<std::pair<std::int64_t, std::int64_t>> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      const json& e = (*v)[i];
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer() ||
          e[0].get<std::int64_t>() < 0 || e[1].get<std::int64_t>() < 0)
        throw ConfigError(key_path(key) + "[" + std::to_string(i) + "]: expected a pair of non-negative integers");
      out.emplace_back(e[0].get<std::int64_t>(), e[1].get<std::int64_t>());
    }
    return out;
  }

  Section child(const std::string& key) { return Section(raw(key), key_path(key)); }

  void finish() const {
    if (!j_) return;
    for (auto it = j_->begin(); it != j_->end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(key_path(it.key()) + ": unknown key");
  }

 private:
  const json* j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ConfigError(path + ": " + what);
}

bool is_probability(double x) { return x >= 0.0 && x <= 1.0; }

TypeConfig read_type(Section s) {
  TypeConfig t;
  t.lifetime_mean = s.num("lifetime_mean", t.lifetime_mean);
  require(t.lifetime_mean > 0.0, s.key_path("lifetime_mean"), "must be positive");
  t.lifetime_dist = s.str("lifetime_dist", t.lifetime_dist, {"exponential", "fixed"});
  t.decay_rate = s.num("decay_rate", t.decay_rate);
  require(is_probability(t.decay_rate), s.key_path("decay_rate"), "must lie in [0, 1]");
  t.temperature = s.num("temperature", t.temperature);
  t.transition = s.matrix("transition");
  t.emit_scale = s.num("emit_scale", t.emit_scale);
  t.dock_scale = s.num("dock_scale", t.dock_scale);
  t.force_dock = s.flag("force_dock", t.force_dock);
  t.content_std = s.num("content_std", t.content_std);
  require(t.content_std >= 0.0, s.key_path("content_std"), "must be non-negative");
  t.mod_scale = s.num("mod_scale", t.mod_scale);
  s.finish();
  return t;
}

void read_graph(Section s, ExperimentConfig& cfg) {
  GraphConfig& g = cfg.graph;
  g.granularity = s.str("granularity", cfg.run.mode == "snn" ? "neuron" : "layer", {"layer", "neuron"});
  g.allow_self_loops = s.flag("allow_self_loops", false);
  const std::uint64_t n = s.count("num_nodes", 0);
  const auto edges = s.pair_list("edges");
  const auto layers = s.int_list("layer_of");
  s.finish();

  if (n == 0) {
    require(edges.empty() && layers.empty(), s.key_path("num_nodes"), "required when edges or layer_of are given");
    const Graph def = g.granularity == "layer"
                          ? Graph::chain(cfg.network.widths.size(), g.allow_self_loops)
                          : random_snn_graph(cfg.snn.neurons, cfg.snn.connect_prob, cfg.snn.graph_seed);
    g.num_nodes = def.num_nodes();
    g.edges = def.edges();
    g.layer_of = def.layers();
  } else {
    g.num_nodes = n;
    for (const auto& [u, v] : edges) g.edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
    if (layers.empty()) {
      g.layer_of.assign(n, 0);
    } else {
      for (auto l : layers) g.layer_of.push_back(static_cast<int>(l));
    }
  }
  // Validates ranges, self-loops and layer order.
  const Graph check(g.num_nodes, g.edges, g.layer_of, g.allow_self_loops);
  g.edges = check.edges();
  if (g.granularity == "layer") {
    for (std::size_t u = 0; u < g.layer_of.size(); ++u)
      require(g.layer_of[u] >= 0 && static_cast<std::size_t>(g.layer_of[u]) < cfg.network.widths.size(),
              "graph.layer_of[" + std::to_string(u) + "]", "must name a network layer");
  }
}

ojson matrix_json(const std::optional<Eigen::MatrixXd>& m) {
  if (!m) return nullptr;
  ojson rows = ojson::array();
  for (Eigen::Index r = 0; r < m->rows(); ++r) {
    ojson row = ojson::array();
    for (Eigen::Index c = 0; c < m->cols(); ++c) row.push_back((*m)(r, c));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text, const ConfigOverrides& overrides) {
  json root;
  try {
    root = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  Section top(&root, "");
  ExperimentConfig cfg;

  {
    Section s = top.child("run");
    RunConfig& r = cfg.run;
    r.seed = s.count("seed", r.seed);
    r.steps = s.count("steps", r.steps);
    r.mode = s.str("mode", r.mode, {"particle", "density", "consistency", "snn", "rl"});
    r.vesicle_every = static_cast<int>(s.integer("vesicle_every", r.vesicle_every));
    require(r.vesicle_every >= 1, s.key_path("vesicle_every"), "must be >= 1");
    r.out = s.str("out", r.out, {});
    r.emit_plots = s.flag("emit_plots", r.emit_plots);
    s.finish();
    if (overrides.seed) r.seed = *overrides.seed;
    if (overrides.steps) r.steps = *overrides.steps;
    if (overrides.mode) {
      if (!is_mode(*overrides.mode)) throw ConfigError("run.mode: '" + *overrides.mode + "' is not a mode");
      r.mode = *overrides.mode;
    }
    if (overrides.out) r.out = *overrides.out;
    if (overrides.emit_plots) r.emit_plots = *overrides.emit_plots;
  }
  {
    Section s = top.child("network");
    NetworkConfig& n = cfg.network;
    if (s.raw("widths")) {
      n.widths.clear();
      for (auto w : s.int_list("widths")) n.widths.push_back(static_cast<int>(w));
    }
    require(n.widths.size() >= 2, s.key_path("widths"), "need at least an input and an output width");
    for (int w : n.widths) require(w >= 1, s.key_path("widths"), "widths must be >= 1");
    n.init_scale = s.num("init_scale", n.init_scale);
    n.learning_rate = s.num("learning_rate", n.learning_rate);
    require(n.learning_rate >= 0.0, s.key_path("learning_rate"), "must be non-negative");
    n.meta_window = static_cast<int>(s.integer("meta_window", n.meta_window));
    require(n.meta_window >= 0, s.key_path("meta_window"), "must be non-negative");
    n.task = s.str("task", n.task, {"sine"});
    s.finish();
  }
  {
    Section s = top.child("snn");
    SnnConfig& c = cfg.snn;
    c.dt = s.num("dt", c.dt);
    require(c.dt > 0.0, s.key_path("dt"), "must be positive");
    c.tau_m = s.num("tau_m", c.tau_m);
    require(c.tau_m > 0.0, s.key_path("tau_m"), "must be positive");
    c.tau_e = s.num("tau_e", c.tau_e);
    require(c.tau_e > 0.0, s.key_path("tau_e"), "must be positive");
    c.threshold = s.num("threshold", c.threshold);
    c.refractory = s.num("refractory", c.refractory);
    require(c.refractory >= 0.0, s.key_path("refractory"), "must be non-negative");
    c.a_plus = s.num("a_plus", c.a_plus);
    c.a_minus = s.num("a_minus", c.a_minus);
    c.eta = s.num("eta", c.eta);
    c.radius = s.count("radius", c.radius);
    c.window = s.num("window", c.window);
    require(c.window > 0.0, s.key_path("window"), "must be positive");
    c.rule = s.str("rule", c.rule, {"three_factor", "darwin3"});
    c.a_pre = s.num("a_pre", c.a_pre);
    c.a_post = s.num("a_post", c.a_post);
    c.input_rate = s.num("input_rate", c.input_rate);
    require(is_probability(c.input_rate), s.key_path("input_rate"), "must lie in [0, 1]");
    c.input_weight = s.num("input_weight", c.input_weight);
    c.bias_current = s.num("bias_current", c.bias_current);
    c.weight_init = s.num("weight_init", c.weight_init);
    c.neurons = s.count("neurons", c.neurons);
    require(c.neurons >= 1, s.key_path("neurons"), "must be >= 1");
    c.connect_prob = s.num("connect_prob", c.connect_prob);
    require(is_probability(c.connect_prob), s.key_path("connect_prob"), "must lie in [0, 1]");
    c.graph_seed = s.count("graph_seed", c.graph_seed);
    s.finish();
  }
  read_graph(top.child("graph"), cfg);
  {
    Section s = top.child("vesicles");
    VesicleConfigSection& v = cfg.vesicles;
    v.content_dim = static_cast<int>(s.integer("content_dim", v.content_dim));
    require(v.content_dim >= 1, s.key_path("content_dim"), "must be >= 1");
    v.emit_dim = static_cast<int>(s.integer("emit_dim", v.emit_dim));
    require(v.emit_dim >= 1, s.key_path("emit_dim"), "must be >= 1");
    v.dock_dim = static_cast<int>(s.integer("dock_dim", v.dock_dim));
    require(v.dock_dim >= 1, s.key_path("dock_dim"), "must be >= 1");
    v.num_types = static_cast<int>(s.integer("num_types", v.num_types));
    require(v.num_types >= 1, s.key_path("num_types"), "must be >= 1");
    v.init_scale = s.num("init_scale", v.init_scale);
    v.types.clear();
    if (const json* types = s.raw("types")) {
      if (!types->is_array()) throw ConfigError(s.key_path("types") + ": expected an array");
      if (static_cast<int>(types->size()) > v.num_types)
        throw ConfigError(s.key_path("types") + ": more entries than num_types");
      for (std::size_t i = 0; i < types->size(); ++i)
        v.types.push_back(read_type(Section(&(*types)[i], s.key_path("types[" + std::to_string(i) + "]"))));
    }
    while (static_cast<int>(v.types.size()) < v.num_types) v.types.push_back(TypeConfig{});
    const auto n = static_cast<Eigen::Index>(cfg.graph.num_nodes);
    for (std::size_t i = 0; i < v.types.size(); ++i) {
      const auto& t = v.types[i].transition;
      require(!t || (t->rows() == n && t->cols() == n),
              s.key_path("types[" + std::to_string(i) + "].transition"), "expected a num_nodes x num_nodes matrix");
    }
    s.finish();
  }
  {
    Section s = top.child("kernels");
    KernelConfig& k = cfg.kernels;
    k.max_emit_per_node = static_cast<int>(s.integer("max_emit_per_node", k.max_emit_per_node));
    require(k.max_emit_per_node >= 0, s.key_path("max_emit_per_node"), "must be non-negative");
    k.decay_noise_std = s.num("decay_noise_std", k.decay_noise_std);
    require(k.decay_noise_std >= 0.0, s.key_path("decay_noise_std"), "must be non-negative");
    for (auto a : s.int_list("absorber_nodes")) {
      require(a >= 0 && static_cast<std::size_t>(a) < cfg.graph.num_nodes, s.key_path("absorber_nodes"),
              "node out of range");
      k.absorber_nodes.push_back(static_cast<NodeId>(a));
    }
    k.dt = s.num("dt", k.dt);
    require(k.dt > 0.0, s.key_path("dt"), "must be positive");
    k.frozen_emission = s.matrix("frozen_emission");
    if (k.frozen_emission) {
      require(k.frozen_emission->rows() == static_cast<Eigen::Index>(cfg.graph.num_nodes) &&
                  k.frozen_emission->cols() == cfg.vesicles.num_types,
              s.key_path("frozen_emission"), "expected a num_nodes x num_types matrix");
      require((k.frozen_emission->array() >= 0.0).all(), s.key_path("frozen_emission"), "rates must be >= 0");
    }
    for (const auto& [u, t] : s.pair_list("scripted_emission")) {
      require(static_cast<std::size_t>(u) < cfg.graph.num_nodes && t < cfg.vesicles.num_types,
              s.key_path("scripted_emission"), "entry out of range");
      k.scripted_emission.emplace_back(static_cast<NodeId>(u), static_cast<std::size_t>(t));
    }
    k.exec = s.str("exec", k.exec, {"parallel", "serial"});
    s.finish();
  }
  {
    Section s = top.child("release");
    ReleaseConfig& r = cfg.release;
    r.act = s.flag("act", r.act);
    r.param = s.flag("param", r.param);
    r.rule = s.flag("rule", r.rule);
    r.memory = s.flag("memory", r.memory);
    r.d_m = static_cast<int>(s.integer("d_m", r.d_m));
    require(r.d_m >= 1, s.key_path("d_m"), "must be >= 1");
    r.rho_write = s.num("rho_write", r.rho_write);
    require(is_probability(r.rho_write), s.key_path("rho_write"), "must lie in [0, 1]");
    r.init_scale = s.num("init_scale", r.init_scale);
    r.param_step = s.num("param_step", r.param_step);
    s.finish();
  }
  {
    Section s = top.child("density");
    DensityConfig& d = cfg.density;
    d.initial = s.matrix("initial");
    if (d.initial) {
      require(d.initial->rows() == static_cast<Eigen::Index>(cfg.graph.num_nodes) &&
                  d.initial->cols() == cfg.vesicles.num_types,
              s.key_path("initial"), "expected a num_nodes x num_types matrix");
      require((d.initial->array() >= 0.0).all(), s.key_path("initial"), "densities must be >= 0");
    }
    d.fold_dock_prob = s.flag("fold_dock_prob", d.fold_dock_prob);
    d.inject = s.flag("inject", d.inject);
    s.finish();
  }
  {
    Section s = top.child("consistency");
    ConsistencyConfig& c = cfg.consistency;
    c.scenario = s.str("scenario", c.scenario, {"lazy_chain", "strict_chain", "config"});
    c.lambda0 = s.num("lambda0", c.lambda0);
    require(c.lambda0 >= 0.0, s.key_path("lambda0"), "must be non-negative");
    c.decay = s.num("decay", c.decay);
    require(is_probability(c.decay), s.key_path("decay"), "must lie in [0, 1]");
    c.horizon = s.count("horizon", c.horizon);
    c.runs = s.count("runs", c.runs);
    require(c.runs >= 2, s.key_path("runs"), "must be >= 2");
    s.finish();
  }
  {
    Section s = top.child("rl");
    RlConfig& r = cfg.rl;
    r.gamma = s.num("gamma", r.gamma);
    require(r.gamma > 0.0 && r.gamma <= 1.0, s.key_path("gamma"), "must lie in (0, 1]");
    r.learning_rate = s.num("learning_rate", r.learning_rate);
    r.omega_coeff = s.num("omega_coeff", r.omega_coeff);
    r.horizon = s.count("horizon", r.horizon);
    r.hidden = static_cast<int>(s.integer("hidden", r.hidden));
    require(r.hidden >= 1, s.key_path("hidden"), "must be >= 1");
    r.baseline_decay = s.num("baseline_decay", r.baseline_decay);
    require(is_probability(r.baseline_decay), s.key_path("baseline_decay"), "must lie in [0, 1]");
    r.init_scale = s.num("init_scale", r.init_scale);
    r.batch = s.count("batch", r.batch);
    require(r.batch >= 1, s.key_path("batch"), "must be >= 1");
    s.finish();
  }
  top.finish();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), overrides);
}

std::string dump_config(const ExperimentConfig& cfg) {
  ojson root;
  {
    const auto& g = cfg.graph;
    ojson edges = ojson::array();
    for (const auto& [u, v] : g.edges) edges.push_back({u, v});
    root["graph"] = {{"num_nodes", g.num_nodes},         {"edges", edges},
                     {"layer_of", g.layer_of},           {"allow_self_loops", g.allow_self_loops},
                     {"granularity", g.granularity}};
  }
  {
    const auto& n = cfg.network;
    root["network"] = {{"widths", n.widths},
                       {"init_scale", n.init_scale},
                       {"learning_rate", n.learning_rate},
                       {"meta_window", n.meta_window},
                       {"task", n.task}};
  }
  {
    const auto& v = cfg.vesicles;
    ojson types = ojson::array();
    for (const auto& t : v.types) {
      types.push_back({{"lifetime_mean", t.lifetime_mean},
                       {"lifetime_dist", t.lifetime_dist},
                       {"decay_rate", t.decay_rate},
                       {"temperature", t.temperature},
                       {"transition", matrix_json(t.transition)},
                       {"emit_scale", t.emit_scale},
                       {"dock_scale", t.dock_scale},
                       {"force_dock", t.force_dock},
                       {"content_std", t.content_std},
                       {"mod_scale", t.mod_scale}});
    }
    root["vesicles"] = {{"content_dim", v.content_dim}, {"emit_dim", v.emit_dim},     {"dock_dim", v.dock_dim},
                        {"num_types", v.num_types},     {"init_scale", v.init_scale}, {"types", types}};
  }
  {
    const auto& k = cfg.kernels;
    ojson scripted = ojson::array();
    for (const auto& [u, t] : k.scripted_emission) scripted.push_back({u, t});
    root["kernels"] = {{"max_emit_per_node", k.max_emit_per_node},
                       {"decay_noise_std", k.decay_noise_std},
                       {"absorber_nodes", k.absorber_nodes},
                       {"dt", k.dt},
                       {"frozen_emission", matrix_json(k.frozen_emission)},
                       {"scripted_emission", scripted},
                       {"exec", k.exec}};
  }
  {
    const auto& r = cfg.release;
    root["release"] = {{"act", r.act},         {"param", r.param},           {"rule", r.rule},
                       {"memory", r.memory},   {"d_m", r.d_m},               {"rho_write", r.rho_write},
                       {"init_scale", r.init_scale}, {"param_step", r.param_step}};
  }
  {
    const auto& d = cfg.density;
    root["density"] = {
        {"initial", matrix_json(d.initial)}, {"fold_dock_prob", d.fold_dock_prob}, {"inject", d.inject}};
  }
  {
    const auto& c = cfg.consistency;
    root["consistency"] = {{"scenario", c.scenario},
                           {"lambda0", c.lambda0},
                           {"decay", c.decay},
                           {"horizon", c.horizon},
                           {"runs", c.runs}};
  }
  {
    const auto& c = cfg.snn;
    root["snn"] = {{"dt", c.dt},
                   {"tau_m", c.tau_m},
                   {"tau_e", c.tau_e},
                   {"threshold", c.threshold},
                   {"refractory", c.refractory},
                   {"a_plus", c.a_plus},
                   {"a_minus", c.a_minus},
                   {"eta", c.eta},
                   {"radius", c.radius},
                   {"window", c.window},
                   {"rule", c.rule},
                   {"a_pre", c.a_pre},
                   {"a_post", c.a_post},
                   {"input_rate", c.input_rate},
                   {"input_weight", c.input_weight},
                   {"bias_current", c.bias_current},
                   {"weight_init", c.weight_init},
                   {"neurons", c.neurons},
                   {"connect_prob", c.connect_prob},
                   {"graph_seed", c.graph_seed}};
  }
  {
    const auto& r = cfg.rl;
    root["rl"] = {{"gamma", r.gamma},
                  {"learning_rate", r.learning_rate},
                  {"omega_coeff", r.omega_coeff},
                  {"horizon", r.horizon},
                  {"hidden", r.hidden},
                  {"baseline_decay", r.baseline_decay},
                  {"init_scale", r.init_scale},
                  {"batch", r.batch}};
  }
  {
    const auto& r = cfg.run;
    root["run"] = {{"seed", r.seed},
                   {"steps", r.steps},
                   {"mode", r.mode},
                   {"vesicle_every", r.vesicle_every},
                   {"out", r.out},
                   {"emit_plots", r.emit_plots}};
  }
  return root.dump(2) + "\n";
}

std::uint64_t config_digest(const ExperimentConfig& cfg) {
  const std::string s = dump_config(cfg);
  return fnv1a(s.data(), s.size());
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "graph.num_nodes", "graph.edges", "graph.layer_of", "graph.allow_self_loops", "graph.granularity",
      "network.widths", "network.init_scale", "network.learning_rate", "network.meta_window", "network.task",
      "vesicles.content_dim", "vesicles.emit_dim", "vesicles.dock_dim", "vesicles.num_types",
      "vesicles.init_scale", "vesicles.types[].lifetime_mean", "vesicles.types[].lifetime_dist",
      "vesicles.types[].decay_rate", "vesicles.types[].temperature", "vesicles.types[].transition",
      "vesicles.types[].emit_scale", "vesicles.types[].dock_scale", "vesicles.types[].force_dock",
      "vesicles.types[].content_std", "vesicles.types[].mod_scale",
      "kernels.max_emit_per_node", "kernels.decay_noise_std", "kernels.absorber_nodes", "kernels.dt",
      "kernels.frozen_emission", "kernels.scripted_emission", "kernels.exec",
      "release.act", "release.param", "release.rule", "release.memory", "release.d_m", "release.rho_write",
      "release.init_scale", "release.param_step",
      "density.initial", "density.fold_dock_prob", "density.inject",
      "consistency.scenario", "consistency.lambda0", "consistency.decay", "consistency.horizon",
      "consistency.runs",
      "snn.dt", "snn.tau_m", "snn.tau_e", "snn.threshold", "snn.refractory", "snn.a_plus", "snn.a_minus",
      "snn.eta", "snn.radius", "snn.window", "snn.rule", "snn.a_pre", "snn.a_post", "snn.input_rate",
      "snn.input_weight", "snn.bias_current", "snn.weight_init", "snn.neurons", "snn.connect_prob",
      "snn.graph_seed",
      "rl.gamma", "rl.learning_rate", "rl.omega_coeff", "rl.horizon", "rl.hidden", "rl.baseline_decay",
      "rl.init_scale", "rl.batch",
      "run.seed", "run.steps", "run.mode", "run.vesicle_every", "run.out", "run.emit_plots",
  };
  return keys;
}

bool is_mode(std::string_view mode) {
  return mode == "particle" || mode == "density" || mode == "consistency" || mode == "snn" || mode == "rl";
}

Exec exec_policy(const ExperimentConfig& cfg) { return cfg.kernels.exec == "serial" ? Exec::Serial : Exec::Parallel; }

}  // namespace nv
