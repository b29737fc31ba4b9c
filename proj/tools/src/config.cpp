#include "config.hpp"

#include "pcdyn/rng.hpp"

#include <toml.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace pcdyn::cli {

namespace {

[[noreturn]] void fail(const std::string& origin, const toml::source_region& where, const std::string& field,
                       const std::string& reason) {
  std::ostringstream os;
  os << origin;
  if (where.begin.line > 0) os << ':' << where.begin.line;
  os << ": " << field << ": " << reason;
  throw Error(ErrorCode::Config, os.str());
}

// Typed access to one table with unknown-key rejection.
class Section {
 public:
  Section(const toml::table* tbl, std::string name, const std::string& origin,
          std::map<std::string, std::string>& sources)
      : tbl_(tbl), name_(std::move(name)), origin_(origin), sources_(sources) {
    if (tbl_) sources_[name_] = origin_ + ":" + std::to_string(tbl_->source().begin.line);
  }

  bool present() const { return tbl_ != nullptr; }

  std::string field(std::string_view key) const { return name_.empty() ? std::string(key) : name_ + "." + std::string(key); }

  const toml::node* node(std::string_view key) {
    seen_.insert(std::string(key));
    const toml::node* n = tbl_ ? tbl_->get(key) : nullptr;
    if (n) sources_[field(key)] = origin_ + ":" + std::to_string(n->source().begin.line);
    return n;
  }

  std::optional<double> number(std::string_view key) {
    const auto* n = node(key);
    if (!n) return std::nullopt;
    if (auto v = n->value<double>()) return *v;
    fail(origin_, n->source(), field(key), "expected a number");
  }

  std::optional<std::int64_t> integer(std::string_view key) {
    const auto* n = node(key);
    if (!n) return std::nullopt;
    if (n->is_integer()) return n->value<std::int64_t>();
    fail(origin_, n->source(), field(key), "expected an integer");
  }

  std::optional<bool> boolean(std::string_view key) {
    const auto* n = node(key);
    if (!n) return std::nullopt;
    if (auto v = n->value<bool>()) return *v;
    fail(origin_, n->source(), field(key), "expected true or false");
  }

  std::optional<std::string> string(std::string_view key) {
    const auto* n = node(key);
    if (!n) return std::nullopt;
    if (auto v = n->value<std::string>()) return *v;
    fail(origin_, n->source(), field(key), "expected a string");
  }

  const toml::array* array(std::string_view key) {
    const auto* n = node(key);
    if (!n) return nullptr;
    if (const auto* a = n->as_array()) return a;
    fail(origin_, n->source(), field(key), "expected an array");
  }

  std::optional<Vec3> vec3(std::string_view key) {
    const auto* a = array(key);
    if (!a) return std::nullopt;
    if (a->size() != 3) fail(origin_, a->source(), field(key), "expected 3 components");
    Vec3 v;
    for (int i = 0; i < 3; ++i) {
      const auto x = (*a)[i].value<double>();
      if (!x) fail(origin_, (*a)[i].source(), field(key), "expected a number");
      v[i] = *x;
    }
    return v;
  }

  void reject_unknown() const {
    if (!tbl_) return;
    for (const auto& [k, v] : *tbl_) {
      if (!seen_.count(std::string(k.str()))) fail(origin_, v.source(), field(k.str()), "unknown key");
    }
  }

  const toml::source_region& source() const { return tbl_->source(); }

 private:
  const toml::table* tbl_;
  std::string name_;
  const std::string& origin_;
  std::map<std::string, std::string>& sources_;
  std::set<std::string> seen_;
};

const toml::table* subtable(const toml::table& root, std::string_view key, const std::string& origin) {
  const auto* n = root.get(key);
  if (!n) return nullptr;
  if (const auto* t = n->as_table()) return t;
  fail(origin, n->source(), std::string(key), "expected a table");
}

bool same(const StepperConfig& a, const StepperConfig& b) {
  return a.method == b.method && a.step == b.step && a.abs_tol == b.abs_tol && a.rel_tol == b.rel_tol &&
         a.max_steps == b.max_steps && a.kappa == b.kappa && a.sample_interval == b.sample_interval &&
         a.runaway_limit == b.runaway_limit;
}

bool same(const std::optional<Regularization>& a, const std::optional<Regularization>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || (a->c_v == b->c_v && a->c_lower == b->c_lower && a->c_upper == b->c_upper && a->enabled == b->enabled);
}

bool same(const std::optional<CollisionGuard>& a, const std::optional<CollisionGuard>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || (a->min_separation == b->min_separation && a->escape_radius == b->escape_radius);
}

toml::array to_array(const Vec3& v) { return toml::array{v[0], v[1], v[2]}; }

}  // namespace

bool ScenarioConfig::operator==(const ScenarioConfig& o) const {
  return particles == o.particles && generate == o.generate && support_radius == o.support_radius &&
         sharpness == o.sharpness && epsilon == o.epsilon && epsilons == o.epsilons && models == o.models &&
         t_start == o.t_start && t_end == o.t_end && seed == o.seed && out_dir == o.out_dir &&
         compare_points == o.compare_points && same(stepper, o.stepper) && same(regularization, o.regularization) &&
         same(guard, o.guard) && manifold.pad_efolds == o.manifold.pad_efolds &&
         manifold.refine_steps == o.manifold.refine_steps &&
         manifold.shooting_iterations == o.manifold.shooting_iterations;
}

ScenarioConfig parse_config(std::string_view text, const std::string& origin) {
  toml::table root;
  try {
    root = toml::parse(text, origin);
  } catch (const toml::parse_error& err) {
    fail(origin, err.source(), "syntax", std::string(err.description()));
  }

  ScenarioConfig cfg;
  for (const auto& [k, v] : root) {
    static const std::set<std::string> known{"scenario", "form_factor", "particle", "generate", "stepper",
                                             "regularization", "guard", "manifold"};
    if (!known.count(std::string(k.str()))) fail(origin, v.source(), std::string(k.str()), "unknown section");
  }

  Section sc(subtable(root, "scenario", origin), "scenario", origin, cfg.sources);
  if (auto v = sc.number("epsilon")) cfg.epsilon = *v;
  if (const auto* a = sc.array("epsilons")) {
    for (const auto& x : *a) {
      const auto e = x.value<double>();
      if (!e) fail(origin, x.source(), "scenario.epsilons", "expected numbers");
      cfg.epsilons.push_back(*e);
    }
  }
  if (const auto* a = sc.array("models")) {
    cfg.models.clear();
    for (const auto& x : *a) {
      const auto name = x.value<std::string>();
      if (!name) fail(origin, x.source(), "scenario.models", "expected model names");
      try {
        cfg.models.push_back(parse_model(*name));
      } catch (const Error& err) {
        fail(origin, x.source(), "scenario.models", err.what());
      }
    }
  }
  if (auto v = sc.number("t_start")) cfg.t_start = *v;
  if (auto v = sc.number("t_end")) cfg.t_end = *v;
  if (auto v = sc.integer("seed")) {
    if (*v < 0) fail(origin, sc.node("seed")->source(), "scenario.seed", "must be non-negative");
    cfg.seed = static_cast<std::uint64_t>(*v);
  }
  if (auto v = sc.string("out")) cfg.out_dir = *v;
  if (auto v = sc.integer("compare_points")) {
    if (*v < 2) fail(origin, sc.node("compare_points")->source(), "scenario.compare_points", "must be >= 2");
    cfg.compare_points = static_cast<std::size_t>(*v);
  }
  sc.reject_unknown();

  Section ff(subtable(root, "form_factor", origin), "form_factor", origin, cfg.sources);
  if (auto v = ff.number("support_radius")) cfg.support_radius = *v;
  if (auto v = ff.number("sharpness")) cfg.sharpness = *v;
  ff.reject_unknown();

  if (const auto* n = root.get("particle")) {
    const auto* list = n->as_array();
    if (!list || !list->is_array_of_tables()) fail(origin, n->source(), "particle", "expected [[particle]] tables");
    for (std::size_t i = 0; i < list->size(); ++i) {
      Section p((*list)[i].as_table(), "particle[" + std::to_string(i) + "]", origin, cfg.sources);
      ParticleSpec spec;
      const auto charge = p.number("charge");
      if (!charge) fail(origin, p.source(), p.field("charge"), "missing");
      spec.charge = *charge;
      spec.bare_mass = p.number("bare_mass");
      spec.mass = p.number("mass");
      spec.star_mass = p.number("star_mass");
      if (spec.bare_mass && (spec.mass || spec.star_mass)) {
        fail(origin, p.source(), p.field("bare_mass"), "give either bare_mass or mass/star_mass, not both");
      }
      if (!spec.bare_mass && !spec.mass) fail(origin, p.source(), p.field("mass"), "missing (or give bare_mass)");
      if (spec.mass && !spec.star_mass) spec.star_mass = spec.mass;
      const auto r = p.vec3("position");
      if (!r) fail(origin, p.source(), p.field("position"), "missing");
      spec.position = *r;
      if (auto u = p.vec3("velocity")) spec.velocity = *u;
      p.reject_unknown();
      cfg.particles.push_back(spec);
    }
  }

  Section g(subtable(root, "generate", origin), "generate", origin, cfg.sources);
  if (g.present()) {
    GenerateSpec spec;
    const auto count = g.integer("count");
    if (!count) fail(origin, g.source(), "generate.count", "missing");
    spec.count = static_cast<int>(*count);
    if (auto v = g.number("extent")) spec.extent = *v;
    if (auto v = g.number("min_separation")) spec.min_separation = *v;
    if (auto v = g.number("speed")) spec.speed = *v;
    g.reject_unknown();
    cfg.generate = spec;
  }

  Section st(subtable(root, "stepper", origin), "stepper", origin, cfg.sources);
  if (auto v = st.string("method")) {
    try {
      cfg.stepper.method = parse_method(*v);
    } catch (const Error& err) {
      fail(origin, st.node("method")->source(), "stepper.method", err.what());
    }
  }
  if (auto v = st.number("step")) cfg.stepper.step = *v;
  if (auto v = st.number("abs_tol")) cfg.stepper.abs_tol = *v;
  if (auto v = st.number("rel_tol")) cfg.stepper.rel_tol = *v;
  if (auto v = st.integer("max_steps")) cfg.stepper.max_steps = static_cast<long>(*v);
  if (auto v = st.number("kappa")) cfg.stepper.kappa = *v;
  if (auto v = st.number("sample_interval")) cfg.stepper.sample_interval = *v;
  if (auto v = st.number("runaway_limit")) cfg.stepper.runaway_limit = *v;
  st.reject_unknown();

  Section rg(subtable(root, "regularization", origin), "regularization", origin, cfg.sources);
  if (rg.present()) {
    Regularization reg;
    const auto cv = rg.number("c_v"), lo = rg.number("c_lower"), hi = rg.number("c_upper");
    if (!cv || !lo || !hi) fail(origin, rg.source(), "regularization", "needs c_v, c_lower and c_upper");
    reg.c_v = *cv;
    reg.c_lower = *lo;
    reg.c_upper = *hi;
    if (auto v = rg.boolean("enabled")) reg.enabled = *v;
    rg.reject_unknown();
    cfg.regularization = reg;
  }

  Section gd(subtable(root, "guard", origin), "guard", origin, cfg.sources);
  if (gd.present()) {
    CollisionGuard guard;
    if (auto v = gd.number("min_separation")) guard.min_separation = *v;
    if (auto v = gd.number("escape_radius")) guard.escape_radius = *v;
    gd.reject_unknown();
    cfg.guard = guard;
  }

  Section mf(subtable(root, "manifold", origin), "manifold", origin, cfg.sources);
  if (auto v = mf.number("pad_efolds")) cfg.manifold.pad_efolds = *v;
  if (auto v = mf.integer("refine_steps")) cfg.manifold.refine_steps = static_cast<int>(*v);
  if (auto v = mf.integer("shooting_iterations")) cfg.manifold.shooting_iterations = static_cast<int>(*v);
  mf.reject_unknown();

  return cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Config, path + ": cannot open config file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

std::string serialize_config(const ScenarioConfig& cfg) {
  toml::table root;

  toml::table sc;
  sc.insert("epsilon", cfg.epsilon);
  if (!cfg.epsilons.empty()) {
    toml::array eps;
    for (double e : cfg.epsilons) eps.push_back(e);
    sc.insert("epsilons", eps);
  }
  toml::array models;
  for (Model m : cfg.models) models.push_back(std::string(model_name(m)));
  sc.insert("models", models);
  sc.insert("t_start", cfg.t_start);
  sc.insert("t_end", cfg.t_end);
  sc.insert("seed", static_cast<std::int64_t>(cfg.seed));
  sc.insert("out", cfg.out_dir);
  sc.insert("compare_points", static_cast<std::int64_t>(cfg.compare_points));
  root.insert("scenario", sc);

  root.insert("form_factor", toml::table{{"support_radius", cfg.support_radius}, {"sharpness", cfg.sharpness}});

  if (!cfg.particles.empty()) {
    toml::array list;
    for (const auto& p : cfg.particles) {
      toml::table t{{"charge", p.charge}};
      if (p.bare_mass) t.insert("bare_mass", *p.bare_mass);
      if (p.mass) t.insert("mass", *p.mass);
      if (p.star_mass) t.insert("star_mass", *p.star_mass);
      t.insert("position", to_array(p.position));
      t.insert("velocity", to_array(p.velocity));
      list.push_back(std::move(t));
    }
    root.insert("particle", list);
  }
  if (cfg.generate) {
    root.insert("generate", toml::table{{"count", static_cast<std::int64_t>(cfg.generate->count)},
                                        {"extent", cfg.generate->extent},
                                        {"min_separation", cfg.generate->min_separation},
                                        {"speed", cfg.generate->speed}});
  }

  const auto& s = cfg.stepper;
  root.insert("stepper", toml::table{{"method", std::string(method_name(s.method))},
                                     {"step", s.step},
                                     {"abs_tol", s.abs_tol},
                                     {"rel_tol", s.rel_tol},
                                     {"max_steps", static_cast<std::int64_t>(s.max_steps)},
                                     {"kappa", s.kappa},
                                     {"sample_interval", s.sample_interval},
                                     {"runaway_limit", s.runaway_limit}});
  if (cfg.regularization) {
    const auto& r = *cfg.regularization;
    root.insert("regularization", toml::table{{"c_v", r.c_v},
                                              {"c_lower", r.c_lower},
                                              {"c_upper", r.c_upper},
                                              {"enabled", r.enabled}});
  }
  if (cfg.guard) {
    root.insert("guard", toml::table{{"min_separation", cfg.guard->min_separation},
                                     {"escape_radius", cfg.guard->escape_radius}});
  }
  root.insert("manifold", toml::table{{"pad_efolds", cfg.manifold.pad_efolds},
                                      {"refine_steps", static_cast<std::int64_t>(cfg.manifold.refine_steps)},
                                      {"shooting_iterations",
                                       static_cast<std::int64_t>(cfg.manifold.shooting_iterations)}});

  std::ostringstream os;
  os << root << '\n';
  return os.str();
}

void validate(const ScenarioConfig& cfg) {
  // Prefix the location of the field, or of its enclosing table.
  auto bad = [&](const std::string& field, const std::string& reason) {
    std::string where;
    for (std::string f = field; !f.empty();) {
      if (const auto it = cfg.sources.find(f); it != cfg.sources.end()) {
        where = it->second + ": ";
        break;
      }
      const auto cut = f.find_last_of(".[");
      f = cut == std::string::npos ? std::string() : f.substr(0, cut);
    }
    throw Error(ErrorCode::Config, where + field + ": " + reason);
  };
  if (cfg.particles.empty() == !cfg.generate.has_value()) {
    bad("particle", cfg.particles.empty() ? "no particles (give [[particle]] entries or [generate])"
                                          : "give either [[particle]] entries or [generate], not both");
  }
  if (cfg.generate && cfg.generate->count < 1) bad("generate.count", "must be >= 1");
  if (!(cfg.epsilon > 0.0 && cfg.epsilon <= 1.0)) bad("scenario.epsilon", "must lie in (0, 1]");
  for (std::size_t i = 0; i < cfg.epsilons.size(); ++i) {
    if (!(cfg.epsilons[i] > 0.0 && cfg.epsilons[i] <= 1.0)) {
      bad("scenario.epsilons[" + std::to_string(i) + "]", "must lie in (0, 1]");
    }
  }
  if (cfg.models.empty()) bad("scenario.models", "at least one model is required");
  if (!std::isfinite(cfg.t_start) || !std::isfinite(cfg.t_end) || cfg.t_end == cfg.t_start) {
    bad("scenario.t_end", "must be finite and differ from t_start");
  }
  if (!(cfg.support_radius > 0.0)) bad("form_factor.support_radius", "must be positive");
  if (!(cfg.sharpness > 0.0)) bad("form_factor.sharpness", "must be positive");
  for (std::size_t i = 0; i < cfg.particles.size(); ++i) {
    const auto& p = cfg.particles[i];
    const std::string f = "particle[" + std::to_string(i) + "]";
    if (p.bare_mass && !(*p.bare_mass >= 0.0)) bad(f + ".bare_mass", "must be non-negative");
    if (p.mass && !(*p.mass > 0.0)) bad(f + ".mass", "must be positive");
    if (p.star_mass && !(*p.star_mass > 0.0)) bad(f + ".star_mass", "must be positive");
    if (!p.position.allFinite()) bad(f + ".position", "must be finite");
    if (!p.velocity.allFinite()) bad(f + ".velocity", "must be finite");
    for (std::size_t j = 0; j < i; ++j) {
      if (p.position == cfg.particles[j].position) {
        bad(f + ".position", "coincides with particle[" + std::to_string(j) + "]");
      }
    }
  }
  try {
    cfg.stepper.validate();
  } catch (const Error& err) {
    bad("stepper", err.what());
  }
  if (cfg.regularization) {
    try {
      cfg.regularization->validate();
    } catch (const Error& err) {
      bad("regularization", err.what());
    }
  }
  if (cfg.guard) {
    try {
      cfg.guard->validate();
    } catch (const Error& err) {
      bad("guard", err.what());
    }
  }
  if (cfg.manifold.refine_steps < 0) bad("manifold.refine_steps", "must be non-negative");
  if (cfg.manifold.shooting_iterations < 0) bad("manifold.shooting_iterations", "must be non-negative");
  if (!(cfg.manifold.pad_efolds >= 0.0)) bad("manifold.pad_efolds", "must be non-negative");
}

Scenario build_scenario(const ScenarioConfig& cfg) {
  validate(cfg);
  std::vector<double> e, mb, m, ms;
  std::vector<Vec3> r, u;
  if (cfg.generate) {
    CounterRng rng(cfg.seed);
    const auto& g = *cfg.generate;
    for (int a = 0; a < g.count; ++a) {
      double q = rng.uniform(0.5, 2.0);
      if (rng.uniform() < 0.5) q = -q;
      e.push_back(q);
      const double mass = rng.uniform(0.5, 3.0);
      m.push_back(mass);
      ms.push_back(mass * rng.uniform(0.7, 1.0));
    }
    for (int a = 0; a < g.count; ++a) {
      for (int attempt = 0;; ++attempt) {
        if (attempt > 100000) throw Error(ErrorCode::Config, "generate: cannot place particles with min_separation");
        const Vec3 p(rng.uniform(-g.extent, g.extent), rng.uniform(-g.extent, g.extent),
                     rng.uniform(-g.extent, g.extent));
        bool ok = true;
        for (const auto& q : r) ok = ok && (p - q).norm() >= g.min_separation;
        if (ok) {
          r.push_back(p);
          break;
        }
      }
    }
    for (int a = 0; a < g.count; ++a) {
      u.emplace_back(rng.uniform(-g.speed, g.speed), rng.uniform(-g.speed, g.speed), rng.uniform(-g.speed, g.speed));
    }
  } else {
    const bool any_bare = std::any_of(cfg.particles.begin(), cfg.particles.end(),
                                      [](const ParticleSpec& p) { return p.bare_mass.has_value(); });
    const double me = any_bare ? electromagnetic_mass(make_form_factor(cfg.support_radius, cfg.sharpness)) : 0.0;
    for (const auto& p : cfg.particles) {
      e.push_back(p.charge);
      if (p.bare_mass) {
        const auto eff = effective_masses(*p.bare_mass, p.charge, me);
        m.push_back(eff.m);
        ms.push_back(eff.m_star);
      } else {
        m.push_back(*p.mass);
        ms.push_back(*p.star_mass);
      }
      r.push_back(p.position);
      u.push_back(p.velocity);
    }
  }

  const int n = static_cast<int>(e.size());
  PhaseState s0{cfg.t_start, Vector(3 * n), Vector(3 * n)};
  for (int a = 0; a < n; ++a) {
    s0.r.segment<3>(3 * a) = r[a];
    s0.u.segment<3>(3 * a) = u[a];
  }
  Scenario sc{ParticleSystem::from_effective(e, m, ms), s0, {}, {}};
  sc.regularization = cfg.regularization ? *cfg.regularization : Regularization::from_initial(s0);
  sc.guard = cfg.guard ? *cfg.guard : CollisionGuard::from_regularization(sc.regularization);
  return sc;
}

}  // namespace pcdyn::cli
