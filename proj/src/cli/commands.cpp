#include "volterra/cli/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "volterra/errors.hpp"
#include "volterra/io.hpp"
#include "volterra/kolmogorov.hpp"
#include "volterra/lift.hpp"
#include "volterra/ou_lift.hpp"
#include "volterra/parallel.hpp"
#include "volterra/sve.hpp"
#include "volterra/tangent.hpp"

namespace volterra::cli {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Ctx {
  std::string command;
  Config& cfg;
  const RunOptions& opt;
  fs::path out;

  // Prints the plan and returns true on --dry-run; call once every key has been read.
  bool plan() const {
    if (!opt.dry_run) return false;
    std::cout << "plan: " << command << "\n" << cfg.render();
    return true;
  }
  fs::path file(const std::string& name) const { return out / name; }
  bool csv() const { return cfg.flag("output.csv", true); }
};

json params(const Config& cfg) {
  json p = json::object();
  for (const auto& [k, v] : cfg.resolved())
    if (k.rfind("output.", 0) != 0) p[k] = v;
  return p;
}

json est(const MCEstimate& e) {
  return {{"estimate", e.mean}, {"std_error", e.std_error}, {"n_samples", e.n_samples}};
}

void emit(const Ctx& x, double estimate, double std_error, json per_term) {
  std::string op = x.command;
  for (char& c : op)
    if (c == ' ') c = '.';
  json r = {{"operation", op},
            {"params", params(x.cfg)},
            {"estimate", estimate},
            {"std_error", std_error},
            {"per_term", std::move(per_term)}};
  std::ofstream f(x.file("result.json"));
  f << r.dump(2) << "\n";
  if (!x.opt.quiet) std::cout << r.dump(2) << "\n";
}

void emit(const Ctx& x, const MCEstimate& e, json per_term) {
  emit(x, e.mean, e.std_error, std::move(per_term));
}

// ------------------------------------------------------------------ config -> objects

double hurst(const Config& c) { return c.num("model.kernel.H"); }

Model build_model(const Config& c) {
  const std::string preset = c.str("model.preset");
  const std::string kind = c.str("model.kernel.kind", "power_law");
  if (kind != "power_law" && kind != "exponential")
    throw ConfigError("key \"model.kernel.kind\": expected power_law or exponential, got \"" + kind + "\"");
  const bool power = kind == "power_law";
  const bool needs_h = power && preset != "brownian" && preset != "ou";
  const double H = needs_h ? hurst(c) : 0.5;
  const double beta = c.num("model.weight.beta", default_beta(H));
  Model m;
  if (preset == "brownian") {
    m = presets::brownian(c.num("model.x0", 0.0), c.num("model.coef.sigma", 1.0));
  } else if (preset == "fbm2") {
    m = presets::fbm_type2(H, beta);
  } else if (preset == "fbm1") {
    m = presets::fbm_type1(H, beta);
  } else if (preset == "ou") {
    m = presets::ou_stationary();
  } else if (preset == "rbergomi") {
    m = presets::rough_bergomi(H, beta, c.num("model.coef.v0", 0.0), c.num("model.coef.rho", -0.7),
                               c.num("model.coef.nu", 0.05));
  } else if (preset == "rbergomi_smooth") {
    m = presets::rough_bergomi_smooth(H, beta, c.num("model.coef.v0", 0.0),
                                      c.num("model.coef.rho", -0.7), c.num("model.coef.nu", 0.3),
                                      c.num("model.coef.kappa", 1.0));
  } else if (preset == "rheston") {
    m = presets::rough_heston(H, beta, c.num("model.coef.v0", 0.04));
  } else if (preset == "smooth") {
    m = presets::smooth(H, beta, c.num("model.coef.theta", -0.5), c.num("model.coef.s0", 1.0),
                        c.num("model.coef.s1", 0.3), c.num("model.x0", 0.2));
  } else if (preset == "linear") {
    m = presets::linear(H, beta, c.num("model.coef.a", -0.5), c.num("model.coef.sigma", 1.0),
                        c.num("model.x0", 1.0));
  } else if (preset == "gaussian") {
    m = presets::gaussian(H, beta, c.num("model.coef.sigma", 1.0), c.num("model.x0", 0.0));
  } else {
    std::string names;
    for (const auto& n : presets::names()) names += " " + n;
    throw ConfigError("key \"model.preset\": unknown preset \"" + preset + "\"; known:" + names);
  }
  if (!power) {
    if (m.d() != 1) throw ConfigError("key \"model.kernel.kind\": only scalar presets take a custom kernel");
    m = m.with_kernel(Kernel(ScalarKernel::exponential(c.num("model.kernel.rate", 1.0))));
  } else if (needs_h && m.d() == 1) {
    const bool normalized = c.flag("model.kernel.normalized", true);
    if (!normalized) m = m.with_kernel(Kernel(ScalarKernel::power_law(H, false)));
  }
  m.weight.beta = beta;
  m.weight.decay = c.num("model.weight.decay", 1.0);
  return m;
}

TimeGrid build_grid(const Config& c) {
  TimeGrid g;
  g.T = c.num("grid.T", 1.0);
  g.steps = c.count("grid.steps", 64);
  if (!(g.T > 0.0)) throw ConfigError("key \"grid.T\": must be positive");
  if (g.steps == 0) throw ConfigError("key \"grid.steps\": must be positive");
  return g;
}

WeightedSpace build_space(const Config& c, const Model& m) {
  const SpaceGrid g = SpaceGrid::standard(c.num("grid.space.first", 1e-4), c.num("grid.space.ratio", 1.15),
                                          c.num("grid.space.step", 0.05), c.num("grid.space.x_max", 40.0));
  WeightSpec w = m.weight;
  return WeightedSpace(w, g);
}

std::vector<double> split_numbers(const std::string& key, const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (item.empty() || *end != '\0') throw ConfigError("key \"" + key + "\": bad number \"" + item + "\"");
    out.push_back(v);
  }
  return out;
}

// x0 | const:c | kernel:delta | gauss:a,m,s | exp:a,r | file:path
Curve build_curve(const std::string& key, const std::string& spec, const Model& m) {
  const std::size_t d = m.d();
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  auto args = [&](std::size_t n) {
    auto v = split_numbers(key, arg);
    if (v.size() != n) throw ConfigError("key \"" + key + "\": \"" + kind + "\" takes " + std::to_string(n) + " numbers");
    return v;
  };
  if (kind == "x0") return m.x0.base();
  if (kind == "const") return Curve::constant(std::vector<double>(d, args(1)[0]));
  if (kind == "kernel") {
    const double delta = args(1)[0];
    if (!(delta > 0.0)) throw ConfigError("key \"" + key + "\": kernel shift must be positive");
    return kernel_curve(m.kernel, delta);
  }
  if (kind == "gauss") {
    const auto v = args(3);
    const double a = v[0], mu = v[1], s = v[2];
    return Curve::analytic(
        d,
        [=](double x, double* o) {
          for (std::size_t i = 0; i < d; ++i) o[i] = a * std::exp(-0.5 * (x - mu) * (x - mu) / (s * s));
        },
        [=](double x, double* o) {
          for (std::size_t i = 0; i < d; ++i)
            o[i] = -a * (x - mu) / (s * s) * std::exp(-0.5 * (x - mu) * (x - mu) / (s * s));
        });
  }
  if (kind == "exp") {
    const auto v = args(2);
    const double a = v[0], r = v[1];
    return Curve::analytic(
        d, [=](double x, double* o) { for (std::size_t i = 0; i < d; ++i) o[i] = a * std::exp(-r * x); },
        [=](double x, double* o) { for (std::size_t i = 0; i < d; ++i) o[i] = -a * r * std::exp(-r * x); });
  }
  if (kind == "file") return io::read_curve_csv(arg, d);
  throw ConfigError("key \"" + key + "\": unknown curve \"" + spec +
                    "\" (x0, const:c, kernel:delta, gauss:a,m,s, exp:a,r, file:path)");
}

Curve curve_key(const Config& c, const std::string& key, const std::string& def, const Model& m) {
  return build_curve(key, c.str(key, def), m);
}

std::size_t step_of(const Config& c, const std::string& key, double def, const TimeGrid& g) {
  const double t = c.num(key, def);
  const double n = std::round(t / g.dt());
  if (t < 0.0 || n > static_cast<double>(g.steps) || std::abs(n * g.dt() - t) > 1e-9 * g.T)
    throw ConfigError("key \"" + key + "\": t = " + io::fmt(t) + " is not a node of the time grid");
  return static_cast<std::size_t>(n);
}

ScalarFn scalar_fn(const Config& c) {
  const std::string name = c.str("task.payoff", "square");
  try {
    return parse_scalar_fn(name);
  } catch (const Error&) {
    throw ConfigError("key \"task.payoff\": unknown function \"" + name + "\" (identity, square, tanh, softplus)");
  }
}

Payoff build_payoff(const Config& c, const Model& m, const WeightedSpace& space) {
  const ScalarFn fn = scalar_fn(c);
  const std::string kind = c.str("task.payoff.kind", "pointwise");
  const double strike = c.num("task.strike", 0.0);
  if (kind == "pointwise") return Payoff::pointwise(fn, m.d(), c.count("task.payoff.coord", 0), strike);
  if (kind == "cylinder")
    return Payoff::cylinder(fn, curve_key(c, "task.payoff.g", "gauss:1,1,0.5", m), space, strike);
  throw ConfigError("key \"task.payoff.kind\": expected pointwise or cylinder");
}

// Kernel column S(delta)K e_i or a shifted curve; `kernel_delta` is the default shift for K.
Direction build_direction(const Config& c, const Model& m, double kernel_delta) {
  const std::string kind = c.str("task.direction", "K");
  const double delta = c.num("task.delta", kind == "K" ? kernel_delta : 0.0);
  if (kind == "K") return Direction::kernel_column(m.kernel, delta, c.count("task.direction.column", 0));
  if (kind == "curve")
    return Direction::curve(curve_key(c, "task.direction.curve", "gauss:1,0.5,0.25", m)).shifted(delta);
  throw ConfigError("key \"task.direction\": expected K or curve");
}

SimOptions sim_options(const Config& c) {
  SimOptions o;
  o.antithetic = c.flag("mc.antithetic", false);
  return o;
}

NestedBudget budget(const Config& c) {
  NestedBudget b;
  b.outer = c.count("mc.outer", b.outer);
  b.inner = c.count("mc.inner", b.inner);
  b.cap = c.count("mc.cap", b.cap);
  b.closed_form = c.flag("mc.closed_form", false);
  return b;
}

std::vector<double> scaled_deltas(const Config& c, const std::vector<double>& def, double dt) {
  auto v = c.list("task.deltas", def);
  for (double& d : v) d *= dt;
  return v;
}

// Row with the largest |mean| / std_error.
struct Worst {
  MCEstimate e;
  double z = 0.0;
};
template <class Rows, class Get>
Worst worst(const Rows& rows, Get get) {
  Worst w;
  for (const auto& r : rows) {
    const MCEstimate& e = get(r);
    const double z = e.std_error > 0.0 ? std::abs(e.mean) / e.std_error : (e.mean == 0.0 ? 0.0 : INFINITY);
    if (z >= w.z) w = {e, z};
  }
  return w;
}

std::vector<double> terminal_column(const Field& f, std::size_t coord) {
  std::vector<double> s(f.n_paths);
  for (std::size_t p = 0; p < f.n_paths; ++p) s[p] = f.at(p, f.grid.steps)[coord];
  return s;
}

void write_field_csv(const fs::path& path, const Field& f) {
  std::vector<std::string> header = {"path", "t"};
  for (std::size_t i = 0; i < f.d; ++i) header.push_back("zeta" + std::to_string(i + 1));
  std::vector<std::vector<double>> rows;
  for (std::size_t p = 0; p < f.n_paths; ++p)
    for (std::size_t n = f.start; n <= f.grid.steps; ++n) {
      std::vector<double> r = {static_cast<double>(p), f.grid.t(n)};
      for (std::size_t i = 0; i < f.d; ++i) r.push_back(f.at(p, n)[i]);
      rows.push_back(std::move(r));
    }
  io::write_csv(path.string(), header, rows);
}

// ------------------------------------------------------------------ sve / lift / oulift

int sve_simulate(Ctx& x) {
  const Config& c = x.cfg;
  const Model m = build_model(c);
  const TimeGrid g = build_grid(c);
  const std::size_t n = c.count("mc.paths", 10000);
  const std::uint64_t seed = c.u64("mc.seed", 1);
  const double delta = c.num("task.delta", 0.0);
  const double p = c.num("task.p", 2.0);
  const bool binary = c.flag("output.binary", false);
  const bool csv = x.csv();
  const SimOptions o = sim_options(c);
  if (x.plan()) return 0;
  const PathEnsemble e = delta > 0.0 ? simulate_mollified(m, delta, g, n, seed, o) : simulate(m, g, n, seed, o);
  if (csv) io::write_ensemble_csv(x.file("ensemble.csv").string(), e);
  if (binary) io::write_ensemble_binary(x.file("ensemble.bin").string(), e);
  const auto xt = terminal_column(e, 0);
  const MCEstimate mean = estimate(xt);
  std::vector<double> sq(xt.size());
  for (std::size_t i = 0; i < xt.size(); ++i) sq[i] = (xt[i] - mean.mean) * (xt[i] - mean.mean);
  const MomentReport mom = moment_sup(e, p);
  emit(x, mean,
       {{"variance_T", estimate(sq).mean * static_cast<double>(n) / static_cast<double>(n - 1)},
        {"moment_sup", est(mom.sup)},
        {"moment_argmax_t", g.t(mom.argmax)},
        {"fingerprint", e.fingerprint}});
  return 0;
}

LiftEnsemble lift_from(const Config& c, const Model& m, const TimeGrid& g, std::size_t n, std::uint64_t seed) {
  const auto nodes = default_lift_nodes(g, c.count("grid.lift.nodes", 64), c.num("grid.lift.x_max", 10.0));
  return simulate_lift(m, g, nodes, n, seed, sim_options(c));
}

int lift_simulate(Ctx& x) {
  const Config& c = x.cfg;
  const Model m = build_model(c);
  const TimeGrid g = build_grid(c);
  const std::size_t n = c.count("mc.paths", 1000);
  const std::uint64_t seed = c.u64("mc.seed", 1);
  c.count("grid.lift.nodes", 64);
  c.num("grid.lift.x_max", 10.0);
  sim_options(c);
  const bool csv = x.csv();
  if (x.plan()) return 0;
  const LiftEnsemble l = lift_from(c, m, g, n, seed);
  if (csv) io::write_lift_csv(x.file("lift.csv").string(), l);
  std::vector<double> s(n);
  for (std::size_t p = 0; p < n; ++p) s[p] = l.value(p, l.times.size() - 1, 0);
  emit(x, estimate(s), {{"nodes", l.x.size()}, {"x_max", l.x.back()}, {"lift_property", "bitwise"}});
  return 0;
}

int lift_flow_check(Ctx& x) {
  const Config& c = x.cfg;
  const Model m = build_model(c);
  const TimeGrid g = build_grid(c);
  const std::size_t n = c.count("mc.paths", 1000);
  const std::uint64_t seed = c.u64("mc.seed", 1);
  const std::size_t r = step_of(c, "task.t", g.T / 2, g);
  const std::uint64_t fresh = c.u64("task.fresh_seed", seed + 1);
  c.count("grid.lift.nodes", 64);
  c.num("grid.lift.x_max", 10.0);
  sim_options(c);
  if (x.plan()) return 0;
  const LiftEnsemble l = lift_from(c, m, g, n, seed);
  const FlowCheckReport f = flow_restart_check(l, r);
  const KSResult ks = markov_statistic(l, r, fresh);
  emit(x, f.sup_discrepancy, kNaN,
       {{"restart_t", f.restart_time}, {"paths", f.paths}, {"markov_ks_statistic", ks.statistic},
        {"markov_ks_p_value", ks.p_value}});
  return 0;
}

int lift_forward_check(Ctx& x) {
  const Config& c = x.cfg;
  const Model m = build_model(c);
  const TimeGrid g = build_grid(c);
  const std::size_t n = c.count("mc.paths", 4000);
  const std::uint64_t seed = c.u64("mc.seed", 1);
  const std::size_t coord = c.count("task.coord", 0);
  c.count("grid.lift.nodes", 64);
  c.num("grid.lift.x_max", 10.0);
  sim_options(c);
  const bool csv = x.csv();
  if (x.plan()) return 0;
  const LiftEnsemble l = lift_from(c, m, g, n, seed);
  const auto rows = forward_curve_check(l, coord);
  std::vector<std::vector<double>> table;
  double zmax = 0.0;
  const ForwardCurveRow* wr = &rows.front();
  for (const auto& r : rows) {
    const double z = r.mc.std_error > 0 ? std::abs(r.mc.mean - r.exact) / r.mc.std_error
                                        : (r.mc.mean == r.exact ? 0.0 : INFINITY);
    if (z >= zmax) {
      zmax = z;
      wr = &r;
    }
    table.push_back({r.t, r.x, r.mc.mean, r.mc.std_error, r.exact, r.mean_X, z});
  }
  if (csv) io::write_csv(x.file("forward.csv").string(), {"t", "x", "mean", "std_error", "exact", "mean_X", "z"}, table);
  emit(x, wr->mc.mean - wr->exact, wr->mc.std_error,
       {{"max_z", zmax}, {"rows", rows.size()}, {"worst_t", wr->t}, {"worst_x", wr->x}});
  return 0;
}

int oulift_simulate(Ctx& x) {
  const Config& c = x.cfg;
  const Model m = build_model(c);
  const TimeGrid g = build_grid(c);
  const std::size_t n = c.count("mc.paths", 1000);
  const std::uint64_t seed = c.u64("mc.seed", 1);
  const std::size_t nodes = c.count("task.nodes", 50);
  const SimOptions o = sim_options(c);
  const bool csv = x.csv();
  if (x.plan()) return 0;
  const CMQuadrature q = cm_quadrature(m.kernel, nodes, g.T, g.dt());
  const OUField ou = simulate_ou(m, q, g, n, seed, o);
  if (csv) io::write_ou_csv(x.file("ou.csv").string(), ou);
  std::vector<double> s(n);
  for (std::size_t p = 0; p < n; ++p) s[p] = ou.X(p, g.steps);
  emit(x, estimate(s), {{"nodes", q.size()}, {"kernel_max_rel_error", q.max_rel_error},
                        {"reference_t_min", q.t_min}, {"reference_t_max", q.t_max}});
  return 0;
}

int oulift_compare(Ctx& x) {
  const Config& c = x.cfg;
  const Model m = build_model(c);
  const TimeGrid g = build_grid(c);
  const std::size_t n = c.count("mc.paths", 1000);
  const std::uint64_t seed = c.u64("mc.seed", 1);
  const std::size_t nodes = c.count("task.nodes", 50);
  c.count("grid.lift.nodes", 64);
  c.num("grid.lift.x_max", 10.0);
  const SimOptions o = sim_options(c);
  if (x.plan()) return 0;
  const CMQuadrature q = cm_quadrature(m.kernel, nodes, g.T, g.dt());
  const OUField ou = simulate_ou(m, q, g, n, seed, o);
  const LiftEnsemble l = lift_from(c, m, g, n, seed);
  const OUEquivalenceReport r = ou_curve_equivalence(ou, l);
  emit(x, r.sup, kNaN, {{"rms", r.rms}, {"sup_x0", r.sup_x0}, {"nodes", q.size()},
                        {"kernel_max_rel_error", q.max_rel_error}});
  return 0;
}

// ------------------------------------------------------------------ tangent

int tangent_first(Ctx& x) {
  const Config& c = x.cfg;
  const Model m = build_model(c);
  const TimeGrid g = build_grid(c);
  const WeightedSpace space = build_space(c, m);
  const std::size_t n = c.count("mc.paths", 1000);
  const std::uint64_t seed = c.u64("mc.seed", 1);
  const Direction h = build_direction(c, m, g.dt());
  const std::size_t s = step_of(c, "task.t", 0.0, g);
  const double eps = c.num("task.eps", 1e-4);
  const double p = c.num("task.p", 2.0);
  const bool csv = x.csv();
  if (x.plan()) return 0;
  const PathEnsemble e = simulate(m, g, n, seed);
  const TangentEnsemble z = first_variation(m, h, s, e);
  if (csv) write_field_csv(x.file("tangent.csv"), z);
  json per = {{"start_t", g.t(s)}};
  if (s < g.steps) per["moment_bound_max_ratio"] = moment_bound_check(m, z, h, p, space).max_ratio;
  if (s == 0 && !h.singular()) {
    const BumpCheck b = first_variation_bump(m, g, m.x0.base(), h, eps, n, seed, space);
    per["bump_rel_error"] = b.rel_error;
    per["bump_abs_error"] = b.abs_error;
  }
  emit(x, estimate(terminal_column(z, 0)), per);
  return 0;
}

int tangent_second(Ctx& x) {
  const Config& c = x.cfg;
  const Model m = build_model(c);
  const TimeGrid g = build_grid(c);
  const WeightedSpace space = build_space(c, m);
  const std::size_t n = c.count("mc.paths", 1000);
  const std::uint64_t seed = c.u64("mc.seed", 1);
  const Direction h = build_direction(c, m, g.dt());
  const std::size_t s = step_of(c, "task.t", 0.0, g);
  const double eps = c.num("task.eps", 1e-3);
  const bool force = c.flag("task.force", false);
  const bool csv = x.csv();
  if (x.plan()) return 0;
  check_second_order_guard(m, force);
  const PathEnsemble e = simulate(m, g, n, seed);
  const TangentEnsemble z = second_variation(m, h, h, s, e, force);
  if (csv) write_field_csv(x.file("tangent2.csv"), z);
  json per = {{"start_t", g.t(s)}};
  if (s == 0 && !h.singular()) {
    const BumpCheck b = second_variation_bump(m, g, m.x0.base(), h, eps, n, seed, space, force);
    per["bump_rel_error"] = b.rel_error;
    per["bump_abs_error"] = b.abs_error;
  }
  emit(x, estimate(terminal_column(z, 0)), per);
  return 0;
}

int tangent_rates(Ctx& x) {
  const Config& c = x.cfg;
  const Model m = build_model(c);
  const TimeGrid g = build_grid(c);
  const std::size_t n = c.count("mc.paths", 4000);
  const std::uint64_t seed = c.u64("mc.seed", 1);
  const auto deltas = scaled_deltas(c, {1, 2, 4, 8, 16}, g.dt());
  const ScalarKernel& k = m.kernel[0];
  const bool power = k.kind() == KernelKind::power_law;
  const double q = power ? c.num("task.q", default_q(k.hurst(), m.weight.beta)) : c.num("task.q", 4.0);
  const bool csv = x.csv();
  if (x.plan()) return 0;
  const MollificationRate r = mollification_rate(m, g, deltas, n, seed);
  std::vector<std::vector<double>> table;
  for (std::size_t i = 0; i < r.deltas.size(); ++i)
    table.push_back({r.deltas[i], r.sup_err[i].mean, r.sup_err[i].std_error});
  if (csv) io::write_csv(x.file("rates.csv").string(), {"delta", "sup_err", "std_error"}, table);
  emit(x, r.slope, kNaN, {{"q", q}, {"target_slope", (q - 2.0) / q - 0.15},
                          {"pass", r.slope >= (q - 2.0) / q - 0.15}});
  return 0;
}

// ------------------------------------------------------------------ kolmogorov

json sweep_terms(const SweepReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) rows.push_back({{"delta", row.delta}, {"estimate", row.estimate.mean},
                                                 {"std_error", row.estimate.std_error}});
  json per = {{"sweep", rows}};
  if (r.extrapolated) per["extrapolated"] = est(*r.extrapolated);
  return per;
}

void write_sweep(const Ctx& x, const SweepReport& r) {
  std::vector<std::vector<double>> t;
  for (const auto& row : r.rows) t.push_back({row.delta, row.estimate.mean, row.estimate.std_error});
  io::write_csv(x.file("sweep.csv").string(), {"delta", "estimate", "std_error"}, t);
}

int kolmo_value(Ctx& x) {
  const Config& c = x.cfg;
  const Model m = build_model(c);
  const TimeGrid g = build_grid(c);
  const WeightedSpace space = build_space(c, m);
  const Payoff f = build_payoff(c, m, space);
  const Curve y = curve_key(c, "task.y", "x0", m);
  const std::size_t s = step_of(c, "task.t", 0.0, g);
  const std::size_t n = c.count("mc.paths", 10000);
  const std::uint64_t seed = c.u64("mc.seed", 1);
  if (x.plan()) return 0;
  require_compliant(m, "kolmo value");
  const MCEstimate u = value(m, f, g, s, y, n, seed);
  json per = json::object();
  if (auto cf = closed_form_value(m, f, g, s, y)) per["closed_form"] = *cf;
  emit(x, u, per);
  return 0;
}

int kolmo_derivative(Ctx& x, bool second) {
  const Config& c = x.cfg;
  const Model m = build_model(c);
  const TimeGrid g = build_grid(c);
  const WeightedSpace space = build_space(c, m);
  const Payoff f = build_payoff(c, m, space);
  const Curve y = curve_key(c, "task.y", "x0", m);
  const std::size_t s = step_of(c, "task.t", 0.0, g);
  const std::size_t n = c.count("mc.paths", 10000);
  const std::uint64_t seed = c.u64("mc.seed", 1);
  const Direction h = build_direction(c, m, 0.0);
  const auto deltas = scaled_deltas(c, {8, 4, 2, 1}, g.dt());
  const bool force = second && c.flag("task.force", false);
  const bool csv = x.csv();
  if (x.plan()) return 0;
  if (second) check_second_order_guard(m, force);
  const SweepReport r = second ? singular_hessian(m, f, g, s, y, h, deltas, n, seed, force)
                               : singular_gradient(m, f, g, s, y, h, deltas, n, seed);
  if (csv) write_sweep(x, r);
  const MCEstimate best = r.extrapolated ? *r.extrapolated : r.rows.back().estimate;
  json per = sweep_terms(r);
  per["reported"] = r.extrapolated ? "richardson_extrapolated" : "finest_delta";
  emit(x, best, per);
  return 0;
}

int kolmo_pde(Ctx& x) {
  const Config& c = x.cfg;
  const Model m = build_model(c);
  const TimeGrid g = build_grid(c);
  const WeightedSpace space = build_space(c, m);
  const Payoff f = build_payoff(c, m, space);
  const Curve y = curve_key(c, "task.y", "x0", m);
  const std::size_t s = step_of(c, "task.t", g.T / 2, g);
  const double delta = c.num("task.delta", g.dt());
  const std::size_t fd = c.count("task.fd_steps", 4);
  const std::size_t n = c.count("mc.paths", 20000);
  const std::uint64_t seed = c.u64("mc.seed", 1);
  const bool force = c.flag("task.force", false);
  if (x.plan()) return 0;
  const PDEResidualReport r = pde_residual(m, f, g, s, y, delta, fd, n, seed, force);
  emit(x, r.residual,
       {{"time", est(r.time_term)}, {"transport", est(r.transport_term)}, {"drift", est(r.drift_term)},
        {"trace", est(r.trace_term)}, {"t", r.t}, {"delta", r.delta}, {"dt_fd", r.dt_fd},
        {"z", r.residual.std_error > 0 ? std::abs(r.residual.mean) / r.residual.std_error : 0.0}});
  return 0;
}

std::vector<std::size_t> checkpoint_steps(const Config& c, const TimeGrid& g) {
  const auto ts = c.list("task.checkpoints", {0.0, g.T / 4, g.T / 2, 3 * g.T / 4});
  std::vector<std::size_t> out;
  for (double t : ts) {
    const double n = std::round(t / g.dt());
    if (t < 0.0 || n > static_cast<double>(g.steps) || std::abs(n * g.dt() - t) > 1e-9 * g.T)
      throw ConfigError("key \"task.checkpoints\": " + io::fmt(t) + " is not a node of the time grid");
    out.push_back(static_cast<std::size_t>(n));
  }
  return out;
}

int kolmo_martingale(Ctx& x) {
  const Config& c = x.cfg;
  const Model m = build_model(c);
  const TimeGrid g = build_grid(c);
  const WeightedSpace space = build_space(c, m);
  const Payoff f = build_payoff(c, m, space);
  const auto cps = checkpoint_steps(c, g);
  const NestedBudget b = budget(c);
  const std::uint64_t seed = c.u64("mc.seed", 1);
  const bool csv = x.csv();
  if (x.plan()) return 0;
  const MartingaleReport r = martingale_check(m, f, g, cps, b, seed);
  std::vector<std::vector<double>> t;
  json rows = json::array();
  for (const auto& row : r.rows) {
    t.push_back({row.t, row.u_mean.mean, row.u_mean.std_error, row.drift.mean, row.drift.std_error});
    rows.push_back({{"t", row.t}, {"u_mean", est(row.u_mean)}, {"drift", est(row.drift)}});
  }
  if (csv) io::write_csv(x.file("martingale.csv").string(), {"t", "u_mean", "u_std_error", "drift", "drift_std_error"}, t);
  const Worst w = worst(r.rows, [](const MartingaleRow& row) -> const MCEstimate& { return row.drift; });
  json per = {{"terminal", est(r.terminal)}, {"rows", rows}, {"max_z", w.z}};
  if (r.exact) per["exact"] = *r.exact;
  emit(x, w.e, per);
  return 0;
}

int kolmo_condexp(Ctx& x) {
  const Config& c = x.cfg;
  const Model m = build_model(c);
  const TimeGrid g = build_grid(c);
  const WeightedSpace space = build_space(c, m);
  const Payoff f = build_payoff(c, m, space);
  const std::size_t s = step_of(c, "task.t", g.T / 2, g);
  const NestedBudget b = budget(c);
  const std::uint64_t seed = c.u64("mc.seed", 1);
  if (x.plan()) return 0;
  const ConditionalReport r = conditional_expectation(m, f, g, s, b, seed);
  json per = {{"history", est(r.history)}, {"value_fn", est(r.value_fn)}, {"t", g.t(s)}};
  if (r.closed_form) per["closed_form"] = est(*r.closed_form);
  emit(x, r.difference, per);
  return 0;
}

int fpe_output(Ctx& x, const std::vector<FPERow>& rows) {
  std::vector<std::vector<double>> t;
  for (const auto& r : rows) t.push_back({r.t, r.residual.mean, r.residual.std_error});
  if (x.csv()) io::write_csv(x.file("fpe.csv").string(), {"t", "residual", "std_error"}, t);
  const Worst w = worst(rows, [](const FPERow& r) -> const MCEstimate& { return r.residual; });
  emit(x, w.e, {{"max_z", w.z}, {"rows", rows.size()}});
  return 0;
}

int kolmo_fpe_mild(Ctx& x) {
  const Config& c = x.cfg;
  const Model m = build_model(c);
  const TimeGrid g = build_grid(c);
  const WeightedSpace space = build_space(c, m);
  c.str("task.payoff.kind", "cylinder");
  const Payoff f = build_payoff(c, m, space);
  const std::size_t n = c.count("mc.paths", 20000);
  const std::uint64_t seed = c.u64("mc.seed", 1);
  x.csv();
  if (x.plan()) return 0;
  return fpe_output(x, fpe_mild_residual(m, f, g, n, seed));
}

int kolmo_fpe_singular(Ctx& x) {
  const Config& c = x.cfg;
  const Model m = build_model(c);
  const TimeGrid g = build_grid(c);
  const WeightedSpace space = build_space(c, m);
  const std::string family = c.str("task.family", "cylinder");
  const SingularFamily fam = parse_singular_family(family);
  const ScalarFn fn = scalar_fn(c);
  const Curve gc = curve_key(c, "task.g", "gauss:1,1,0.5", m);
  const double shift = c.num("task.shift", 0.0);
  const std::size_t n = c.count("mc.paths", 20000);
  const std::uint64_t seed = c.u64("mc.seed", 1);
  if (fam == SingularFamily::value_function) budget(c);
  x.csv();
  if (x.plan()) return 0;
  return fpe_output(x, fpe_singular_residual(m, fam, fn, gc, space, shift, g, n, seed));
}

// ------------------------------------------------------------------ verify

int verify_kernel(Ctx& x) {
  const Config& c = x.cfg;
  const Model m = build_model(c);
  const TimeGrid g = build_grid(c);
  const ScalarKernel& k = m.kernel[0];
  const bool power = k.kind() == KernelKind::power_law;
  const double q = c.num("task.q", power ? default_q(k.hurst(), m.weight.beta) : 4.0);
  const double a = c.num("model.coef.a", 1.0);
  const bool csv = x.csv();
  if (x.plan()) return 0;
  const KernelConditionReport r = verify_assumptions(m.kernel, m.weight, q, g.T);
  if (csv) io::write_condition_csv(x.file("conditions.csv").string(), r);
  Matrix am = Matrix::identity(m.d());
  for (double& v : am.a) v *= a;
  const ResolventGrid R = resolvent_second_kind(m.kernel, am, g);
  if (csv) io::write_resolvent_csv(x.file("resolvent.csv").string(), R);
  auto entry = [](const ConditionEntry& e) { return json{{"value", e.value}, {"pass", e.pass}, {"note", e.note}}; };
  emit(x, r.all_pass() ? 1.0 : 0.0, kNaN,
       {{"q", r.q}, {"cond1", entry(r.cond1)}, {"cond2", entry(r.cond2)}, {"cond2_target", r.cond2_target},
        {"cond3", entry(r.cond3)}, {"q_interval", {r.q_low, r.q_high}}, {"q_interval_empty", r.q_interval_empty},
        {"resolvent_residual", resolvent_residual(m.kernel, am, R)}});
  return 0;
}

int verify_weight(Ctx& x) {
  const Config& c = x.cfg;
  const Model m = build_model(c);
  const WeightedSpace space = build_space(c, m);
  const auto ts = c.list("task.weight.ts", {0.0, 0.1, 0.25, 0.5, 1.0, 2.0});
  const double px = c.num("task.x", 0.0);
  const double L = c.num("task.L", 1.0);
  const bool csv = x.csv();
  if (x.plan()) return 0;
  WeightSpec w = m.weight;
  const ScalarKernel& k = m.kernel[0];
  const bool power = m.d() == 1 && k.kind() == KernelKind::power_law;
  if (power) w.hurst = k.hurst();
  w.validate();
  const auto rows = check_admissible(w, ts);
  std::vector<std::vector<double>> t;
  bool all = true;
  for (const auto& r : rows) {
    t.push_back({r.t, r.sup_ratio, r.bound, r.within_bound ? 1.0 : 0.0});
    all = all && r.within_bound;
  }
  if (csv) io::write_csv(x.file("weight.csv").string(), {"t", "sup_ratio", "bound", "pass"}, t);
  json per = {{"admissible_all", all}, {"x", px}, {"L", L}};
  if (power) {
    const Curve kc = kernel_curve(m.kernel);
    const double l2 = space.inner_l2w(kc, kc);
    const double H = k.hurst(), g = k.gamma_normalized() ? std::tgamma(H + 0.5) : 1.0;
    per["kernel_l2w_sq"] = l2;
    per["kernel_l2w_sq_closed_form"] = std::tgamma(2 * H + w.beta) / std::pow(w.decay, 2 * H + w.beta) / (g * g);
  }
  emit(x, rkhs_constant(w, px, L), kNaN, per);
  return 0;
}

int verify_gronwall_cmd(Ctx& x) {
  const Config& c = x.cfg;
  const TimeGrid g = build_grid(c);
  const std::string inst = c.str("task.gronwall.instance", "exponential");
  const std::size_t draws = inst == "random" ? c.count("task.gronwall.draws", 100) : 1;
  const std::uint64_t seed = c.u64("mc.seed", 1);
  const bool csv = x.csv();
  if (inst != "exponential" && inst != "identity" && inst != "random")
    throw ConfigError("key \"task.gronwall.instance\": expected exponential, identity or random");
  if (x.plan()) return 0;
  const std::size_t N = g.size();
  std::size_t passed = 0;
  double min_slack = INFINITY;
  const CounterRng rng(seed, streams::fresh);
  for (std::size_t r = 0; r < draws; ++r) {
    std::vector<double> xs(N), f(N), k(N);
    if (inst == "exponential") {
      for (std::size_t n = 0; n < N; ++n) {
        xs[n] = std::exp(g.t(n));
        f[n] = 1.0;
        k[n] = 1.0;
      }
      // The discrete hypothesis with the solver's cell weights.
      const auto kappa = cell_integrals(k, g);
      for (std::size_t n = 0; n < N; ++n) {
        double conv = 0.0;
        for (std::size_t i = 1; i <= n; ++i) conv += kappa[i] * xs[n - i + 1];
        xs[n] = std::min(xs[n], f[n] + conv);
      }
    } else if (inst == "identity") {
      for (std::size_t n = 0; n < N; ++n) xs[n] = f[n] = 1.0 + std::sin(3.0 * g.t(n));
    } else {
      const double level = 0.5 + 2.0 * rng.uniform(r, 0, 0);
      for (std::size_t n = 0; n < N; ++n) {
        k[n] = level * rng.uniform(r, n, 1);
        xs[n] = 2.0 * rng.uniform(r, n, 2) - 0.5;
      }
      const auto kappa = cell_integrals(k, g);
      for (std::size_t n = 0; n < N; ++n) {
        double conv = 0.0;
        for (std::size_t i = 1; i <= n; ++i) conv += kappa[i] * xs[n - i + 1];
        f[n] = xs[n] - conv + rng.uniform(r, n, 3);
      }
    }
    const GronwallReport rep = verify_gronwall(xs, f, k, g);
    passed += rep.pass ? 1 : 0;
    min_slack = std::min(min_slack, rep.min_slack);
    if (r == 0 && csv) {
      std::vector<std::vector<double>> t;
      for (std::size_t n = 0; n < N; ++n) t.push_back({g.t(n), xs[n], f[n], rep.bound[n]});
      io::write_csv(x.file("gronwall.csv").string(), {"t", "x", "f", "bound"}, t);
    }
  }
  emit(x, min_slack, kNaN, {{"instances", draws}, {"passed", passed}});
  return 0;
}

using Handler = std::function<int(Ctx&)>;

const std::map<std::string, Handler>& handlers() {
  static const std::map<std::string, Handler> h = {
      {"sve simulate", sve_simulate},
      {"lift simulate", lift_simulate},
      {"lift flow-check", lift_flow_check},
      {"lift forward-check", lift_forward_check},
      {"oulift simulate", oulift_simulate},
      {"oulift compare", oulift_compare},
      {"tangent first", tangent_first},
      {"tangent second", tangent_second},
      {"tangent rates", tangent_rates},
      {"kolmo value", kolmo_value},
      {"kolmo grad", [](Ctx& x) { return kolmo_derivative(x, false); }},
      {"kolmo hess", [](Ctx& x) { return kolmo_derivative(x, true); }},
      {"kolmo pde", kolmo_pde},
      {"kolmo martingale", kolmo_martingale},
      {"kolmo condexp", kolmo_condexp},
      {"kolmo fpe-mild", kolmo_fpe_mild},
      {"kolmo fpe-singular", kolmo_fpe_singular},
      {"verify kernel", verify_kernel},
      {"verify weight", verify_weight},
      {"verify gronwall", verify_gronwall_cmd},
  };
  return h;
}

void write_manifest(const Ctx& x, double wall) {
  std::ofstream f(x.file("manifest.txt"));
  f << "# volterra manifest\n"
    << "# version = " << kVersion << "\n"
    << "# command = " << x.command << "\n"
    << "# seed = " << (x.cfg.resolved().count("mc.seed") ? x.cfg.resolved().at("mc.seed") : "none") << "\n"
    << "# threads = " << threads() << "\n"
    << "# wall_time_s = " << io::fmt(wall) << "\n"
    << "# rerun: volterra run manifest.txt\n\n"
    << x.cfg.render();
}

}  // namespace

std::vector<std::string> commands() {
  std::vector<std::string> out;
  for (const auto& [name, h] : handlers()) out.push_back(name);
  return out;
}

int execute(const std::string& command, Config& cfg, const RunOptions& opt) {
  const auto it = handlers().find(command);
  if (it == handlers().end()) throw ConfigError("unknown command \"" + command + "\"");
  const auto t0 = std::chrono::steady_clock::now();
  set_threads(resolve_threads(opt.threads));
  cfg.str("task.command", command);
  Ctx x{command, cfg, opt, fs::path(cfg.str("output.dir", "out"))};
  try {
    if (!opt.dry_run) fs::create_directories(x.out);
    const int rc = it->second(x);
    if (rc == 0 && !opt.dry_run) {
      const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      write_manifest(x, wall);
    }
    return rc;
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    std::cerr << "volterra " << command << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "volterra " << command << ": " << e.what() << "\n";
    return 1;
  }
}

int main(int argc, const char* const* argv) {
  CLI::App app{"Stochastic Volterra equations: simulation, lifts, tangents and Kolmogorov checks"};
  std::vector<std::string> words;
  std::string config_path;
  std::vector<std::string> sets;
  RunOptions opt;
  bool force = false;
  app.add_option("command", words, "<group> <action>, or: run <manifest>")->required();
  app.add_option("--config", config_path, "config file (sectioned key = value)");
  app.add_option("--set", sets, "override any key: --set grid.steps=128");
  app.add_option("--threads", opt.threads, "worker count (fallback VOLTERRA_THREADS); never changes results");
  app.add_flag("--dry-run", opt.dry_run, "print the resolved plan without computing");
  app.add_flag("--quiet", opt.quiet, "do not echo the JSON record");
  app.add_flag("--force", force, "run second-order operations below the Hurst threshold");
  const std::vector<std::pair<std::string, std::string>> shortcuts = {
      {"--model", "model.preset"}, {"--H", "model.kernel.H"}, {"--beta", "model.weight.beta"},
      {"--paths", "mc.paths"},     {"--steps", "grid.steps"},  {"--T", "grid.T"},
      {"--seed", "mc.seed"},       {"--out", "output.dir"},    {"--payoff", "task.payoff"},
      {"--t", "task.t"},           {"--delta", "task.delta"},  {"--dir", "task.direction"},
      {"--nodes", "task.nodes"}};
  std::vector<std::string> values(shortcuts.size());
  for (std::size_t i = 0; i < shortcuts.size(); ++i)
    app.add_option(shortcuts[i].first, values[i], "sets " + shortcuts[i].second);
  app.footer("commands: run <manifest>, " + [] {
    std::string s;
    for (const auto& c : commands()) s += (s.empty() ? "" : ", ") + c;
    return s;
  }());
  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  try {
    Config cfg;
    std::string command;
    if (words.size() == 2 && words[0] == "run") {
      cfg = Config::load(words[1]);
      command = cfg.str("task.command");
    } else if (words.size() == 2) {
      command = words[0] + " " + words[1];
      if (!config_path.empty()) cfg = Config::load(config_path);
    } else {
      throw ConfigError("expected '<group> <action>' or 'run <manifest>'");
    }
    if (!config_path.empty() && words[0] == "run") throw ConfigError("run takes the manifest as its argument");
    for (std::size_t i = 0; i < shortcuts.size(); ++i)
      if (!values[i].empty()) cfg.set(shortcuts[i].second, values[i]);
    if (force) cfg.set("task.force", "true");
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got \"" + s + "\"");
      cfg.set(s.substr(0, eq), s.substr(eq + 1));
    }
    return execute(command, cfg, opt);
  } catch (const ConfigError& e) {
    std::cerr << "volterra: config error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace volterra::cli
