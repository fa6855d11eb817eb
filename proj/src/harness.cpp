#include "qsd/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "qsd/afp.hpp"
#include "qsd/branching.hpp"
#include "qsd/conditioned_flow.hpp"
#include "qsd/error.hpp"
#include "qsd/fleming_viot.hpp"
#include "qsd/format.hpp"
#include "qsd/graphical.hpp"
#include "qsd/model_zoo.hpp"
#include "qsd/oracle.hpp"
#include "qsd/parallel.hpp"
#include "qsd/return_process.hpp"

namespace qsd {

using json = nlohmann::json;

RateFit rate_fit(const std::vector<RatePoint>& points) {
  std::set<double> distinct;
  for (const auto& p : points) {
    if (!(p.error > 0.0) || !(p.n > 0.0)) {
      fail(ErrorCode::kDegenerateInput, "rate fit needs positive n and error, got (" + format_double(p.n) +
                                            ", " + format_double(p.error) + ")");
    }
    distinct.insert(p.n);
  }
  if (distinct.size() < 2) fail(ErrorCode::kDegenerateInput, "rate fit needs at least 2 distinct n");
  const double m = static_cast<double>(points.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : points) {
    const double x = std::log(p.n), y = std::log(p.error);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  RateFit fit;
  fit.points = points;
  fit.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  fit.intercept = (sy - fit.slope * sx) / m;
  double ss = 0.0;
  for (const auto& p : points) {
    const double r = std::log(p.error) - (fit.intercept + fit.slope * std::log(p.n));
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / m);
  return fit;
}

namespace {

std::size_t truncation_of(const AbsorbedChainModel& model, std::size_t trunc) {
  return model.num_states() ? *model.num_states() : trunc;
}

AbsorbedChainModel finite_view(const AbsorbedChainModel& model, std::size_t trunc) {
  return model.is_finite() ? model : model.truncated(trunc);
}

double default_step(const AbsorbedChainModel& model, std::size_t k) {
  const double max_rate = model.max_total_rate(k);
  return max_rate > 0.0 ? std::min(1e-3, 0.05 / max_rate) : 1e-3;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

ScanResult fv_scan(const AbsorbedChainModel& model, const Distribution& mu, const ScanOptions& opt,
                   std::uint64_t seed) {
  const std::size_t k = truncation_of(model, opt.trunc);
  const auto path = evolve_conditioned(model, mu, opt.horizon, std::min(opt.dt, default_step(model, k)), k);
  ScanResult out;
  out.reference = path.final().mass(opt.state);
  for (const std::size_t n : opt.particles) {
    const auto init = ParticleConfig::from_quota(mu, n);
    const auto vals = run_replicas(opt.replicas, [&](std::size_t r) {
      RngStream rng(seed, {n, r, static_cast<std::uint64_t>(Purpose::kDynamics)});
      const auto fin = fv_final(model, init, opt.horizon, rng);
      std::size_t at = 0;
      for (State x : fin.positions()) at += x == opt.state;
      return static_cast<double>(at) / static_cast<double>(n);
    });
    std::vector<double> abs_err;
    for (double m : vals) abs_err.push_back(std::abs(m - out.reference));
    auto mean_se = [](const std::vector<double>& xs) {
      const double n = static_cast<double>(xs.size());
      double s = 0.0, ss = 0.0;
      for (double x : xs) s += x;
      const double mean = s / n;
      for (double x : xs) ss += (x - mean) * (x - mean);
      const double sd = xs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
      return std::pair{mean, sd / std::sqrt(n)};
    };
    const auto [mae, mae_se] = mean_se(abs_err);
    const auto [mean_m, m_se] = mean_se(vals);
    out.points.push_back({n, mae, mae_se, std::abs(mean_m - out.reference), m_se});
  }
  std::vector<RatePoint> pts;
  bool positive = true;
  for (const auto& p : out.points) {
    pts.push_back({static_cast<double>(p.n), p.mean_abs_error});
    positive = positive && p.mean_abs_error > 0.0;
  }
  if (positive && out.points.size() >= 2) out.fit = rate_fit(pts);
  return out;
}

double lag_autocorrelation(const std::vector<double>& xs, std::size_t lag) {
  if (xs.size() <= lag + 1) return 0.0;
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double var = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) var += (xs[i] - mean) * (xs[i] - mean);
  for (std::size_t i = 0; i + lag < xs.size(); ++i) cov += (xs[i] - mean) * (xs[i + lag] - mean);
  if (!(var > 0.0)) return 0.0;
  return cov / var;
}

std::vector<MethodResult> cross_method_report(const AbsorbedChainModel& input, const ReportBudget& b,
                                              std::uint64_t seed) {
  const AbsorbedChainModel model = finite_view(input, b.trunc);
  const std::size_t k = *model.num_states();
  std::vector<MethodResult> out;
  std::optional<Distribution> oracle;
  auto attempt = [&](const std::string& name, auto&& fn) {
    MethodResult r;
    r.method = name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const Distribution est = fn();
      if (oracle) r.tv_to_oracle = tv_distance(est, *oracle);
    } catch (const std::exception& e) {
      r.status = std::string("failed: ") + e.what();
    }
    r.runtime_seconds = seconds_since(t0);
    out.push_back(std::move(r));
  };
  attempt("oracle", [&] {
    oracle = solve_qsd_power(model, k).nu;
    return *oracle;
  });
  if (!oracle) return out;
  attempt("fv_stationary", [&] {
    RngStream rng(seed, {1, static_cast<std::uint64_t>(Purpose::kDynamics)});
    return fv_stationary(model, b.particles, b.burn_in, b.horizon, rng);
  });
  attempt("phi_iterate", [&] {
    const auto it = phi_iterate(model, Distribution::delta(1), b.phi_iters, b.phi_tol);
    return it.result;
  });
  attempt("afp", [&] {
    RngStream rng(seed, {3, static_cast<std::uint64_t>(Purpose::kAfp)});
    return afp_run(uniformize(model), 1, b.afp_steps, rng).estimate;
  });
  if (b.branch) {
    attempt("branching", [&] {
      KsOptions opt;
      opt.horizon = b.branch_horizon;
      opt.cap = b.branch_cap;
      opt.replicas = b.branch_replicas;
      return ks_estimate(model, opt, seed + 4).nu_hat;
    });
  }
  return out;
}

namespace {

class CsvWriter {
 public:
  explicit CsvWriter(std::initializer_list<const char*> header) {
    bool first = true;
    for (const char* h : header) {
      if (!first) out_ << ',';
      out_ << h;
      first = false;
    }
    out_ << '\n';
  }
  template <typename... Ts>
  void row(const Ts&... cells) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
    out_ << '\n';
  }
  std::string str() const { return out_.str(); }

 private:
  static std::string cell(double v) { return format_double(v); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  template <typename T>
  static std::enable_if_t<std::is_integral_v<T>, std::string> cell(T v) {
    return std::to_string(v);
  }
  std::ostringstream out_;
};

json distribution_json(const Distribution& d) {
  json j = json::object();
  for (const auto& e : d) j[std::to_string(e.state)] = e.mass;
  return j;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

struct MethodOutput {
  std::optional<std::string> csv;
  std::optional<json> data;
  std::optional<std::string> plot;
  json facts = json::object();  // merged into the sidecar
};

std::optional<Distribution> reference_for(const AbsorbedChainModel& model) {
  try {
    if (model.is_finite()) return solve_qsd_power(model, *model.num_states()).nu;
    return minimal_qsd_reference(model, {100, 200, 400, 800}, 1e-3).nu;
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::string plot_header(const std::string& title, const std::string& xlabel, const std::string& ylabel) {
  return "# gnuplot script\nset datafile separator ','\nset key autotitle columnhead\nset title '" + title +
         "'\nset xlabel '" + xlabel + "'\nset ylabel '" + ylabel + "'\n";
}

MethodOutput run_oracle(const ExperimentConfig& cfg, const AbsorbedChainModel& model) {
  const std::size_t k = truncation_of(model, cfg.count("trunc", 200));
  PowerOptions opt;
  opt.tol = cfg.number("tol", 1e-12);
  const auto sol = solve_qsd_power(model, k, opt);
  MethodOutput out;
  out.data = json{{"nu", distribution_json(sol.nu)}, {"lambda", sol.lambda}, {"theta", sol.theta},
                  {"residual", sol.residual}, {"K", k}, {"iterations", sol.iterations},
                  {"truncated", !model.is_finite()}};
  return out;
}

MethodOutput run_conditioned(const ExperimentConfig& cfg, const AbsorbedChainModel& model) {
  const std::size_t k = truncation_of(model, cfg.count("trunc", 200));
  const auto mu = parse_distribution_spec(cfg.text("init", "delta:1"), model);
  const double horizon = cfg.number("horizon", 1.0);
  const double dt = cfg.number("dt", default_step(model, k));
  const double grid = cfg.number("grid", horizon / 10.0);
  const auto path = evolve_conditioned(model, mu, horizon, dt, k);
  CsvWriter csv({"t", "state", "mass"});
  std::vector<double> law;
  const auto steps = static_cast<std::size_t>(std::floor(horizon / grid + 1e-9));
  for (std::size_t i = 0; i <= steps; ++i) {
    const double t = std::min(horizon, static_cast<double>(i) * grid);
    path.dense_at(t, law);
    for (std::size_t x = 0; x < law.size(); ++x) {
      if (law[x] != 0.0) csv.row(t, x + 1, law[x]);
    }
  }
  MethodOutput out;
  out.csv = csv.str();
  out.data = json{{"final", distribution_json(path.final())}, {"theta_final", theta_of(model, path.final())},
                  {"K", k}, {"dt", dt}, {"max_renormalization", path.max_renormalization},
                  {"richardson_error", path.richardson_error}};
  out.plot = plot_header("conditioned law", "t", "mass") +
             "plot for [s in system(\"cut -d, -f2 " + cfg.stem() +
             ".csv | tail -n +2 | sort -nu\")] '" + cfg.stem() +
             ".csv' using 1:($2==s ? $3 : 1/0) with lines title 'state '.s\n";
  return out;
}

MethodOutput run_fv(const ExperimentConfig& cfg, const AbsorbedChainModel& model) {
  const std::size_t n = cfg.count("particles", 100);
  const double horizon = cfg.number("horizon", 1.0);
  const std::string mode = cfg.text("mode", "fixed");
  const auto mu = parse_distribution_spec(cfg.text("init", "delta:1"), model);
  const std::uint64_t seed = *cfg.seed;
  MethodOutput out;
  CsvWriter csv({"replica", "t", "state", "mass"});
  if (mode == "fixed") {
    const double grid = cfg.number("grid", horizon / 10.0);
    const auto init = ParticleConfig::from_quota(mu, n);
    const auto traces = run_replicas(cfg.replicas, [&](std::size_t r) {
      RngStream rng(seed, {r, static_cast<std::uint64_t>(Purpose::kDynamics)});
      return fv_run(model, init, horizon, grid, rng);
    });
    const std::size_t k = truncation_of(model, cfg.count("trunc", 200));
    const auto path = evolve_conditioned(model, mu, horizon, default_step(model, k), k);
    std::uint64_t events = 0, revivals = 0;
    double tv_sum = 0.0;
    for (std::size_t r = 0; r < traces.size(); ++r) {
      const auto& tr = traces[r];
      for (std::size_t i = 0; i < tr.times.size(); ++i) {
        for (const auto& e : tr.measures[i]) csv.row(r, tr.times[i], e.state, e.mass);
      }
      events += tr.events;
      revivals += tr.revivals;
      tv_sum += tv_distance(tr.measures.back(), path.final());
    }
    out.data = json{{"mode", "fixed"}, {"particles", n}, {"replicas", cfg.replicas},
                    {"mean_tv_to_reference", tv_sum / static_cast<double>(traces.size())},
                    {"reference", "conditioned flow"}, {"events", events}, {"revivals", revivals}};
    out.facts["events"] = events;
  } else if (mode == "stationary") {
    const double burn_in = cfg.number("burnin", horizon / 10.0);
    StationaryOptions so;
    so.init = mu;
    const auto results = run_replicas(cfg.replicas, [&](std::size_t r) {
      RngStream rng(seed, {r});
      return fv_stationary(model, n, burn_in, horizon, rng, so);
    });
    const auto reference = reference_for(model);
    double tv_sum = 0.0;
    for (std::size_t r = 0; r < results.size(); ++r) {
      for (const auto& e : results[r]) csv.row(r, horizon, e.state, e.mass);
      if (reference) tv_sum += tv_distance(results[r], *reference);
    }
    // pilot trace: autocorrelation of m(1) at lag B after burn-in (heuristic)
    RngStream pilot(seed, {static_cast<std::uint64_t>(Purpose::kDynamics), 1u << 20});
    const double grid = burn_in / 10.0;
    const auto trace = fv_run(model, ParticleConfig::sample_iid(mu, n, pilot), horizon, grid, pilot,
                              kDefaultEventCap * 100);
    std::vector<double> m1;
    for (std::size_t i = 0; i < trace.times.size(); ++i) {
      if (trace.times[i] > burn_in) m1.push_back(trace.measures[i].mass(1));
    }
    const double acf = lag_autocorrelation(m1, 10);
    out.data = json{{"mode", "stationary"}, {"particles", n}, {"replicas", cfg.replicas},
                    {"burnin", burn_in}, {"horizon", horizon},
                    {"mean_tv_to_reference", reference ? json(tv_sum / static_cast<double>(results.size()))
                                                       : json(nullptr)},
                    {"reference", model.is_finite() ? "oracle" : "minimal QSD reference"},
                    {"burnin_autocorrelation", acf}, {"burnin_adequate", std::abs(acf) < 0.05},
                    {"pilot_events", trace.events}};
    out.facts["events"] = trace.events;
  } else {
    fail(ErrorCode::kConfigInvalid, "[fv] mode: expected fixed or stationary, got '" + mode + "'");
  }
  out.csv = csv.str();
  return out;
}

MethodOutput run_phi(const ExperimentConfig& cfg, const AbsorbedChainModel& input) {
  const AbsorbedChainModel model = finite_view(input, cfg.count("trunc", 200));
  const auto mu0 = parse_distribution_spec(cfg.text("init", "delta:1"), model);
  const auto it = phi_iterate(model, mu0, cfg.count("iters", 100), cfg.number("tol", 1e-10));
  const auto oracle = reference_for(model);
  // replay the iterates for the oracle column; phi_map is deterministic
  CsvWriter csv({"iteration", "tv_step", "tv_to_oracle"});
  Distribution mu = mu0;
  for (std::size_t i = 0; i < it.tv_log.size(); ++i) {
    mu = phi_map(model, mu);
    if (oracle) {
      csv.row(i + 1, it.tv_log[i], tv_distance(mu, *oracle));
    } else {
      csv.row(i + 1, it.tv_log[i], "");
    }
  }
  MethodOutput out;
  out.csv = csv.str();
  out.data = json{{"nu", distribution_json(it.result)}, {"converged", it.converged},
                  {"iterations", it.tv_log.size()},
                  {"tv_to_oracle", oracle ? json(tv_distance(it.result, *oracle)) : json(nullptr)},
                  {"exploratory", !input.is_finite()}};
  out.plot = plot_header("Phi iteration", "iteration", "TV") + "set logscale y\nplot '" + cfg.stem() +
             ".csv' using 1:2 with linespoints, '' using 1:3 with linespoints\n";
  return out;
}

MethodOutput run_afp(const ExperimentConfig& cfg, const AbsorbedChainModel& input) {
  const AbsorbedChainModel model = finite_view(input, cfg.count("trunc", 200));
  const auto d = cfg.param("uniformization-rate") && *cfg.param("uniformization-rate") != "auto"
                     ? uniformize(model, cfg.number("uniformization-rate", 0.0))
                     : uniformize(model);
  const std::uint64_t steps = cfg.count("steps", 1'000'000);
  const auto marks = doubling_checkpoints(steps, cfg.count("checkpoints", 10));
  std::optional<Distribution> oracle;
  try {
    oracle = solve_qsd_discrete(d).nu;
  } catch (const Error&) {
  }
  RngStream rng(*cfg.seed, {0, static_cast<std::uint64_t>(Purpose::kAfp)});
  const auto run = afp_run(d, static_cast<State>(cfg.count("start", 1)), steps, rng, marks, oracle);
  CsvWriter csv({"checkpoint", "state", "mass", "tv_to_oracle"});
  for (const auto& c : run.checkpoints) {
    for (const auto& e : c.estimate) {
      if (c.tv_to_reference) {
        csv.row(c.n, e.state, e.mass, *c.tv_to_reference);
      } else {
        csv.row(c.n, e.state, e.mass, "");
      }
    }
  }
  MethodOutput out;
  out.csv = csv.str();
  out.data = json{{"estimate", distribution_json(run.estimate)}, {"steps", steps},
                  {"tv_to_oracle", oracle ? json(tv_distance(run.estimate, *oracle)) : json(nullptr)},
                  {"exploratory", !input.is_finite()}};
  out.facts["events"] = steps;
  out.plot = plot_header("AFP history", "steps", "TV to oracle") + "set logscale xy\nplot '" + cfg.stem() +
             ".csv' using 1:4 with linespoints\n";
  return out;
}

MethodOutput run_branch(const ExperimentConfig& cfg, const AbsorbedChainModel& input) {
  const AbsorbedChainModel model = finite_view(input, cfg.count("trunc", 200));
  KsOptions opt;
  const std::string alpha = cfg.text("alpha", "auto");
  if (alpha != "auto") opt.alpha = cfg.number("alpha", 0.0);
  opt.horizon = cfg.number("horizon", 15.0);
  opt.cap = cfg.count("cap", 100'000);
  opt.restarts = cfg.count("restarts", 20);
  opt.founder = static_cast<State>(cfg.count("founder", 1));
  opt.replicas = cfg.replicas;
  const auto est = ks_estimate(model, opt, *cfg.seed);
  const auto oracle = reference_for(model);
  MethodOutput out;
  out.data = json{{"nu_hat", distribution_json(est.nu_hat)}, {"survival_fraction", est.survival_fraction},
                  {"growth_rate_fit", optional_json(est.growth_rate_fit)},
                  {"theta_hat", optional_json(est.theta_hat)}, {"cap_events", est.cap_events},
                  {"alpha", est.alpha}, {"survivors", est.survivors}, {"attempts", est.attempts},
                  {"tv_to_oracle", oracle ? json(tv_distance(est.nu_hat, *oracle)) : json(nullptr)}};
  return out;
}

MethodOutput run_couple(const ExperimentConfig& cfg, const AbsorbedChainModel& model) {
  const std::size_t n = cfg.count("particles", 80);
  const double horizon = cfg.number("horizon", 2.0);
  const double grid = cfg.number("grid", horizon / 40.0);
  const std::size_t k = truncation_of(model, cfg.count("trunc", 200));
  const auto mu = parse_distribution_spec(cfg.text("init", model.is_finite() ? "qsd" : "delta:1"), model);
  const auto path = evolve_conditioned(model, mu, horizon, cfg.number("dt", default_step(model, k)), k);
  const auto runs = run_replicas(cfg.replicas, [&](std::size_t r) {
    return coupled_tagged_run(model, mu, path, n, horizon, grid, *cfg.seed, r);
  });
  CsvWriter csv({"replica", "psi", "divergence_time"});
  double psi = 0.0, psi0 = 0.0;
  std::vector<double> mean_dev(runs.front().grid.size(), 0.0);
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& run = runs[r];
    csv.row(r, run.psi ? 1 : 0, run.psi ? format_double(run.divergence_time) : std::string(""));
    psi += run.psi;
    psi0 += run.divergence_time == 0.0;
    for (std::size_t i = 0; i < mean_dev.size(); ++i) mean_dev[i] += run.deviation[i];
  }
  const double reps = static_cast<double>(runs.size());
  for (double& v : mean_dev) v /= reps;
  double integral = 0.0;
  const auto& g = runs.front().grid;
  for (std::size_t i = 1; i < g.size(); ++i) integral += 0.5 * (g[i] - g[i - 1]) * (mean_dev[i] + mean_dev[i - 1]);
  const double p = psi / reps;
  const double c0 = *model.bounds().c0;
  MethodOutput out;
  out.csv = csv.str();
  out.data = json{{"particles", n}, {"replicas", runs.size()}, {"horizon", horizon},
                  {"p_psi", p}, {"p_psi_standard_error", std::sqrt(p * (1.0 - p) / reps)},
                  {"p_psi0", psi0 / reps}, {"integrated_deviation", integral},
                  {"coupling_bound", psi0 / reps + c0 * integral}, {"certifying", model.is_finite()}};
  return out;
}

std::vector<std::size_t> parse_list(const std::string& text, const std::string& key) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      const long long v = parse_int(item, key);
      if (v < 2) throw Error(ErrorCode::kParse, "too small");
      out.push_back(static_cast<std::size_t>(v));
    } catch (const Error&) {
      fail(ErrorCode::kConfigInvalid, key + ": expected a comma-separated list of integers >= 2, got '" + text + "'");
    }
  }
  return out;
}

MethodOutput run_scan(const ExperimentConfig& cfg, const AbsorbedChainModel& model) {
  ScanOptions opt;
  opt.particles = parse_list(cfg.text("particles", "50,200,800"), "[scan] particles");
  opt.horizon = cfg.number("horizon", 1.0);
  opt.state = static_cast<State>(cfg.count("state", 1));
  opt.replicas = cfg.replicas;
  opt.trunc = cfg.count("trunc", 200);
  opt.dt = cfg.number("dt", 1e-3);
  const auto mu = parse_distribution_spec(cfg.text("init", "delta:1"), model);
  const auto res = fv_scan(model, mu, opt, *cfg.seed);
  CsvWriter csv({"n", "mean_abs_error", "standard_error", "bias", "bias_standard_error"});
  for (const auto& p : res.points) csv.row(p.n, p.mean_abs_error, p.standard_error, p.bias, p.bias_standard_error);
  MethodOutput out;
  out.csv = csv.str();
  json fit = nullptr;
  if (res.fit) fit = json{{"slope", res.fit->slope}, {"intercept", res.fit->intercept}, {"residual", res.fit->residual}};
  out.data = json{{"reference", res.reference}, {"fit", fit}, {"replicas", cfg.replicas}};
  out.plot = plot_header("FV error vs N", "N", "mean |m - T mu|") + "set logscale xy\nplot '" + cfg.stem() +
             ".csv' using 1:2:3 with yerrorbars, '' using 1:2 with lines\n";
  return out;
}

MethodOutput run_report(const ExperimentConfig& cfg, const AbsorbedChainModel& model) {
  ReportBudget b;
  b.trunc = cfg.count("trunc", b.trunc);
  b.particles = cfg.count("particles", b.particles);
  b.horizon = cfg.number("horizon", b.horizon);
  b.burn_in = cfg.number("burnin", b.burn_in);
  b.phi_iters = cfg.count("iters", b.phi_iters);
  b.afp_steps = cfg.count("steps", b.afp_steps);
  b.branch_horizon = cfg.number("branch-horizon", b.branch_horizon);
  b.branch_cap = cfg.count("cap", b.branch_cap);
  b.branch_replicas = cfg.count("branch-replicas", b.branch_replicas);
  b.branch = b.branch_replicas > 0;
  const auto results = cross_method_report(model, b, *cfg.seed);
  CsvWriter csv({"method", "tv_to_oracle", "status"});
  MethodOutput out;
  json runtimes = json::object();
  for (const auto& r : results) {
    csv.row(r.method, r.tv_to_oracle ? format_double(*r.tv_to_oracle) : std::string(""),
            r.status.find(',') == std::string::npos ? r.status : "\"" + r.status + "\"");
    runtimes[r.method] = r.runtime_seconds;
  }
  out.csv = csv.str();
  out.facts["runtime_seconds"] = runtimes;
  return out;
}

}  // namespace

RunRecord run_config(const ExperimentConfig& cfg, const std::string& out_dir) {
  validate_config(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const AbsorbedChainModel model = model_from_spec(cfg.model);
  MethodOutput out;
  try {
    if (cfg.method == "oracle") out = run_oracle(cfg, model);
    else if (cfg.method == "conditioned") out = run_conditioned(cfg, model);
    else if (cfg.method == "fv") out = run_fv(cfg, model);
    else if (cfg.method == "phi") out = run_phi(cfg, model);
    else if (cfg.method == "afp") out = run_afp(cfg, model);
    else if (cfg.method == "branch") out = run_branch(cfg, model);
    else if (cfg.method == "couple") out = run_couple(cfg, model);
    else if (cfg.method == "scan") out = run_scan(cfg, model);
    else out = run_report(cfg, model);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfigInvalid) throw;
    throw Error(e.code(), cfg.method + " on " + cfg.model + ": " + e.detail());
  }

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  RunRecord rec;
  auto emit = [&](const std::string& ext, const std::string& body) {
    const std::string path = (dir / (cfg.stem() + ext)).string();
    write_file_atomic(path, body);
    rec.data_files.push_back(path);
  };
  if (out.csv) emit(".csv", *out.csv);
  if (out.data) emit(".json", out.data->dump(2) + "\n");
  if (out.plot) emit(".gp", *out.plot);
  rec.wall_seconds = seconds_since(t0);

  json summary = out.facts;
  summary["method"] = cfg.method;
  summary["model"] = cfg.model;
  summary["seed"] = *cfg.seed;
  summary["replicas"] = cfg.replicas;
  summary["workers"] = worker_count();
  summary["wall_seconds"] = rec.wall_seconds;
  summary["finished_at_unix"] =
      std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
  json files = json::array();
  for (const auto& f : rec.data_files) files.push_back(std::filesystem::path(f).filename().string());
  summary["files"] = files;
  summary["config"] = emit_config(cfg);
  rec.summary_file = (dir / (cfg.stem() + ".summary.json")).string();
  write_file_atomic(rec.summary_file, summary.dump(2) + "\n");
  return rec;
}

}  // namespace qsd
