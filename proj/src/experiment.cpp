#include "dualhash/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace dualhash {

using nlohmann::json;

namespace {

const char *const variants[] = {"dualhash-stom", "dualhash-storm", "sgdm", "spgd-wcr", "dhn"};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

void require(bool ok, const std::string &field, const std::string &msg) {
  if (!ok) throw config_error(field + ": " + msg);
}

json section_dataset(const DatasetConfig &d) {
  return {{"kind", d.kind},           {"classes", d.classes},
          {"per_class", d.per_class}, {"samples", d.samples},
          {"dim", d.dim},             {"spread", d.spread},
          {"radius", d.radius},       {"queries_per_class", d.queries_per_class},
          {"pairs", d.pairs},         {"pairs_per_anchor", d.pairs_per_anchor},
          {"standardize", d.standardize}};
}

json section_model(const ModelConfig &m) {
  return {{"hidden", m.hidden}, {"bits", m.bits}, {"output", m.output}};
}

json section_hyper(const HyperConfig &h) {
  return {{"gamma", h.gamma}, {"lambda", h.lambda}, {"tau", h.tau},
          {"alpha_loss", h.alpha_loss}, {"eta", h.eta}, {"alpha", h.alpha},
          {"beta", h.beta}, {"rho", h.rho}, {"batch", h.batch}, {"b1", h.b1},
          {"T", h.T}, {"lipschitz", h.lipschitz}, {"delta", h.delta}, {"nu", h.nu}};
}

json to_tree(const ExperimentConfig &c) {
  return {{"dataset", section_dataset(c.dataset)},
          {"model", section_model(c.model)},
          {"variant", c.variant},
          {"hyper", section_hyper(c.hyper)},
          {"seed", c.seed},
          {"seeds", c.seeds},
          {"out_dir", c.out_dir},
          {"log_every", c.log_every}};
}

// Reads j[key] into out when present; type mismatches name the field.
template <typename T>
void read(const json &j, const std::string &section, const char *key, T &out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  const std::string field = section.empty() ? key : section + "." + key;
  try {
    if constexpr (std::is_same_v<T, double>) {
      require(it->is_number(), field, "expected a number");
    } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      require(it->is_number_integer() && it->template get<long long>() >= 0, field,
              "expected a non-negative integer");
    } else if constexpr (std::is_same_v<T, bool>) {
      require(it->is_boolean(), field, "expected true or false");
    } else if constexpr (std::is_same_v<T, std::string>) {
      require(it->is_string(), field, "expected a string");
    }
    out = it->template get<T>();
  } catch (const json::exception &e) {
    throw config_error(field + ": " + e.what());
  }
}

void check_keys(const json &j, const std::string &section,
                std::initializer_list<const char *> keys) {
  require(j.is_object(), section.empty() ? "config" : section, "expected an object");
  for (const auto &[k, v] : j.items()) {
    bool known = false;
    for (auto key : keys) known = known || k == key;
    require(known, section.empty() ? k : section + "." + k, "unknown key");
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  const auto &d = dataset;
  require(d.kind == "gaussian" || d.kind == "multilabel", "dataset.kind",
          "must be gaussian or multilabel");
  require(d.classes >= 2 && d.classes <= 64, "dataset.classes", "must lie in [2, 64]");
  require(d.dim >= 1, "dataset.dim", "must be >= 1");
  require(d.spread >= 0.0, "dataset.spread", "must be >= 0");
  require(d.radius > 0.0, "dataset.radius", "must be > 0");
  if (d.kind == "gaussian")
    require(d.per_class >= d.queries_per_class + 2, "dataset.per_class",
            "must leave >= 2 training samples per class after queries");
  else
    require(d.samples >= 2 * d.classes, "dataset.samples", "must be >= 2 * classes");
  require(d.pairs == "all" || d.pairs == "sampled", "dataset.pairs", "must be all or sampled");
  if (d.pairs == "sampled")
    require(d.pairs_per_anchor >= 1, "dataset.pairs_per_anchor", "must be >= 1");
  require(model.bits >= 1, "model.bits", "must be >= 1");
  for (auto w : model.hidden) require(w >= 1, "model.hidden", "widths must be >= 1");
  require(model.output == "tanh" || model.output == "identity", "model.output",
          "must be tanh or identity");
  bool known = false;
  for (auto v : variants) known = known || variant == v;
  require(known, "variant",
          "must be one of dualhash-stom, dualhash-storm, sgdm, spgd-wcr, dhn");
  const auto &h = hyper;
  require(h.gamma > 0.0, "hyper.gamma", "must be > 0");
  require(h.lambda > 0.0, "hyper.lambda", "must be > 0");
  require(h.tau > 0.0, "hyper.tau", "must be > 0");
  require(h.alpha_loss > 0.0 && h.alpha_loss <= 1.0, "hyper.alpha_loss", "must lie in (0, 1]");
  require(h.eta > 0.0, "hyper.eta", "must be > 0");
  require(h.alpha >= 0.0 && h.alpha < 1.0, "hyper.alpha", "must lie in [0, 1)");
  require(h.beta >= 0.0 && h.beta < 1.0, "hyper.beta", "must lie in [0, 1)");
  require(h.rho > 0.0, "hyper.rho", "must be > 0");
  require(h.batch >= 1, "hyper.batch", "must be >= 1");
  require(h.b1 >= 1, "hyper.b1", "must be >= 1");
  require(h.T >= 1, "hyper.T", "must be >= 1");
  require(h.lipschitz >= 0.0, "hyper.lipschitz", "must be >= 0 (0 = estimate)");
  require(h.delta > 0.0, "hyper.delta", "must be > 0");
  require(h.nu > 0.0, "hyper.nu", "must be > 0");
  if (variant == "spgd-wcr")
    require(2.0 * h.lambda * h.tau < 1.0, "hyper.tau", "spgd-wcr needs 2 * lambda * tau < 1");
  if (variant == "dualhash-storm") {
    const double t13 = std::cbrt(double(h.T));
    const double rho_k = 8.0 * h.rho * h.eta * h.eta / (t13 * t13);
    require(rho_k <= 1.0, "hyper.rho",
            "rho_k = 8 rho eta^2 / T^(2/3) = " + std::to_string(rho_k) + " exceeds 1");
  }
  require(!seeds.empty(), "seeds", "must not be empty");
}

std::string ExperimentConfig::to_json() const { return to_tree(*this).dump(2) + "\n"; }

ExperimentConfig ExperimentConfig::from_json(const std::string &text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error &e) {
    throw config_error(std::string("config: not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  check_keys(j, "", {"dataset", "model", "variant", "hyper", "seed", "seeds", "out_dir",
                     "log_every"});
  if (j.contains("dataset")) {
    const auto &d = j["dataset"];
    check_keys(d, "dataset", {"kind", "classes", "per_class", "samples", "dim", "spread",
                              "radius", "queries_per_class", "pairs", "pairs_per_anchor",
                              "standardize"});
    auto &o = c.dataset;
    read(d, "dataset", "kind", o.kind);
    read(d, "dataset", "classes", o.classes);
    read(d, "dataset", "per_class", o.per_class);
    read(d, "dataset", "samples", o.samples);
    read(d, "dataset", "dim", o.dim);
    read(d, "dataset", "spread", o.spread);
    read(d, "dataset", "radius", o.radius);
    read(d, "dataset", "queries_per_class", o.queries_per_class);
    read(d, "dataset", "pairs", o.pairs);
    read(d, "dataset", "pairs_per_anchor", o.pairs_per_anchor);
    read(d, "dataset", "standardize", o.standardize);
  }
  if (j.contains("model")) {
    const auto &m = j["model"];
    check_keys(m, "model", {"hidden", "bits", "output"});
    if (m.contains("hidden")) {
      require(m["hidden"].is_array(), "model.hidden", "expected a list of widths");
      c.model.hidden.clear();
      for (const auto &w : m["hidden"]) {
        require(w.is_number_integer() && w.get<long long>() > 0, "model.hidden",
                "widths must be positive integers");
        c.model.hidden.push_back(w.get<std::size_t>());
      }
    }
    read(m, "model", "bits", c.model.bits);
    read(m, "model", "output", c.model.output);
  }
  read(j, "", "variant", c.variant);
  if (j.contains("hyper")) {
    const auto &h = j["hyper"];
    check_keys(h, "hyper", {"gamma", "lambda", "tau", "alpha_loss", "eta", "alpha", "beta",
                            "rho", "batch", "b1", "T", "lipschitz", "delta", "nu"});
    auto &o = c.hyper;
    read(h, "hyper", "gamma", o.gamma);
    read(h, "hyper", "lambda", o.lambda);
    read(h, "hyper", "tau", o.tau);
    read(h, "hyper", "alpha_loss", o.alpha_loss);
    read(h, "hyper", "eta", o.eta);
    read(h, "hyper", "alpha", o.alpha);
    read(h, "hyper", "beta", o.beta);
    read(h, "hyper", "rho", o.rho);
    read(h, "hyper", "batch", o.batch);
    read(h, "hyper", "b1", o.b1);
    read(h, "hyper", "T", o.T);
    read(h, "hyper", "lipschitz", o.lipschitz);
    read(h, "hyper", "delta", o.delta);
    read(h, "hyper", "nu", o.nu);
  }
  read(j, "", "seed", c.seed);
  if (j.contains("seeds")) {
    require(j["seeds"].is_array(), "seeds", "expected a list of integers");
    c.seeds.clear();
    for (const auto &s : j["seeds"]) {
      require(s.is_number_integer() && s.get<long long>() >= 0, "seeds",
              "entries must be non-negative integers");
      c.seeds.push_back(s.get<std::uint64_t>());
    }
  }
  read(j, "", "out_dir", c.out_dir);
  read(j, "", "log_every", c.log_every);
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw config_error("config: cannot read " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return from_json(ss.str());
}

void apply_env_overrides(
    ExperimentConfig &cfg,
    const std::function<std::optional<std::string>(const std::string &)> &getenv) {
  json tree = to_tree(cfg);
  auto upper = [](std::string s) {
    for (auto &ch : s) ch = char(std::toupper(static_cast<unsigned char>(ch)));
    return s;
  };
  auto parse_leaf = [&](json &leaf, const std::string &field, const std::string &raw) {
    try {
      if (leaf.is_boolean()) {
        require(raw == "true" || raw == "false" || raw == "1" || raw == "0", field,
                "expected true or false");
        leaf = raw == "true" || raw == "1";
      } else if (leaf.is_number_float()) {
        leaf = std::stod(raw);
      } else if (leaf.is_number()) {
        require(!raw.empty() && raw[0] != '-', field, "expected a non-negative integer");
        leaf = std::stoull(raw);
      } else if (leaf.is_array()) {
        json arr = json::array();
        std::stringstream ss(raw);
        for (std::string tok; std::getline(ss, tok, ',');) arr.push_back(std::stoull(tok));
        leaf = arr;
      } else {
        leaf = raw;
      }
    } catch (const std::logic_error &) {
      throw config_error(field + ": cannot parse environment value '" + raw + "'");
    }
  };
  for (auto &[key, val] : tree.items()) {
    if (val.is_object()) {
      for (auto &[sub, leaf] : val.items()) {
        const auto name = std::string(env_prefix) + upper(key) + "_" + upper(sub);
        if (auto raw = getenv(name)) parse_leaf(leaf, key + "." + sub, *raw);
      }
    } else {
      const auto name = std::string(env_prefix) + upper(key);
      if (auto raw = getenv(name)) parse_leaf(val, key, *raw);
    }
  }
  cfg = ExperimentConfig::from_json(tree.dump());
}

void apply_env_overrides(ExperimentConfig &cfg) {
  apply_env_overrides(cfg, [](const std::string &name) -> std::optional<std::string> {
    const char *v = std::getenv(name.c_str());
    if (!v) return std::nullopt;
    return std::string(v);
  });
}

Experiment build_experiment(const ExperimentConfig &cfg, std::uint64_t seed) {
  cfg.validate();
  const Rng root(seed);
  Rng data_rng = root.split(1), init_rng = root.split(2), pair_rng = root.split(3);
  const auto &d = cfg.dataset;
  Dataset ds = d.kind == "gaussian"
                   ? gen_gaussian_clusters(data_rng, d.classes, d.per_class, d.dim,
                                           d.spread, d.radius)
                   : gen_multilabel_clusters(data_rng, d.classes, d.samples, d.dim,
                                             d.spread, d.radius);
  split_queries(ds, d.queries_per_class, data_rng);
  if (d.standardize) standardize(ds);
  ds.validate();
  auto train = ds.rows(split_tag::train);
  auto query = ds.rows(split_tag::query);
  auto pairs = build_pairs(ds, train,
                           d.pairs == "all" ? pair_mode::all : pair_mode::sampled,
                           d.pairs_per_anchor, pair_rng);
  MlpSpec spec;
  spec.layer_widths = {d.dim};
  for (auto w : cfg.model.hidden) spec.layer_widths.push_back(w);
  spec.layer_widths.push_back(cfg.model.bits);
  spec.output = cfg.model.output == "tanh" ? output_activation::tanh
                                           : output_activation::identity;
  Mat inputs(Eigen::Index(train.size()), Eigen::Index(d.dim));
  for (std::size_t r = 0; r < train.size(); ++r)
    inputs.row(Eigen::Index(r)) = ds.features.row(Eigen::Index(train[r]));
  Mat qin(Eigen::Index(query.size()), Eigen::Index(d.dim));
  for (std::size_t r = 0; r < query.size(); ++r)
    qin.row(Eigen::Index(r)) = ds.features.row(Eigen::Index(query[r]));
  HashingProblem problem(std::move(inputs), spec,
                         PairwiseLossSpec{cfg.hyper.alpha_loss, std::move(pairs)},
                         cfg.hyper.gamma, cfg.hyper.lambda);
  Vec x0 = problem.net().init_params(init_rng);
  return {std::move(ds), std::move(train), std::move(query), std::move(problem),
          std::move(x0), std::move(qin)};
}

RunOutcome run_experiment(const ExperimentConfig &cfg, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  Experiment ex = build_experiment(cfg, seed);
  const auto &p = ex.problem;
  const auto &h = cfg.hyper;
  RunOutcome out;
  out.variant = cfg.variant;
  out.seed = seed;
  const std::uint64_t solver_seed = Rng(seed).split(4).next_u64();

  Rng est_rng = Rng(seed).split(5);
  const auto probe = sample_indices(est_rng, p.n(), std::min<std::size_t>(64, p.n()));
  const double L_hat = estimate_lipschitz(p, ex.x0, p.outputs(ex.x0), probe, est_rng);
  const double L = h.lipschitz > 0.0 ? h.lipschitz : L_hat;
  out.lipschitz = L;

  if (cfg.variant == "dualhash-stom" || cfg.variant == "dualhash-storm") {
    RunOptions opt;
    opt.variant = cfg.variant == "dualhash-stom" ? solver_variant::stom : solver_variant::storm;
    opt.stom = {h.eta, h.alpha, h.beta, h.tau, h.batch, L};
    opt.storm = {h.eta, h.rho, h.tau, h.b1, h.batch, h.T, L};
    opt.T = h.T;
    opt.seed = solver_seed;
    opt.log_every = cfg.log_every;
    const double eta_k = opt.variant == solver_variant::stom ? opt.stom.step()
                                                             : opt.storm.eta_k();
    opt.lyapunov.emplace(L_hat, h.tau, eta_k, h.alpha, h.beta, h.delta, h.nu);
    out.lyapunov_positive = opt.lyapunov->positive();
    RunResult r = run(p, ex.x0, opt);
    out.records = std::move(r.records);
    out.iterations = r.iterations;
    out.aborted = r.aborted;
    out.abort_reason = r.abort_reason;
    out.x = r.state.x;
  } else {
    BaselineParams prm;
    prm.eta = h.eta / L;
    prm.momentum = h.alpha;
    prm.batch = h.batch;
    prm.reg_weight = h.lambda;
    prm.tau = h.tau;
    prm.T = h.T;
    prm.seed = solver_seed;
    prm.log_every = cfg.log_every;
    const auto kind = cfg.variant == "sgdm"       ? baseline_kind::sgdm
                      : cfg.variant == "spgd-wcr" ? baseline_kind::spgd_wcr
                                                  : baseline_kind::dhn;
    BaselineResult r = run_baseline(p, kind, ex.x0, prm);
    out.records = std::move(r.records);
    out.iterations = r.iterations;
    out.aborted = r.aborted;
    out.abort_reason = r.abort_reason;
    out.x = r.x;
  }
  if (!out.aborted) {
    std::vector<label_mask> ql, dl;
    for (auto i : ex.query_rows) ql.push_back(ex.data.labels[i]);
    for (auto i : ex.train_rows) dl.push_back(ex.data.labels[i]);
    out.report = evaluate_retrieval(p.net().forward(out.x, ex.query_inputs), ql,
                                    p.outputs(out.x), dl);
  }
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

std::string diagnostics_csv(const std::vector<DiagnosticsRecord> &rows) {
  std::ostringstream os;
  os.precision(17);
  os << "iteration,lagrangian,psi,dx_sq,dB_sq,dLam_sq,stationarity,quant_error,sigma2,"
        "lambda_inf,membership\n";
  auto cell = [&](double v) {
    os << ',';
    if (!std::isnan(v)) os << v;
  };
  for (const auto &r : rows) {
    os << r.iter;
    cell(r.lagrangian);
    cell(r.psi);
    cell(r.dx_sq);
    cell(r.dB_sq);
    cell(r.dLam_sq);
    cell(r.stationarity());
    cell(r.quant_error);
    cell(r.sigma2);
    cell(r.lambda_inf);
    cell(r.membership);
    os << '\n';
  }
  return os.str();
}

std::string outcome_json(const RunOutcome &o, const ExperimentConfig &cfg) {
  json j = o.report ? json::parse(o.report->to_json()) : json::object();
  j["variant"] = o.variant;
  j["seed"] = o.seed;
  j["iterations"] = o.iterations;
  j["aborted"] = o.aborted;
  if (o.aborted) j["abort_reason"] = o.abort_reason;
  j["lipschitz"] = o.lipschitz;
  j["lyapunov_positive"] = o.lyapunov_positive;
  j["wall_seconds"] = o.wall_seconds;
  j["config"] = to_tree(cfg);
  return j.dump(2) + "\n";
}

std::vector<CompareRow> compare(
    const std::vector<std::pair<std::string, ExperimentConfig>> &cfgs, unsigned threads) {
  struct Job {
    std::size_t cfg;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < cfgs.size(); ++c)
    for (auto s : cfgs[c].second.seeds) jobs.push_back({c, s});
  std::vector<std::optional<RetrievalReport>> results(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < jobs.size();) {
      try {
        auto o = run_experiment(cfgs[jobs[i].cfg].second, jobs[i].seed);
        if (!o.aborted) results[i] = std::move(o.report);
      } catch (const std::exception &) {
        // counted as a failure below
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < std::max(1u, threads); ++t) pool.emplace_back(worker);
  worker();
  for (auto &t : pool) t.join();

  std::vector<CompareRow> rows;
  for (std::size_t c = 0; c < cfgs.size(); ++c) {
    CompareRow row;
    row.label = cfgs[c].first;
    row.variant = cfgs[c].second.variant;
    std::vector<double> m, a, q;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (jobs[i].cfg != c) continue;
      ++row.runs;
      if (!results[i]) {
        ++row.failures;
        continue;
      }
      m.push_back(results[i]->map);
      a.push_back(results[i]->ap_at_r2);
      q.push_back(results[i]->quant_error);
    }
    auto stats = [](const std::vector<double> &v, double &mean, double &sd) {
      mean = sd = 0.0;
      if (v.empty()) {
        mean = sd = std::nan("");
        return;
      }
      for (double e : v) mean += e;
      mean /= double(v.size());
      if (v.size() < 2) return;
      for (double e : v) sd += (e - mean) * (e - mean);
      sd = std::sqrt(sd / double(v.size() - 1));
    };
    stats(m, row.map_mean, row.map_std);
    stats(a, row.apr2_mean, row.apr2_std);
    stats(q, row.quant_mean, row.quant_std);
    rows.push_back(row);
  }
  return rows;
}

std::string compare_csv(const std::vector<CompareRow> &rows) {
  std::ostringstream os;
  os.precision(10);
  os << "config,variant,runs,failures,map_mean,map_std,apr2_mean,apr2_std,quant_mean,"
        "quant_std\n";
  for (const auto &r : rows)
    os << r.label << ',' << r.variant << ',' << r.runs << ',' << r.failures << ','
       << r.map_mean << ',' << r.map_std << ',' << r.apr2_mean << ',' << r.apr2_std << ','
       << r.quant_mean << ',' << r.quant_std << '\n';
  return os.str();
}

namespace {

SuiteResult prox_suite(const prox_conj_fn &hook) {
  SuiteResult r{"prox-oracle", true, ""};
  Rng rng(2024);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const double tau = rng.uniform(1e-3, 1.0), lambda = rng.uniform(1e-3, 1.0);
    const double y = rng.uniform(-2.0, 2.0);
    const WRegularizer<> reg(lambda);
    const double pc = hook ? hook(y, tau, lambda) : reg.prox_conj(y, tau);
    const double oc = prox_oracle(
        [&](double v) {
          return std::abs(v) <= lambda ? std::abs(v) : std::numeric_limits<double>::infinity();
        },
        y, tau);
    const double ph = reg.prox(y, tau);
    const double oh = prox_oracle([&](double v) { return reg.value(v); }, y, tau);
    worst = std::max({worst, std::abs(pc - oc), std::abs(ph - oh)});
  }
  // the worked table at lambda = 0.05, tau = 0.01
  const WRegularizer<> reg(0.05);
  const double table[][2] = {{0.07, 0.05}, {0.03, 0.02}, {0.005, 0.0}, {-0.07, -0.05}};
  for (const auto &row : table) {
    const double got = hook ? hook(row[0], 0.01, 0.05) : reg.prox_conj(row[0], 0.01);
    if (std::abs(got - row[1]) > 1e-15) r.pass = false;
  }
  if (worst > 1e-6) r.pass = false;
  r.detail = "max |prox - oracle| = " + sci(worst);
  return r;
}

SuiteResult gradient_suite() {
  SuiteResult r{"gradient-check", true, ""};
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    Rng rng(100 + s);
    const std::size_t n = 6;
    Mat A(Eigen::Index(n), 3);
    for (auto &v : A.reshaped()) v = rng.normal();
    std::vector<Pair> pairs;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) pairs.push_back({i, j, int((i + j) % 2)});
    HashingProblem p(A, MlpSpec{{3, 5, 4}, output_activation::tanh},
                     PairwiseLossSpec{0.7, pairs}, 2.0, 0.1);
    const Vec x = p.net().init_params(rng);
    Mat B(Eigen::Index(n), 4);
    for (auto &v : B.reshaped()) v = rng.normal();
    const Vec g = p.grad_x_F(x, B);
    const double h = 1e-6;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      Vec xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      const double fd = (p.F_value(xp, B) - p.F_value(xm, B)) / (2 * h);
      worst = std::max(worst, std::abs(fd - g[k]) / std::max(1e-3, std::abs(fd)));
    }
  }
  r.pass = worst < 1e-5;
  r.detail = "max relative error = " + sci(worst);
  return r;
}

SuiteResult kkt_suite() {
  SuiteResult r{"kkt-construction", false, ""};
  const auto toy = make_kkt_toy();
  const auto st = stationarity(toy.problem, toy.point.x, toy.point.B, toy.point.Lambda);
  r.pass = st.total() < 1e-10;
  std::ostringstream os;
  os << "stationarity = " << st.total();
  r.detail = os.str();
  return r;
}

SuiteResult positivity_suite(const ExperimentConfig &cfg) {
  SuiteResult r{"lyapunov-positivity", false, ""};
  try {
    require(cfg.hyper.lambda > 0.0, "hyper.lambda", "must be > 0");
    require(cfg.hyper.gamma > 0.0, "hyper.gamma", "must be > 0");
    require(cfg.hyper.tau > 0.0, "hyper.tau", "must be > 0");
    ExperimentConfig small = cfg;
    small.validate();
    Experiment ex = build_experiment(small, small.seed);
    Rng rng(7);
    const auto probe = sample_indices(rng, ex.problem.n(), std::min<std::size_t>(64, ex.problem.n()));
    const double L = estimate_lipschitz(ex.problem, ex.x0, ex.problem.outputs(ex.x0), probe, rng);
    // analysis-regime parameters for this smoothness estimate
    const double a = 0.2, b = 0.2;
    const double tau = std::min(cfg.hyper.tau, 0.5 * LyapunovConfig::tau_max(L, cfg.hyper.delta));
    const double eta = LyapunovConfig::theory_eta(L, tau, a, b, cfg.hyper.delta, cfg.hyper.nu);
    const LyapunovConfig lc(L, tau, eta / L, a, b, cfg.hyper.delta, cfg.hyper.nu);
    std::string why;
    r.pass = lc.positive(&why);
    const LyapunovConfig as_configured(L, cfg.hyper.tau, cfg.hyper.eta / L, cfg.hyper.alpha,
                                       cfg.hyper.beta, cfg.hyper.delta, cfg.hyper.nu);
    std::string why_cfg;
    const bool cfg_ok = as_configured.positive(&why_cfg);
    std::ostringstream os;
    os << "L_F ~ " << L << ", C_B = " << lc.C_B << ", C_x = " << lc.C_x
       << (r.pass ? "" : " (" + why + ")") << "; configured (tau, alpha, beta) "
       << (cfg_ok ? "inside" : "outside") << " the analysis region"
       << (cfg_ok ? "" : " (" + why_cfg + ")");
    r.detail = os.str();
  } catch (const std::exception &e) {
    r.pass = false;
    r.detail = e.what();
  }
  return r;
}

}  // namespace

std::vector<SuiteResult> verify_suites(const ExperimentConfig &cfg, const prox_conj_fn &prox) {
  std::vector<SuiteResult> out;
  out.push_back(prox_suite(prox));
  out.push_back(gradient_suite());
  out.push_back(kkt_suite());
  out.push_back(positivity_suite(cfg));
  return out;
}

}  // namespace dualhash
