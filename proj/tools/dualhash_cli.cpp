// Experiment runner: run / compare / verify.
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dualhash/experiment.hpp"

namespace fs = std::filesystem;
using namespace dualhash;

namespace {

constexpr int exit_config = 2;
constexpr int exit_aborted = 3;

void write_file(const fs::path &path, const std::string &text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

ExperimentConfig load_config(const std::string &path) {
  ExperimentConfig cfg = path.empty() ? ExperimentConfig{} : ExperimentConfig::load(path);
  apply_env_overrides(cfg);
  return cfg;
}

int cmd_run(const std::string &config, std::optional<std::uint64_t> seed,
            const std::string &out, unsigned) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(config);
    if (seed) cfg.seed = *seed;
    if (!out.empty()) cfg.out_dir = out;
    cfg.validate();
  } catch (const config_error &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config;
  }
  const RunOutcome o = run_experiment(cfg, cfg.seed);
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  write_file(dir / "config.json", cfg.to_json());
  write_file(dir / "diagnostics.csv", diagnostics_csv(o.records));
  write_file(dir / "report.json", outcome_json(o, cfg));
  if (o.report) {
    write_file(dir / "topk.csv", o.report->topk_csv());
    write_file(dir / "pr.csv", o.report->pr_csv());
    write_file(dir / "hamming.csv", o.report->histogram_csv());
  }
  if (o.aborted) {
    std::cerr << o.abort_reason << "\n";
    return exit_aborted;
  }
  std::cout << cfg.variant << " seed " << cfg.seed << ": mAP " << o.report->map
            << ", AP@r2 " << o.report->ap_at_r2 << ", quant " << o.report->quant_error
            << " (" << o.iterations << " iterations)\n";
  return 0;
}

int cmd_compare(const std::vector<std::string> &configs, const std::string &seeds,
                const std::string &out, unsigned threads) {
  std::vector<std::pair<std::string, ExperimentConfig>> cfgs;
  try {
    if (configs.size() < 2) throw config_error("compare: need at least two configs");
    for (const auto &path : configs) {
      auto cfg = load_config(path);
      if (!seeds.empty()) {
        cfg.seeds.clear();
        std::stringstream ss(seeds);
        for (std::string tok; std::getline(ss, tok, ',');) cfg.seeds.push_back(std::stoull(tok));
      }
      cfg.validate();
      cfgs.emplace_back(fs::path(path).stem().string(), cfg);
    }
  } catch (const config_error &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config;
  } catch (const std::logic_error &e) {
    std::cerr << "config error: --seeds: " << e.what() << "\n";
    return exit_config;
  }
  const auto rows = compare(cfgs, threads);
  const std::string table = compare_csv(rows);
  if (out.empty()) {
    std::cout << table;
  } else {
    if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
    write_file(out, table);
  }
  for (const auto &r : rows)
    if (r.failures) return 1;
  return 0;
}

int cmd_verify(const std::string &config, bool mutate_prox) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(config);
  } catch (const config_error &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config;
  }
  prox_conj_fn hook;
  if (mutate_prox) {
    // upper clamp branch dropped: a deliberately broken prox for self-checks
    hook = [](double y, double tau, double lambda) {
      if (y > lambda + tau) return y - tau;
      return WRegularizer<>(lambda).prox_conj(y, tau);
    };
  }
  bool all = true;
  for (const auto &s : verify_suites(cfg, hook)) {
    nlohmann::json j{{"suite", s.suite}, {"pass", s.pass}, {"detail", s.detail}};
    std::cout << j.dump() << "\n";
    all = all && s.pass;
  }
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"DualHash experiment runner"};
  app.require_subcommand(1);
  unsigned threads = 1;
  app.add_option("--threads", threads, "worker threads for compare")->check(CLI::PositiveNumber);

  auto *run = app.add_subcommand("run", "train one configuration and write logs");
  std::string run_config, run_out;
  std::optional<std::uint64_t> run_seed;
  run->add_option("--config", run_config, "config file (JSON)");
  run->add_option("--seed", run_seed, "override the config seed");
  run->add_option("--out", run_out, "output directory");

  auto *cmp = app.add_subcommand("compare", "run configurations over their seeds");
  std::vector<std::string> cmp_configs;
  std::string cmp_seeds, cmp_out;
  cmp->add_option("--config", cmp_configs, "config files")->required();
  cmp->add_option("--seeds", cmp_seeds, "comma separated seed list for every config");
  cmp->add_option("--out", cmp_out, "CSV output path (stdout if omitted)");
  cmp->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  auto *ver = app.add_subcommand("verify", "run the oracle suites");
  std::string ver_config;
  bool mutate = false;
  ver->add_option("--config", ver_config, "config whose lambda/tau/gamma are checked");
  ver->add_flag("--mutate-prox", mutate, "use a broken prox (suite self-check)")->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e) == 0 ? 0 : exit_config;
  }
  try {
    if (run->parsed()) return cmd_run(run_config, run_seed, run_out, threads);
    if (cmp->parsed()) return cmd_compare(cmp_configs, cmp_seeds, cmp_out, threads);
    if (ver->parsed()) return cmd_verify(ver_config, mutate);
  } catch (const config_error &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
