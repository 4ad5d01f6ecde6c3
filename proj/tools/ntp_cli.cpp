// Command-line front end: generate, run, diagnose, sweep.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ntp/experiment.hpp"
#include "ntp/text.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct Options {
  std::vector<std::string> configs;
  std::size_t jobs = 0;
  std::string out;
  std::optional<std::uint64_t> seed;
};

ntp::ExperimentConfig load(const std::string& path, const Options& opt) {
  auto cfg = ntp::load_config(path);
  if (opt.seed) cfg.seed = *opt.seed;
  return cfg;
}

std::filesystem::path out_dir(const ntp::ExperimentConfig& cfg, const Options& opt) {
  return opt.out.empty() ? std::filesystem::path(cfg.output) : std::filesystem::path(opt.out);
}

std::size_t jobs(const Options& opt) {
  if (opt.jobs > 0) return opt.jobs;
  return std::max(1u, std::thread::hardware_concurrency());
}

void print_aggregate(const std::string& label, const ntp::Aggregate& a) {
  std::cout << label << " runs=" << a.runs << " recall=" << ntp::format_double(a.recall_mean)
            << " recall_std=" << ntp::format_double(a.recall_std)
            << " pr_auc=" << (a.pr_auc ? ntp::format_double(*a.pr_auc) : "undefined")
            << " mrr=" << ntp::format_double(a.mrr_mean) << " roc_auc=" << ntp::format_double(a.roc_auc_mean) << '\n';
}

void add_common(CLI::App* cmd, Options& opt, bool many_configs) {
  if (many_configs) {
    cmd->add_option("--config", opt.configs, "Config file(s)")->required();
  } else {
    cmd->add_option("--config", opt.configs, "Config file")->required()->expected(1);
  }
  cmd->add_option("--jobs", opt.jobs, "Parallel runs (default: available cores)");
  cmd->add_option("--out", opt.out, "Output directory (default: [experiment] output)");
  cmd->add_option_function<std::uint64_t>("--seed", [&opt](const std::uint64_t& s) { opt.seed = s; },
                                          "Base seed override");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic-data rule learning lab for neural theorem provers"};
  app.require_subcommand(1);
  Options opt;
  auto* gen = app.add_subcommand("generate", "Write one dataset (train.facts, test.facts, relations.txt, gen_meta)");
  auto* run = app.add_subcommand("run", "Generate, train and evaluate [experiment] runs");
  auto* diag = app.add_subcommand("diagnose", "Initialization-ratio sweep with score traces");
  auto* sweep = app.add_subcommand("sweep", "Grid over [sweep] keys for one or more configs");
  add_common(gen, opt, false);
  add_common(run, opt, false);
  add_common(diag, opt, false);
  add_common(sweep, opt, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (gen->parsed()) {
      const auto cfg = load(opt.configs.front(), opt);
      const auto dir = out_dir(cfg, opt);
      ntp::run_generate(cfg, dir);
      std::cout << "dataset written to " << dir.string() << '\n';
    } else if (run->parsed()) {
      const auto cfg = load(opt.configs.front(), opt);
      const auto dir = out_dir(cfg, opt);
      const auto records = ntp::run_experiment(cfg, dir, jobs(opt));
      print_aggregate(dir.string(), ntp::aggregate(records, cfg.pr_auc_mode));
    } else if (diag->parsed()) {
      const auto cfg = load(opt.configs.front(), opt);
      const auto dir = out_dir(cfg, opt);
      for (const auto& row : ntp::run_diagnose(cfg, dir, jobs(opt))) {
        print_aggregate("ratio=" + ntp::format_double(row.ratio), row.aggregate);
        std::cout << "  learned_runs=" << row.learned_runs
                  << " correlation=" << ntp::format_double(row.correlation) << '\n';
      }
    } else if (sweep->parsed()) {
      std::vector<ntp::ExperimentConfig> configs;
      std::vector<std::string> names;
      for (const auto& path : opt.configs) {
        configs.push_back(load(path, opt));
        names.push_back(std::filesystem::path(path).stem().string());
      }
      const std::filesystem::path dir = opt.out.empty() ? std::filesystem::path("sweep_out") : std::filesystem::path(opt.out);
      for (const auto& e : ntp::run_sweep(configs, names, dir, jobs(opt))) {
        std::string label = e.config_name + "#" + std::to_string(e.point);
        for (const auto& [k, v] : e.overrides) label += " " + k + "=" + v;
        print_aggregate(label, e.aggregate);
      }
    }
  } catch (const ntp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
