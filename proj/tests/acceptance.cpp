// Acceptance checks: one PASS/FAIL line per criterion, exit status 0 only
// when every selected criterion passes.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "ntp/experiment.hpp"
#include "support.hpp"

using namespace ntp;
using namespace ntp::testing;

namespace {

namespace fs = std::filesystem;

struct Options {
  std::size_t runs = 50;
  std::size_t jobs = 1;
  std::set<std::string> only;
  fs::path out = "acceptance_out";
};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

class Sweeps {
 public:
  explicit Sweeps(const Options& opt) : opt_(opt) {}

  // Preset plus "section.key" overrides, cached by name.
  const std::vector<RunRecord>& get(const std::string& name, const std::string& preset,
                                    const std::vector<std::pair<std::string, std::string>>& overrides) {
    if (auto it = cache_.find(name); it != cache_.end()) return it->second;
    auto cfg = load_config(fs::path(NTP_SOURCE_DIR) / "configs" / preset);
    for (const auto& [key, value] : overrides) set_config_value(cfg, key, value);
    cfg.runs = opt_.runs;
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    auto records = execute_runs(cfg, opt_.jobs);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_run_outputs(opt_.out / name, cfg, records);
    const auto agg = aggregate(records, cfg.pr_auc_mode);
    std::fprintf(stderr, "  [%s] %zu runs in %.0fs: recall %.3f (std %.3f) mrr %.3f roc %.3f pr_auc %s\n", name.c_str(),
                 records.size(), secs, agg.recall_mean, agg.recall_std, agg.mrr_mean, agg.roc_auc_mean,
                 agg.pr_auc ? fmt(*agg.pr_auc).c_str() : "n/a");
    return cache_.emplace(name, std::move(records)).first->second;
  }

  Aggregate summary(const std::string& name, const std::string& preset,
                    const std::vector<std::pair<std::string, std::string>>& overrides) {
    return aggregate(get(name, preset, overrides), PrAucMode::kPooled);
  }

 private:
  const Options& opt_;
  std::map<std::string, std::vector<RunRecord>> cache_;
};

const std::vector<std::pair<std::string, std::string>> kTopK2 = {{"train.heuristic", "top_k_all_path(2)"}};

Outcome c1(Sweeps& s) {
  const auto a = s.summary("size2_best", "base_size2_unary.ini", {});
  return {a.recall_mean <= 0.15 && a.roc_auc_mean >= 0.70 && a.roc_auc_mean <= 0.90,
          "recall " + fmt(a.recall_mean) + " (<= 0.15), roc_auc " + fmt(a.roc_auc_mean) + " (in [0.70, 0.90])"};
}

Outcome c2(Sweeps& s) {
  const auto a = s.summary("size1_best", "base_size1_unary.ini", {});
  const double pr = a.pr_auc.value_or(std::nan(""));
  return {a.recall_mean >= 0.30 && a.recall_mean <= 0.70 && pr >= 0.45 && pr <= 0.80,
          "recall " + fmt(a.recall_mean) + " (in [0.30, 0.70]), pr_auc " + fmt(pr) + " (in [0.45, 0.80])"};
}

Outcome c3(Sweeps& s) {
  const auto a = s.summary("size2_tkap2_k10", "base_size2_unary.ini", kTopK2);
  return {a.recall_mean >= 0.75 && a.roc_auc_mean >= 0.90,
          "recall " + fmt(a.recall_mean) + " (>= 0.75), roc_auc " + fmt(a.roc_auc_mean) + " (>= 0.90)"};
}

Outcome c4(Sweeps& s) {
  const auto a = s.summary("size1_all_path", "base_size1_unary.ini", {{"train.heuristic", "all_path"}});
  return {a.recall_mean >= 0.90, "recall " + fmt(a.recall_mean) + " (>= 0.90)"};
}

Outcome c5(Sweeps& s) {
  const auto best = s.summary("size3_best", "base_size3_unary.ini", {});
  const auto k2 = s.summary("size3_tkap2", "base_size3_unary.ini", kTopK2);
  const auto k3 = s.summary("size3_tkap3", "base_size3_unary.ini", {{"train.heuristic", "top_k_all_path(3)"}});
  return {k3.recall_mean - k2.recall_mean >= 0.15 && k3.recall_mean - best.recall_mean >= 0.15,
          "top_k_all_path(3) " + fmt(k3.recall_mean) + ", top_k_all_path(2) " + fmt(k2.recall_mean) +
              ", best_only " + fmt(best.recall_mean) + " (gaps >= 0.15)"};
}

bool same_metrics(std::span<const RunRecord> a, std::span<const RunRecord> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a[i].metrics;
    const auto& y = b[i].metrics;
    const auto eq = [](double p, double q) { return p == q || (std::isnan(p) && std::isnan(q)); };
    if (!eq(x.recall, y.recall) || !eq(x.mrr, y.mrr) || !eq(x.roc_auc, y.roc_auc)) return false;
  }
  return true;
}

Outcome c6(Sweeps& s) {
  const auto half = s.summary("size2_nudge_0.5", "base_size2_unary.ini", {{"experiment.nudge_ratio", "0.5"}});
  const auto& base = s.get("size2_best", "base_size2_unary.ini", {});
  const auto& unit = s.get("size2_nudge_1.0", "base_size2_unary.ini", {{"experiment.nudge_ratio", "1.0"}});
  const bool identical = same_metrics(base, unit);
  return {half.recall_mean >= 0.75 && identical,
          "r=0.5 recall " + fmt(half.recall_mean) + " (>= 0.75), r=1.0 " +
              (identical ? "identical to" : "differs from") + " the base sweep"};
}

Outcome c7(Sweeps& s) {
  const auto& records = s.get("size1_best", "base_size1_unary.ini", {});
  const double corr = final_score_correlation(records);
  const auto a = aggregate(records, PrAucMode::kPooled);
  return {corr <= -0.5 && a.recall_std >= 0.25,
          "correlation " + fmt(corr) + " (<= -0.5), recall std " + fmt(a.recall_std) + " (>= 0.25)"};
}

Outcome c8(Sweeps& s) {
  const auto a = s.summary("size2_tkap2_c200", "base_size2_unary.ini",
                           {{"train.heuristic", "top_k_all_path(2)"}, {"data.n_constants", "200"}});
  return {a.recall_mean >= 0.75, "recall " + fmt(a.recall_mean) + " (>= 0.75)"};
}

Outcome c9(Sweeps&) {
  Rng rng(909);
  bool pass = true;
  std::string detail;
  for (const auto& h : {Heuristic::best_only(), Heuristic::top_k(2), Heuristic::all_path(),
                        Heuristic::top_k_all_path(2)}) {
    std::size_t instances = 0, coordinates = 0;
    double worst = 0.0;
    for (int attempt = 0; attempt < 5000 && instances < 100; ++attempt) {
      const int order = 1 + static_cast<int>(rng.below(2));
      const int size = 1 + static_cast<int>(rng.below(order == 1 ? 3 : 2));
      auto w = random_world(rng, order, size, 1 + rng.below(3), order == 1 ? 8 : 4, 0.3, 4);
      const auto goal = random_goal(rng, w, order);
      const auto result = check_gradient(w, goal, static_cast<int>(rng.below(2)), h);
      if (!result.stable) continue;
      ++instances;
      coordinates += result.coordinates;
      worst = std::max(worst, result.max_relative_error);
    }
    pass = pass && instances == 100 && worst < 1e-4;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s%s: %zu instances, %zu coords, max rel err %.2e", detail.empty() ? "" : "; ",
                  h.name().c_str(), instances, coordinates, worst);
    detail += buf;
  }
  return {pass, detail};
}

Outcome c10(Sweeps&) {
  Rng rng(1010);
  std::size_t goals = 0, prover_mismatch = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int order = 1 + static_cast<int>(rng.below(2));
    const int size = 1 + static_cast<int>(rng.below(order == 1 ? 3 : 2));
    const std::size_t n_c = order == 1 ? 4 + rng.below(9) : 3 + rng.below(2);
    auto w = random_world(rng, order, size, 1 + rng.below(3), n_c, order == 1 ? 0.4 : 0.25);
    const ProofIndex index(w.kb, w.rules);
    ProofSearch search(index, w.embeddings, kUnbounded);
    for (int g = 0; g < 5; ++g) {
      const auto goal = g == 0 && w.kb.size() > 0 ? w.kb.facts()[rng.below(w.kb.size())] : random_goal(rng, w, order);
      const auto expected = oracle_scores(w, goal);
      const double best = expected.empty() ? 0.0 : expected.back();
      const auto proofs = enumerate_proofs(goal, w.kb, w.rules, w.embeddings, kUnbounded);
      std::vector<double> scores;
      for (const auto& p : proofs) scores.push_back(p.score);
      std::sort(scores.begin(), scores.end());
      ++goals;
      if (scores != expected || fact_score(proofs).score != best || search.fact_score(goal) != best) ++prover_mismatch;
    }
  }

  std::size_t metric_mismatch = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const bool coarse = trial % 2 == 0;
    const auto draw = [&] { return coarse ? static_cast<double>(rng.below(8)) / 7.0 : rng.uniform(); };
    const std::size_t n = 2 + rng.below(150);
    std::vector<double> s(n);
    std::vector<int> g(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = draw();
      g[i] = rng.bernoulli(0.3) ? 1 : 0;
    }
    g[rng.below(n)] = 1;
    const double pr_err = std::abs(*pr_auc(s, g) - *pr_auc_reference(s, g));

    TestRanking ranking;
    const std::size_t facts = 1 + rng.below(12);
    for (std::size_t f = 0; f < facts; ++f) {
      RankedFact fact{draw(), {}};
      const std::size_t m = 1 + rng.below(10);
      for (std::size_t i = 0; i < m; ++i) fact.corruption_scores.push_back(draw());
      ranking.facts.push_back(std::move(fact));
    }
    const double roc_err = std::abs(roc_auc_duplicated(ranking) - roc_auc_duplicated_reference(ranking));
    worst = std::max({worst, pr_err, roc_err});
    if (pr_err > 1e-9 || roc_err > 1e-9) ++metric_mismatch;
  }
  char buf[200];
  std::snprintf(buf, sizeof buf, "prover: %zu/%zu goals exact; metrics: %d/1000 inputs within 1e-9 (max err %.1e)",
                goals - prover_mismatch, goals, 1000 - static_cast<int>(metric_mismatch), worst);
  return {prover_mismatch == 0 && metric_mismatch == 0, buf};
}

std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome c11(Sweeps&, const Options& opt) {
  std::string detail;
  bool pass = true;
  const auto root = opt.out / "determinism";
  for (const auto& [preset, runs] : std::vector<std::pair<std::string, std::size_t>>{{"smoke.ini", 0}, {"base_size1_unary.ini", 8}}) {
    auto cfg = load_config(fs::path(NTP_SOURCE_DIR) / "configs" / preset);
    if (runs != 0) cfg.runs = runs;
    const auto stem = fs::path(preset).stem().string();
    run_experiment(cfg, root / (stem + "_serial_a"), 1);
    run_experiment(cfg, root / (stem + "_serial_b"), 1);
    run_experiment(cfg, root / (stem + "_parallel"), 8);
    const auto a = slurp(root / (stem + "_serial_a") / "metrics.csv");
    const bool repeat = !a.empty() && a == slurp(root / (stem + "_serial_b") / "metrics.csv");
    const bool parallel = a == slurp(root / (stem + "_parallel") / "metrics.csv");
    pass = pass && repeat && parallel;
    detail += (detail.empty() ? "" : "; ") + stem + ": repeat " + (repeat ? "identical" : "DIFFERENT") +
              ", jobs 8 vs 1 " + (parallel ? "identical" : "DIFFERENT");
  }
  return {pass, detail};
}

Outcome c12(Sweeps& s) {
  const double k10 = s.summary("size2_tkap2_k10", "base_size2_unary.ini", kTopK2).recall_mean;
  const double k20 = s.summary("size2_tkap2_k20", "base_size2_unary.ini",
                               {{"train.heuristic", "top_k_all_path(2)"}, {"train.k_max", "20"}})
                         .recall_mean;
  const double kinf = s.summary("size2_tkap2_kinf", "base_size2_unary.ini",
                                {{"train.heuristic", "top_k_all_path(2)"}, {"train.k_max", "inf"}})
                          .recall_mean;
  const double spread = std::max({k10, k20, kinf}) - std::min({k10, k20, kinf});
  return {spread <= 0.10, "recall k_max=10 " + fmt(k10) + ", 20 " + fmt(k20) + ", inf " + fmt(kinf) + ", spread " +
                              fmt(spread) + " (<= 0.10)"};
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  opt.jobs = std::max(1u, std::thread::hardware_concurrency());
  std::string only;
  CLI::App app{"Acceptance checks"};
  app.add_option("--runs", opt.runs, "Runs per sweep")->check(CLI::PositiveNumber);
  app.add_option("--jobs", opt.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--only", only, "Comma-separated criteria, e.g. C1,C9");
  app.add_option("--out", opt.out, "Directory for sweep outputs");
  CLI11_PARSE(app, argc, argv);
  for (const auto& item : CLI::detail::split(only, ',')) {
    if (!item.empty()) opt.only.insert(item);
  }

  Sweeps sweeps(opt);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"C1", [&] { return c1(sweeps); }},   {"C2", [&] { return c2(sweeps); }},
      {"C3", [&] { return c3(sweeps); }},   {"C4", [&] { return c4(sweeps); }},
      {"C5", [&] { return c5(sweeps); }},   {"C6", [&] { return c6(sweeps); }},
      {"C7", [&] { return c7(sweeps); }},   {"C8", [&] { return c8(sweeps); }},
      {"C9", [&] { return c9(sweeps); }},   {"C10", [&] { return c10(sweeps); }},
      {"C11", [&] { return c11(sweeps, opt); }}, {"C12", [&] { return c12(sweeps); }},
  };

  const std::map<std::string, std::string> titles = {
      {"C1", "base model fails on size-2 rules"},
      {"C2", "base model partly learns size-1 rules"},
      {"C3", "top_k_all_path(2) learns size-2 rules"},
      {"C4", "all_path learns size-1 rules"},
      {"C5", "size-3 rules need top_k_all_path(3)"},
      {"C6", "nudged initialization rescues size-2 rules"},
      {"C7", "rule and unification scores compete"},
      {"C8", "exploration works with 200 constants"},
      {"C9", "analytic gradients match finite differences"},
      {"C10", "prover and metrics match brute-force references"},
      {"C11", "outputs are deterministic across repeats and job counts"},
      {"C12", "k_max barely matters"},
  };

  if (opt.runs != 50) std::fprintf(stderr, "note: %zu runs per sweep instead of 50\n", opt.runs);
  int failures = 0;
  for (const auto& [id, check] : criteria) {
    if (!opt.only.empty() && !opt.only.contains(id)) continue;
    Outcome outcome;
    try {
      outcome = check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("error: ") + e.what()};
    }
    if (!outcome.pass) ++failures;
    std::printf("%s %s: %s -- %s\n", outcome.pass ? "PASS" : "FAIL", id.c_str(), titles.at(id).c_str(),
                outcome.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
