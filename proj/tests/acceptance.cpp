// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

#include "oracles.hpp"

using namespace tea;
namespace fs = std::filesystem;

namespace {

constexpr double kOracleTol = 1e-10;
constexpr double kGradTol = 1e-4;
constexpr std::size_t kMinTheoremInstances = 10000;
constexpr double kSinkhornSumTol = 1e-6;
constexpr double kSinkhornShiftTol = 1e-9;
constexpr double kCleanHits1 = 0.9;
constexpr double kIterationSlack = 0.01;
// wall-clock budgets, seconds
constexpr double kOracleBudget = 60, kGradBudget = 120, kTheoremBudget = 10, kSinkhornBudget = 5;
constexpr double kCleanBudget = 600, kAblationBudget = 3600;

int failures = 0;

void report(int id, bool ok, const std::string& what, double seconds) {
  std::printf("[%s] %d %s (%.1fs)\n", ok ? "PASS" : "FAIL", id, what.c_str(), seconds);
  std::fflush(stdout);
  if (!ok) ++failures;
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void oracles() {
  Timer t;
  double worst = 0.0;
  std::string detail;
  for (const auto& r : check::oracle_suite()) {
    worst = std::max(worst, r.max_error);
    detail += " " + r.name + "=" + fmt("%.1e", r.max_error);
  }
  report(1, worst < kOracleTol && t.seconds() < kOracleBudget,
         "oracle suite max abs err " + fmt("%.2e", worst) + " <" + fmt("%.0e", kOracleTol) + ";" + detail, t.seconds());
}

void gradients() {
  Timer t;
  double worst = 0.0;
  std::size_t entries = 0;
  std::string name;
  for (const auto& g : check::gradient_suite()) {
    entries += g.entries;
    if (g.max_rel_error >= worst) {
      worst = g.max_rel_error;
      name = g.name;
    }
  }
  report(2, worst < kGradTol && t.seconds() < kGradBudget,
         "finite differences max rel err " + fmt("%.2e", worst) + " (" + name + ") over " + std::to_string(entries) +
             " entries <" + fmt("%.0e", kGradTol),
         t.seconds());
}

void theorems() {
  Timer t;
  auto rep = check_theorems();
  bool anchors = std::abs(reference_weight_low_diversity(10, 2) - 1.0 / 3.0) < 1e-12 &&
                 std::abs(reference_weight_high_diversity(10, 2) - 0.1653) < 1e-4 &&
                 reference_cosine(0.0, 2.0) == 0.0 && std::abs(reference_cosine(1.0, 2.0) - 1.0) < 1e-15;
  std::size_t violations =
      rep.diversity.violations.size() + rep.neighborhood.violations.size() + rep.cosine.violations.size();
  report(3, rep.passed() && anchors && rep.total_instances() >= kMinTheoremInstances && t.seconds() < kTheoremBudget,
         "richness propositions: " + std::to_string(rep.total_instances()) + " instances, " +
             std::to_string(violations) + " violations, anchors " + (anchors ? "ok" : "wrong"),
         t.seconds());
}

void sinkhorn_check() {
  Timer t;
  auto s = check::random_matrix(50, 50, 2024, 3.0);
  auto r = sinkhorn(s, 10000, 1e-12);
  double dev = 0.0;
  for (std::size_t i = 0; i < 50; ++i) {
    double rs = 0, cs = 0;
    for (std::size_t j = 0; j < 50; ++j) {
      rs += r.matrix(i, j);
      cs += r.matrix(j, i);
    }
    dev = std::max({dev, std::abs(rs - 1.0), std::abs(cs - 1.0)});
  }
  auto shifted = s;
  for (double& v : shifted.values()) v += 7.5;
  double shift = check::max_diff(sinkhorn(shifted, 10000, 1e-12).matrix, check::to_vecs(r.matrix));
  report(4, dev < kSinkhornSumTol && shift < kSinkhornShiftTol && t.seconds() < kSinkhornBudget,
         "sinkhorn 50x50: max marginal dev " + fmt("%.1e", dev) + ", shift diff " + fmt("%.1e", shift) + " after " +
             std::to_string(r.iterations) + " iterations",
         t.seconds());
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("tea_accept_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

// criterion 7 reruns this one into a second directory
const fs::path dir_a = scratch("a");

void clean_task() {
  Timer t;
  auto task = generate_synthetic_task(SyntheticParams{}).task;
  auto res = run_pipeline(task, RunConfig{}, dir_a);
  double h1 = res.iterations[0].report.hits(1), h2 = res.iterations[1].report.hits(1);
  const auto& it1 = res.iterations[0];
  double precision = it1.added_checkable ? static_cast<double>(it1.added_correct) / it1.added_checkable : 1.0;
  bool ok = h1 >= kCleanHits1 && h2 >= h1 - kIterationSlack && it1.added_correct == it1.added_checkable &&
            it1.added_checkable == it1.added.size() && t.seconds() < kCleanBudget;
  report(5, ok,
         "noise 0: H@1 t=1 " + format_value(h1) + " (>= " + fmt("%.2f", kCleanHits1) + "), t=2 " + format_value(h2) +
             ", pseudo seeds " + std::to_string(it1.added_correct) + "/" + std::to_string(it1.added.size()) +
             " correct (precision " + format_value(precision) + ")",
         t.seconds());
}

void determinism() {
  Timer t7;
  auto dir_b = scratch("b");
  run_pipeline(generate_synthetic_task(SyntheticParams{}).task, RunConfig{}, dir_b);
  std::string a = slurp(dir_a / "metrics.tsv"), b = slurp(dir_b / "metrics.tsv");
  report(7, !a.empty() && a == b,
         "two runs, same seed: metrics.tsv " + std::string(a == b ? "byte-identical" : "differs") + " (" +
             std::to_string(a.size()) + " bytes)",
         t7.seconds());
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

void ablation() {
  Timer t;
  const std::vector<std::string> variants{"full", "drop_E", "no_consensus", "equal_weights"};
  std::vector<double> mean(variants.size(), 0.0);
  RunConfig cfg;
  cfg.iterations = 1;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SyntheticParams sp;
    sp.noise = 0.1;
    sp.seed = seed;
    auto task = generate_synthetic_task(sp).task;
    auto rows = ablate(task, cfg, variants);
    for (std::size_t v = 0; v < variants.size(); ++v) mean[v] += rows[v].h1 / 5.0;
  }
  bool ok = t.seconds() < kAblationBudget;
  std::string detail;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    detail += " " + variants[v] + "=" + format_value(mean[v]);
    if (v > 0 && mean[0] < mean[v]) ok = false;
  }
  report(6, ok, "noise 0.1, seeds 1-5, mean H@1 full >= each ablation:" + detail, t.seconds());
}

void star_attention() {
  Timer t;
  auto task = check::star_task();
  ModelInputs in = build_inputs(task);
  RunConfig cfg;
  ModelOptions opt = cfg.model_options();
  TrainingState state{ModelParams::create(in, cfg.encoder, cfg.consensus, cfg.rng_seed), {}};
  TrainLog log;
  train_stage(state, in, task.train_seeds, Stage::structural, cfg.encoder, cfg.consensus, opt, cfg.rng_seed, log);
  const auto k = type_index(FeatureType::E);
  auto fw = forward_type(state.params.encoders[k], in.left.bipartite[k], in.left.graph, AttentionMode::richness, {},
                         cfg.encoder.attention_layers);
  const auto& nb = in.left.graph.neighbors[0];
  const auto& beta = fw.beta[0][0];
  double bu = 0, bm = 0, bv = 0;
  for (std::size_t c = 0; c < nb.size(); ++c) {
    if (nb[c] == 1) bu = beta[c];
    if (nb[c] == 2) bm = beta[c];
    if (nb[c] == 3) bv = beta[c];
  }
  report(8, nb.size() == 3 && bu > bm && bm > bv,
         "star graph, layer-0 E attention of the centre: u(41 nb) " + fmt("%.4f", bu) + ", m(21) " + fmt("%.4f", bm) +
             ", v(11) " + fmt("%.4f", bv) + ", need u > m > v",
         t.seconds());
}

}  // namespace

int main() {
  Timer total;
  try {
    oracles();
    gradients();
    theorems();
    sinkhorn_check();
    clean_task();
    ablation();
    determinism();
    star_attention();
  } catch (const std::exception& e) {
    std::printf("[FAIL] acceptance aborted: %s\n", e.what());
    return 1;
  }
  std::printf("%s: %d criteria failed, %.1fs total\n", failures ? "FAILED" : "PASSED", failures, total.seconds());
  return failures ? 1 : 0;
}
