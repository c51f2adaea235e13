#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"

using namespace tea;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("tea_pipe_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

RunConfig quick_config() {
  RunConfig c;
  c.encoder.dim = 8;
  c.encoder.epochs_structural = 8;
  c.encoder.epochs_temporal = 8;
  c.encoder.epochs_mixed = 2;
  c.consensus.epochs = 3;
  c.consensus.random_dim = 4;
  c.consensus.hidden = 8;
  c.consensus.propagation_steps = 2;
  c.consensus.k = 5;
  return c;
}

AlignmentTask quick_task() {
  SyntheticParams sp;
  sp.entities = 40;
  sp.seed = 2;
  return generate_synthetic_task(sp).task;
}

}  // namespace

TEST(Rank, DenseTiesKeepSmallerIndexFirst) {
  SimilarityView v{ViewSource::final, DenseMatrix(1, 3, std::vector<double>{0.5, 0.9, 0.9}), std::nullopt};
  auto r = rank_and_predict(v);
  EXPECT_EQ(r.ranked[0], (std::vector<Index>{1, 2, 0}));
  EXPECT_EQ(r.prediction(0), Index(1));
}

TEST(Rank, MatchesSortOracle) {
  auto m = check::random_matrix(6, 6, 3);
  auto r = rank_and_predict(SimilarityView{ViewSource::final, m, std::nullopt});
  for (std::size_t i = 0; i < 6; ++i) {
    std::vector<std::pair<double, Index>> all;
    for (Index j = 0; j < 6; ++j) all.emplace_back(-m(i, j), j);
    std::sort(all.begin(), all.end());
    for (std::size_t k = 0; k < 6; ++k) EXPECT_EQ(r.ranked[i][k], all[k].second);
  }
}

TEST(Rank, CandidateRestrictionAndTopK) {
  auto m = check::random_matrix(3, 5, 4);
  std::vector<Index> pool{1, 3};
  auto r = rank_and_predict(SimilarityView{ViewSource::final, m, std::nullopt}, &pool);
  for (const auto& row : r.ranked) {
    ASSERT_EQ(row.size(), 2u);
    for (Index j : row) EXPECT_TRUE(j == 1 || j == 3);
  }
  SimilarityView t{ViewSource::final, {}, topk_retrieve(m, DenseMatrix(5, 5, 0.0), 2)};
  EXPECT_EQ(rank_and_predict(t).ranked[0].size(), 2u);
  std::vector<Index> bad{9};
  EXPECT_THROW(rank_and_predict(SimilarityView{ViewSource::final, m, std::nullopt}, &bad), ShapeError);
}

TEST(Evaluate, RanksOneTwoFour) {
  Ranking r;
  r.ranked = {{0, 7}, {5, 1}, {5, 6, 7, 2}};
  auto rep = evaluate(r, SeedAlignment{{{0, 0}, {1, 1}, {2, 2}}});
  EXPECT_NEAR(rep.mrr(), (1.0 + 0.5 + 0.25) / 3.0, 1e-15);
  EXPECT_NEAR(rep.mrr(), 0.5833, 1e-4);
  EXPECT_NEAR(rep.hits(1), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(rep.hits(5), 1.0, 1e-15);
}

TEST(Evaluate, UnretainedCounterpartScoresZero) {
  Ranking r;
  r.ranked = {{3, 4}};
  auto rep = evaluate(r, SeedAlignment{{{0, 0}}});
  EXPECT_EQ(rep.mrr(), 0.0);
  EXPECT_EQ(rep.hits(10), 0.0);
}

TEST(Evaluate, UnrankedEntityThrows) {
  Ranking r;
  r.ranked = {{0}, {}};
  EXPECT_THROW(evaluate(r, SeedAlignment{{{0, 0}, {1, 1}}}), EvaluationError);
  EXPECT_THROW(evaluate(r, SeedAlignment{{{5, 0}}}), EvaluationError);
}

TEST(Evaluate, SlicesPartitionEachFamily) {
  auto task = quick_task();
  auto info = make_slice_info(task.left);
  Ranking r;
  for (Index i = 0; i < task.left.entity_count(); ++i) r.ranked.push_back({i});
  auto rep = evaluate(r, task.test_pairs, &info);
  for (std::string fam : {"E:", "R:", "T:", "I:"}) {
    std::size_t total = 0;
    for (const auto& [name, s] : rep.slices)
      if (name.rfind(fam, 0) == 0) total += s.count;
    EXPECT_EQ(total, task.test_pairs.size()) << fam;
  }
  std::size_t tem = 0;
  for (std::string g : {"Non-tem", "Sparse-tem", "Dense-tem"})
    if (rep.slices.count(g)) tem += rep.slices.at(g).count;
  EXPECT_EQ(tem, task.test_pairs.size());
}

TEST(Metrics, SixDecimalOutput) {
  EXPECT_EQ(format_value(1.0 / 3.0), "0.333333");
  Ranking r;
  r.ranked = {{0}};
  std::ostringstream out;
  write_metrics(out, evaluate(r, SeedAlignment{{{0, 0}}}));
  EXPECT_NE(out.str().find("H@1\tall\t1.000000"), std::string::npos);
}

TEST(SelectSeeds, DiagonalAgreementAddsEverything) {
  DenseMatrix d(3, 3);
  for (std::size_t i = 0; i < 3; ++i) d(i, i) = 1.0;
  SimilarityView s{ViewSource::structural, d, std::nullopt}, t{ViewSource::temporal, d, std::nullopt};
  auto sel = select_seeds(s, t, SeedAlignment{{{0, 0}}});
  EXPECT_EQ(sel.added, (std::vector<std::pair<Index, Index>>{{1, 1}, {2, 2}}));
  EXPECT_EQ(sel.expanded.size(), 3u);
}

TEST(SelectSeeds, DisagreeingViewsAddNothing) {
  DenseMatrix a(2, 2, std::vector<double>{1, 0, 0, 1}), b(2, 2, std::vector<double>{0, 1, 1, 0});
  auto sel = select_seeds({ViewSource::structural, a, std::nullopt}, {ViewSource::temporal, b, std::nullopt}, {});
  EXPECT_TRUE(sel.added.empty());
}

TEST(SelectSeeds, MatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const std::size_t n = 3 + seed % 5;
    auto a = check::random_matrix(n, n, 200 + seed), b = check::random_matrix(n, n, 300 + seed);
    // make the views agree often enough to select something
    for (std::size_t k = 0; k < b.size(); ++k) b.values()[k] = a.values()[k] + 0.3 * b.values()[k];
    SeedAlignment seeds{{{0, static_cast<Index>(seed % n)}}};
    auto sel = select_seeds({ViewSource::structural, a, std::nullopt}, {ViewSource::temporal, b, std::nullopt}, seeds);
    auto argmax_row = [&](const DenseMatrix& m, Index i) {
      Index best = 0;
      for (Index j = 1; j < n; ++j)
        if (m(i, j) > m(i, best)) best = j;
      return best;
    };
    auto argmax_col = [&](const DenseMatrix& m, Index j) {
      Index best = 0;
      for (Index i = 1; i < n; ++i)
        if (m(i, j) > m(best, j)) best = i;
      return best;
    };
    std::vector<std::pair<Index, Index>> want;
    for (Index e = 1; e < n; ++e) {
      Index j = argmax_row(a, e);
      if (j != argmax_row(b, e) || j == seeds.pairs[0].second) continue;
      if (argmax_col(a, j) == e && argmax_col(b, j) == e) want.emplace_back(e, j);
    }
    EXPECT_EQ(sel.added, want) << seed;
    EXPECT_NO_THROW(sel.expanded.validate_one_to_one());
  }
}

TEST(SelectSeeds, WrongViewsAreAContractViolation) {
  DenseMatrix d(2, 2);
  SimilarityView m{ViewSource::mixed, d, std::nullopt}, t{ViewSource::temporal, d, std::nullopt};
  EXPECT_THROW(select_seeds(m, t, {}), ContractViolation);
  EXPECT_THROW(select_seeds(t, t, {}), ContractViolation);
}

TEST(Config, ParsesKeysAndComments) {
  auto c = parse_config("# a comment\ndim = 16\n top_k=3 # trailing\n\nno_consensus = true\ncandidate_pool = all\n");
  EXPECT_EQ(c.encoder.dim, 16u);
  EXPECT_EQ(c.consensus.k, 3u);
  EXPECT_TRUE(c.ablation.no_consensus);
  EXPECT_EQ(c.candidate_pool, CandidatePool::all);
  EXPECT_EQ(c.encoder.depth, 2u);
}

TEST(Config, ResolvedTextRoundTrips) {
  auto c = parse_config("temperature = 0.07\ndrop_T = true\nrng_seed = 99\nlearning_rate = 0.0123\n");
  auto back = parse_config(resolved_config(c));
  EXPECT_EQ(back, c);
  EXPECT_EQ(back.encoder.temperature, 0.07);
  EXPECT_EQ(get_config_value(back, "drop_T"), "true");
}

TEST(Config, BadInputIsAConfigError) {
  EXPECT_THROW(parse_config("no_such_key = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("dim = abc\n"), ConfigError);
  EXPECT_THROW(parse_config("dim 16\n"), ConfigError);
  EXPECT_THROW(parse_config("candidate_pool = some\n"), ConfigError);
}

TEST(Config, ValidationCatchesInconsistentValues) {
  // parsing is per key; cross-key checks run once every layer has been applied
  EXPECT_THROW(parse_config("dim = 0\n").validate(), ConfigError);
  EXPECT_THROW(parse_config("gat_attention = true\nrelation_attention = true\n").validate(), ConfigError);
  EXPECT_THROW(parse_config("drop_attention_E = true\ngat_attention = true\n").validate(), ConfigError);
  EXPECT_THROW(parse_config("seed_fraction = 1\n").validate(), ConfigError);
  EXPECT_THROW(run_pipeline(quick_task(), parse_config("gat_attention = true\nrelation_attention = true\n")),
               ConfigError);
  EXPECT_NO_THROW(parse_config("gat_attention = true\n").validate());
}

TEST(Config, AblationNamesAreConfigKeys) {
  RunConfig c;
  for (const auto& name : ablation_flag_names()) {
    EXPECT_EQ(get_config_value(c, name), "false") << name;
    EXPECT_NO_THROW(set_config_value(c, name, "false"));
  }
}

TEST(Checkpoint, BitExactRoundTrip) {
  auto task = quick_task();
  auto in = build_inputs(task);
  auto cfg = quick_config();
  auto p = ModelParams::create(in, cfg.encoder, cfg.consensus, 7);
  p.encoders[1].features(0, 0) = 1.0 / 3.0;
  p.encoders[2].features(1, 1) = -0.0;
  std::stringstream ss;
  save_checkpoint(p, ss);
  auto back = load_checkpoint(ss);
  EXPECT_EQ(back, p);
  EXPECT_TRUE(std::signbit(back.encoders[2].features(1, 1)));
}

TEST(Checkpoint, TruncatedFileIsAParseError) {
  auto task = quick_task();
  auto in = build_inputs(task);
  auto cfg = quick_config();
  std::stringstream ss;
  save_checkpoint(ModelParams::create(in, cfg.encoder, cfg.consensus, 7), ss);
  std::string text = ss.str();
  std::stringstream cut(text.substr(0, text.size() / 2));
  EXPECT_THROW(load_checkpoint(cut), ParseError);
}

TEST(Pipeline, SeedsGrowAcrossIterations) {
  auto cfg = quick_config();
  auto res = run_pipeline(quick_task(), cfg);
  ASSERT_EQ(res.iterations.size(), 2u);
  const auto& first = res.iterations[0];
  EXPECT_EQ(res.iterations[1].seeds.size(), first.seeds.size() + first.added.size());
  EXPECT_GE(res.iterations[1].seeds.size(), first.seeds.size());
  EXPECT_LE(first.added_correct, first.added_checkable);
  EXPECT_NO_THROW(res.iterations[1].seeds.validate_one_to_one());
  EXPECT_GE(res.report().hits(1), 0.0);
  EXPECT_LE(res.report().hits(1), 1.0);
}

TEST(Pipeline, MetricsFileIsDeterministic) {
  auto cfg = quick_config();
  cfg.iterations = 1;
  auto a = scratch("det_a"), b = scratch("det_b");
  run_pipeline(quick_task(), cfg, a);
  run_pipeline(quick_task(), cfg, b);
  EXPECT_EQ(slurp(a / "metrics.tsv"), slurp(b / "metrics.tsv"));
  EXPECT_FALSE(slurp(a / "metrics.tsv").empty());
  EXPECT_TRUE(fs::exists(a / "checkpoint_iter1.txt"));
  EXPECT_TRUE(fs::exists(a / "config.resolved"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Pipeline, SkippedConsensusIsReported) {
  auto cfg = quick_config();
  cfg.iterations = 1;
  cfg.ablation.no_consensus = true;
  auto dir = scratch("nocons");
  auto res = run_pipeline(quick_task(), cfg, dir);
  EXPECT_FALSE(res.consensus_ran);
  EXPECT_NE(slurp(dir / "metrics.tsv").find("consensus\tall\tskipped"), std::string::npos);
  for (const auto& r : res.iterations[0].log.epochs) EXPECT_NE(r.stage, Stage::consensus);
  fs::remove_all(dir);
}

TEST(Pipeline, FullVariantEqualsPlainRun) {
  auto cfg = quick_config();
  cfg.iterations = 1;
  auto task = quick_task();
  auto rows = ablate(task, cfg, {"full", "drop_E"});
  auto plain = run_pipeline(task, cfg);
  EXPECT_EQ(rows[0].h1, plain.report().hits(1));
  EXPECT_EQ(rows[0].mrr, plain.report().mrr());
  EXPECT_THROW(ablation_config(cfg, "bogus"), ConfigError);
}
