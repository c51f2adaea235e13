#pragma once

// End-to-end orchestration: train the stages, build the final similarity,
// evaluate, and (for t > 1) expand the seed set and retrain from scratch.

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tea/checkpoint.hpp"
#include "tea/config.hpp"
#include "tea/io.hpp"
#include "tea/metrics.hpp"
#include "tea/seeds.hpp"
#include "tea/trainer.hpp"

namespace tea {

struct IterationResult {
  int iteration = 1;
  SeedAlignment seeds;           // training seeds of this iteration
  MetricReport report;           // final view
  MetricReport pre_consensus;    // mixed-embedding view
  std::vector<std::pair<Index, Index>> added;  // pseudo seeds selected after this iteration
  std::size_t added_correct = 0;               // of which agree with the held-out test pairs
  std::size_t added_checkable = 0;             // of which the left entity has a known test counterpart
  std::size_t consensus_excluded = 0;          // seeds missing from their top-k row in the last consensus epoch
  TrainLog log;
};

struct PipelineResult {
  std::vector<IterationResult> iterations;
  ModelParams params;  // final iteration
  bool consensus_ran = false;

  const MetricReport& report() const { return iterations.back().report; }
};

/// Cosine similarity of normalised row embeddings.
inline DenseMatrix cosine_matrix(const DenseMatrix& left, const DenseMatrix& right) {
  return matmul_nt(normalize_rows(left), normalize_rows(right));
}

/// Scores after consensus: retained candidates are ordered by refined
/// probability and placed above every non-retained candidate, which keep their
/// base cosine order.
inline DenseMatrix consensus_rerank(const DenseMatrix& base, const TopKSimilarity& refined) {
  DenseMatrix out = base;
  for (std::size_t i = 0; i < refined.rows; ++i)
    for (std::size_t c = 0; c < refined.k; ++c)
      out(i, refined.index[i * refined.k + c]) = 2.0 + refined.prob[i * refined.k + c];
  return out;
}

struct FinalViews {
  SimilarityView final_view;
  SimilarityView mixed_view;
};

inline FinalViews build_final_views(const ModelParams& p, const ModelInputs& in, const RunConfig& cfg,
                                    const ModelOptions& opt, const std::vector<Index>& rows,
                                    const std::vector<Index>& pool) {
  FinalViews v;
  v.mixed_view.source = ViewSource::mixed;
  v.mixed_view.dense = cosine_matrix(embed(EmbeddingKind::mixed, p, in.left, opt),
                                     embed(EmbeddingKind::mixed, p, in.right, opt));
  v.final_view.source = ViewSource::final;
  v.final_view.dense = v.mixed_view.dense;
  if (opt.consensus) {
    auto cf = consensus_inference(p, in, opt, cfg.consensus, cfg.encoder.temperature, cfg.rng_seed);
    v.final_view.dense = consensus_rerank(v.mixed_view.dense, cf.refined);
  }
  if (cfg.sinkhorn) {
    if (rows.size() != pool.size())
      throw ConfigError("sinkhorn needs as many evaluated rows as candidates (use candidate_pool = test)");
    DenseMatrix sub(rows.size(), pool.size());
    for (std::size_t a = 0; a < rows.size(); ++a)
      for (std::size_t b = 0; b < pool.size(); ++b)
        sub(a, b) = v.final_view.dense(rows[a], pool[b]) / cfg.encoder.temperature;
    auto sk = sinkhorn(sub, cfg.sinkhorn_iterations);
    for (std::size_t a = 0; a < rows.size(); ++a)
      for (std::size_t b = 0; b < pool.size(); ++b) v.final_view.dense(rows[a], pool[b]) = sk.matrix(a, b);
  }
  return v;
}

namespace detail {

inline void write_seeds(const SeedAlignment& s, const std::filesystem::path& path) { write_pairs(s, path); }

inline void write_train_log(const TrainLog& log, std::ostream& out, int iteration) {
  char buf[64];
  for (const auto& r : log.epochs) {
    std::snprintf(buf, sizeof buf, "%.10g", r.loss);
    out << iteration << '\t' << to_string(r.stage) << '\t' << r.epoch << '\t' << buf << '\t' << r.excluded << '\n';
  }
}

}  // namespace detail

/// Trains one model on `seeds` (one iteration of the pipeline).
inline TrainingState train_model(const AlignmentTask& task_with_seeds, const ModelInputs& in, const RunConfig& cfg,
                                 const ModelOptions& opt, TrainLog& log) {
  TrainingState state;
  state.params = ModelParams::create(in, cfg.encoder, cfg.consensus, cfg.rng_seed);
  const auto& seeds = task_with_seeds.train_seeds;
  train_stage(state, in, seeds, Stage::structural, cfg.encoder, cfg.consensus, opt, cfg.rng_seed, log);
  train_stage(state, in, seeds, Stage::temporal, cfg.encoder, cfg.consensus, opt, cfg.rng_seed, log);
  if (opt.dynamic_weighting)
    train_stage(state, in, seeds, Stage::mixed, cfg.encoder, cfg.consensus, opt, cfg.rng_seed, log);
  if (opt.consensus)
    train_stage(state, in, seeds, Stage::consensus, cfg.encoder, cfg.consensus, opt, cfg.rng_seed, log);
  return state;
}

inline PipelineResult run_pipeline(const AlignmentTask& task, const RunConfig& cfg,
                                   const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                                   std::ostream* progress = nullptr) {
  cfg.validate();
  task.validate();
  const ModelOptions opt = cfg.model_options();
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    std::ofstream(*out_dir / "config.resolved") << resolved_config(cfg);
  }
  std::vector<Index> rows, pool;
  std::map<Index, Index> truth;
  for (auto [a, b] : task.test_pairs.pairs) {
    rows.push_back(a);
    truth[a] = b;
  }
  if (cfg.candidate_pool == CandidatePool::test) {
    for (auto [a, b] : task.test_pairs.pairs) pool.push_back(b);
    std::sort(pool.begin(), pool.end());
  } else {
    for (Index j = 0; j < task.right.entity_count(); ++j) pool.push_back(j);
  }
  const SliceInfo slices = make_slice_info(task.left, cfg.dense_threshold);

  PipelineResult result;
  result.consensus_ran = opt.consensus;
  SeedAlignment seeds = task.train_seeds;
  std::ofstream train_log;
  if (out_dir) train_log.open(*out_dir / "train_log.tsv");
  for (int it = 1; it <= cfg.iterations; ++it) {
    IterationResult ir;
    ir.iteration = it;
    ir.seeds = seeds;
    ir.log.sink = progress;
    if (progress) *progress << "iteration " << it << ": " << seeds.size() << " training seeds\n";
    AlignmentTask current{task.left, task.right, seeds, task.test_pairs};
    ModelInputs in = build_inputs(current);
    if (out_dir) detail::write_seeds(seeds, *out_dir / ("seeds_iter" + std::to_string(it) + ".tsv"));
    TrainingState state = train_model(current, in, cfg, opt, ir.log);
    for (const auto& r : ir.log.epochs)
      if (r.stage == Stage::consensus) ir.consensus_excluded = r.excluded;
    if (out_dir) {
      save_checkpoint(state.params, *out_dir / ("checkpoint_iter" + std::to_string(it) + ".txt"));
      detail::write_train_log(ir.log, train_log, it);
    }
    auto views = build_final_views(state.params, in, cfg, opt, rows, pool);
    ir.report = evaluate(rank_and_predict(views.final_view, &pool), task.test_pairs, &slices);
    ir.pre_consensus = evaluate(rank_and_predict(views.mixed_view, &pool), task.test_pairs, &slices);
    if (progress)
      *progress << "iteration " << it << ": H@1 " << format_value(ir.report.hits(1)) << " MRR "
                << format_value(ir.report.mrr()) << "\n";
    if (it < cfg.iterations) {
      SimilarityView s_r{ViewSource::structural,
                         cosine_matrix(embed(EmbeddingKind::structural, state.params, in.left, opt),
                                       embed(EmbeddingKind::structural, state.params, in.right, opt)),
                         std::nullopt};
      SimilarityView s_t{ViewSource::temporal,
                         cosine_matrix(embed(EmbeddingKind::temporal, state.params, in.left, opt),
                                       embed(EmbeddingKind::temporal, state.params, in.right, opt)),
                         std::nullopt};
      auto sel = select_seeds(s_r, s_t, seeds);
      ir.added = sel.added;
      for (auto [a, b] : sel.added) {
        auto t = truth.find(a);
        if (t == truth.end()) continue;
        ++ir.added_checkable;
        if (t->second == b) ++ir.added_correct;
      }
      if (progress) *progress << "iteration " << it << ": selected " << sel.added.size() << " pseudo seeds\n";
      seeds = sel.expanded;
    }
    result.params = std::move(state.params);
    result.iterations.push_back(std::move(ir));
  }
  if (out_dir) {
    std::ofstream out(*out_dir / "metrics.tsv");
    write_metrics(out, result.report());
    for (const auto& ir : result.iterations) {
      const std::string pre = "iter" + std::to_string(ir.iteration) + "/";
      write_metrics(out, ir.report, pre);
      out << "MRR\t" << pre << "pre_consensus\t" << format_value(ir.pre_consensus.mrr()) << '\n';
      out << "H@1\t" << pre << "pre_consensus\t" << format_value(ir.pre_consensus.hits(1)) << '\n';
      out << "seeds\t" << pre << "train\t" << ir.seeds.size() << '\n';
      if (ir.iteration < cfg.iterations) {
        out << "seeds\t" << pre << "added\t" << ir.added.size() << '\n';
        out << "seeds\t" << pre << "added_correct\t" << ir.added_correct << '\n';
      }
    }
    out << "consensus\tall\t" << (result.consensus_ran ? "ran" : "skipped") << '\n';
  }
  return result;
}

struct AblationRow {
  std::string name;
  double h1 = 0.0;
  double mrr = 0.0;
};

/// Builds the config for one named variant ("full" = base unchanged). Names are
/// ablation keys, joined with '+' for combinations.
inline RunConfig ablation_config(const RunConfig& base, const std::string& variant) {
  RunConfig c = base;
  if (variant == "full") return c;
  std::stringstream ss(variant);
  std::string flag;
  while (std::getline(ss, flag, '+')) set_config_value(c, flag, "true");
  c.validate();
  return c;
}

inline std::vector<AblationRow> ablate(const AlignmentTask& task, const RunConfig& base,
                                       const std::vector<std::string>& variants,
                                       const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                                       std::ostream* progress = nullptr) {
  std::vector<RunConfig> configs;
  for (const auto& v : variants) configs.push_back(ablation_config(base, v));
  std::vector<AblationRow> rows;
  for (std::size_t i = 0; i < variants.size(); ++i) {
    if (progress) *progress << "variant " << variants[i] << "\n";
    std::optional<std::filesystem::path> dir;
    if (out_dir) dir = *out_dir / variants[i];
    auto res = run_pipeline(task, configs[i], dir, progress);
    rows.push_back({variants[i], res.report().hits(1), res.report().mrr()});
  }
  if (out_dir) {
    std::ofstream out(*out_dir / "ablation.tsv");
    out << "variant\tH@1\tMRR\n";
    for (const auto& r : rows) out << r.name << '\t' << format_value(r.h1) << '\t' << format_value(r.mrr) << '\n';
  }
  return rows;
}

}  // namespace tea
