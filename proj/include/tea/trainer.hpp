#pragma once

// Stage-wise training: structural -> temporal -> mixed -> consensus.
//
// The structural and temporal stages train their own encoders with the
// contrastive loss. The mixed stage trains the fusion MLP and fine-tunes every
// encoder at a reduced rate. The consensus stage trains the refinement MLP with
// L_nc and fine-tunes the encoders through the dual-view embedding.

#include <array>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "tea/contrastive.hpp"
#include "tea/model.hpp"
#include "tea/optim.hpp"

namespace tea {

enum class Stage { structural = 0, temporal = 1, mixed = 2, consensus = 3 };

inline constexpr std::string_view to_string(Stage s) noexcept {
  switch (s) {
    case Stage::structural: return "structural";
    case Stage::temporal: return "temporal";
    case Stage::mixed: return "mixed";
    case Stage::consensus: return "consensus";
  }
  return "?";
}

struct EpochRecord {
  Stage stage;
  int epoch;
  double loss;
  std::size_t excluded = 0;  // consensus: seeds whose counterpart was not retrieved
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::ostream* sink = nullptr;

  void record(EpochRecord r) {
    if (sink) {
      *sink << to_string(r.stage) << " epoch " << r.epoch << " loss " << r.loss;
      if (r.stage == Stage::consensus) *sink << " excluded " << r.excluded;
      *sink << '\n';
    }
    epochs.push_back(r);
  }

  std::vector<double> losses(Stage s) const {
    std::vector<double> out;
    for (const auto& r : epochs)
      if (r.stage == s) out.push_back(r.loss);
    return out;
  }
};

struct TrainingState {
  ModelParams params;
  std::array<bool, 4> completed{};

  bool done(Stage s) const noexcept { return completed[static_cast<std::size_t>(s)]; }
};

namespace detail {

struct ParamGroup {
  std::vector<DenseMatrix*> params;
  std::vector<const DenseMatrix*> grads;
};

inline void add_encoder(ParamGroup& g, TypeEncoderParams& p, const TypeEncoderParams& d) {
  auto ps = p.parameters();
  auto gs = d.parameters();
  g.params.insert(g.params.end(), ps.begin(), ps.end());
  g.grads.insert(g.grads.end(), gs.begin(), gs.end());
}

inline void add_mlp(ParamGroup& g, MlpParams& p, const MlpGrads& d) {
  auto ps = mlp_param_list(p);
  auto gs = mlp_grad_list(d);
  g.params.insert(g.params.end(), ps.begin(), ps.end());
  g.grads.insert(g.grads.end(), gs.begin(), gs.end());
}

inline void check_finite(double loss, const ModelGrads& g, int epoch) {
  if (!std::isfinite(loss)) throw TrainingDiverged("non-finite training loss", epoch);
  auto bad = [](const DenseMatrix& m) { return !m.all_finite(); };
  for (const auto& e : g.encoders)
    for (const auto* m : e.parameters())
      if (bad(*m)) throw TrainingDiverged("non-finite gradient", epoch);
  for (const auto* m : mlp_grad_list(g.fusion))
    if (bad(*m)) throw TrainingDiverged("non-finite gradient", epoch);
  for (const auto* m : mlp_grad_list(g.refine))
    if (bad(*m)) throw TrainingDiverged("non-finite gradient", epoch);
}

inline std::uint64_t step_site(Stage s, int epoch, std::size_t batch, std::uint64_t side) {
  return splitmix64((static_cast<std::uint64_t>(s) << 56) ^ (static_cast<std::uint64_t>(epoch) << 24) ^
                    (batch << 4) ^ side);
}

}  // namespace detail

/// One optimisation step's worth of loss and gradients for a contrastive head.
/// Exposed so gradient checks can compare it against finite differences.
inline double contrastive_objective(const ModelParams& p, const ModelInputs& in, const ModelOptions& opt,
                                    EmbeddingKind kind, const std::vector<std::pair<Index, Index>>& batch,
                                    double tau, const DropoutSpec& drop_left, const DropoutSpec& drop_right,
                                    ModelGrads* grads) {
  auto types = head_types(kind, opt);
  auto enc_l = encode_side(p, in.left, opt, types, drop_left);
  auto enc_r = encode_side(p, in.right, opt, types, drop_right);
  HeadCache cl, cr;
  DenseMatrix hl = head_forward(kind, enc_l, p.fusion, opt, cl);
  DenseMatrix hr = head_forward(kind, enc_r, p.fusion, opt, cr);
  DenseMatrix xl(batch.size(), hl.cols()), xr(batch.size(), hr.cols());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    std::copy(hl.row(batch[b].first).begin(), hl.row(batch[b].first).end(), xl.row(b).begin());
    std::copy(hr.row(batch[b].second).begin(), hr.row(batch[b].second).end(), xr.row(b).begin());
  }
  auto res = contrastive_loss(xl, xr, tau);
  if (!grads) return res.loss;
  DenseMatrix dl(hl.rows(), hl.cols()), dr(hr.rows(), hr.cols());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    axpy(1.0, res.grad_left.row(b), dl.row(batch[b].first));
    axpy(1.0, res.grad_right.row(b), dr.row(batch[b].second));
  }
  head_backward(kind, p, in.left, opt, enc_l, cl, dl, *grads);
  head_backward(kind, p, in.right, opt, enc_r, cr, dr, *grads);
  return res.loss;
}

struct ConsensusForward {
  TopKSimilarity base;
  TopKSimilarity refined;
  DenseMatrix colors;
  DenseMatrix left_output;
};

/// Retrieval + refinement + L_nc for one epoch's colours; gradients are optional.
inline ConsensusLoss consensus_objective(const ModelParams& p, const ModelInputs& in, const ModelOptions& opt,
                                         const ConsensusParams& cp, double tau, const SeedAlignment& seeds,
                                         const DenseMatrix& colors, const DropoutSpec& drop_left,
                                         const DropoutSpec& drop_right, ModelGrads* grads,
                                         ConsensusForward* keep = nullptr) {
  auto types = head_types(EmbeddingKind::dual, opt);
  auto enc_l = encode_side(p, in.left, opt, types, drop_left);
  auto enc_r = encode_side(p, in.right, opt, types, drop_right);
  HeadCache cl, cr;
  DenseMatrix hl = head_forward(EmbeddingKind::dual, enc_l, p.fusion, opt, cl);
  DenseMatrix hr = head_forward(EmbeddingKind::dual, enc_r, p.fusion, opt, cr);
  TopKSimilarity base = topk_retrieve(hl, hr, cp.k, 1.0 / tau);
  DenseMatrix o = randomized_propagation(in.left.graph.neighbors, colors, cp.propagation_steps);
  RefineInputs ri{&o, &colors, &in.right.graph.neighbors, cp.propagation_steps};
  RefineCache cache;
  TopKSimilarity refined = refine(base, ri, p.refine, cp.propagation_steps, &cache);
  ConsensusLoss loss = consensus_loss(refined, seeds);
  if (grads && loss.used > 0) {
    auto d0 = refine_backward(base, ri, p.refine, cache, loss.d_logits, grads->refine);
    DenseMatrix dl(hl.rows(), hl.cols()), dr(hr.rows(), hr.cols());
    for (std::size_t i = 0; i < base.rows; ++i)
      for (std::size_t c = 0; c < base.k; ++c) {
        double g = d0[i * base.k + c] / tau;
        if (g == 0.0) continue;
        Index j = base.index[i * base.k + c];
        axpy(g, hr.row(j), dl.row(i));
        axpy(g, hl.row(i), dr.row(j));
      }
    head_backward(EmbeddingKind::dual, p, in.left, opt, enc_l, cl, dl, *grads);
    head_backward(EmbeddingKind::dual, p, in.right, opt, enc_r, cr, dr, *grads);
  }
  if (keep) *keep = ConsensusForward{std::move(base), std::move(refined), colors, std::move(o)};
  return loss;
}

inline void train_stage(TrainingState& state, const ModelInputs& in, const SeedAlignment& seeds, Stage stage,
                        const EncoderConfig& ec, const ConsensusParams& cp, const ModelOptions& opt,
                        std::uint64_t seed, TrainLog& log, int epochs = -1) {
  switch (stage) {
    case Stage::structural: break;
    case Stage::temporal:
      if (!state.done(Stage::structural)) throw ContractViolation("temporal stage requires the structural stage");
      break;
    case Stage::mixed:
      if (!state.done(Stage::temporal)) throw ContractViolation("mixed stage requires the temporal stage");
      break;
    case Stage::consensus:
      if (!state.done(Stage::temporal)) throw ContractViolation("consensus stage requires the temporal stage");
      break;
  }
  if (seeds.pairs.empty()) throw ValidationError("training requires at least one seed pair");
  if (epochs < 0) {
    switch (stage) {
      case Stage::structural: epochs = ec.epochs_structural; break;
      case Stage::temporal: epochs = ec.epochs_temporal; break;
      case Stage::mixed: epochs = ec.epochs_mixed; break;
      case Stage::consensus: epochs = cp.epochs; break;
    }
  }
  ModelParams& p = state.params;
  RmspropState main_opt{ec.learning_rate, 0.9, 1e-8, {}};
  RmspropState tune_opt{ec.learning_rate * ec.finetune_lr_scale, 0.9, 1e-8, {}};
  const EmbeddingKind kind = stage == Stage::structural ? EmbeddingKind::structural
                             : stage == Stage::temporal ? EmbeddingKind::temporal
                                                        : EmbeddingKind::mixed;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::vector<std::pair<Index, Index>> order = seeds.pairs;
    Rng(seed, "train.batches", splitmix64(static_cast<std::uint64_t>(stage) * 1000003ull + epoch)).shuffle(order);
    const std::size_t bs = stage == Stage::consensus ? order.size() : ec.batch_size;
    double total = 0.0;
    std::size_t batches = 0, excluded = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += bs) {
      std::vector<std::pair<Index, Index>> batch(order.begin() + static_cast<std::ptrdiff_t>(b0),
                                                 order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), b0 + bs)));
      DropoutSpec dl{ec.dropout, seed, detail::step_site(stage, epoch, batches, 1)};
      DropoutSpec dr{ec.dropout, seed, detail::step_site(stage, epoch, batches, 2)};
      ModelGrads grads = ModelGrads::zeros_like(p);
      double loss = 0.0;
      if (stage == Stage::consensus) {
        DenseMatrix colors = random_colors(in.left.graph.size(), cp.random_dim, seed, static_cast<std::uint64_t>(epoch));
        auto res = consensus_objective(p, in, opt, cp, ec.temperature, SeedAlignment{batch}, colors, dl, dr, &grads);
        if (res.used == 0) throw UnusableRetrieval("no training seed has its counterpart in the top-k candidates");
        loss = res.loss;
        excluded += res.excluded;
      } else {
        loss = contrastive_objective(p, in, opt, kind, batch, ec.temperature, dl, dr, &grads);
      }
      detail::check_finite(loss, grads, epoch);
      if (ec.freeze_reference)
        for (auto& g : grads.encoders) {
          if (g.features.rows() == 0) continue;
          const std::size_t last = g.features.rows() - 1;
          for (std::size_t c = 0; c < g.features.cols(); ++c) g.features(last, c) = 0.0;
        }
      detail::ParamGroup main_group, tune_group;
      for (std::size_t k = 0; k < 4; ++k) {
        if (!opt.active[k]) continue;
        bool own = (stage == Stage::structural && k < 2) || (stage == Stage::temporal && k >= 2);
        bool tuned = (stage == Stage::mixed) || (stage == Stage::consensus && head_types(EmbeddingKind::dual, opt)[k]);
        if (own) detail::add_encoder(main_group, p.encoders[k], grads.encoders[k]);
        else if (tuned) detail::add_encoder(tune_group, p.encoders[k], grads.encoders[k]);
      }
      if (stage == Stage::mixed && learned_weights(opt)) {
        detail::add_mlp(main_group, p.fusion, grads.fusion);
        ++p.fusion.generation;
      }
      if (stage == Stage::consensus) {
        detail::add_mlp(main_group, p.refine, grads.refine);
        ++p.refine.generation;
      }
      if (!main_group.params.empty()) rmsprop_step(main_opt, main_group.params, main_group.grads);
      if (!tune_group.params.empty()) rmsprop_step(tune_opt, tune_group.params, tune_group.grads);
      total += loss;
      ++batches;
    }
    log.record({stage, epoch, total / static_cast<double>(std::max<std::size_t>(batches, 1)), excluded});
  }
  state.completed[static_cast<std::size_t>(stage)] = true;
}

/// Refined top-k correspondence of every left entity at inference time.
inline ConsensusForward consensus_inference(const ModelParams& p, const ModelInputs& in, const ModelOptions& opt,
                                            const ConsensusParams& cp, double tau, std::uint64_t seed) {
  DenseMatrix colors = random_colors(in.left.graph.size(), cp.random_dim, seed, site_id("consensus.inference"));
  ConsensusForward out;
  consensus_objective(p, in, opt, cp, tau, SeedAlignment{}, colors, {}, {}, nullptr, &out);
  return out;
}

}  // namespace tea
