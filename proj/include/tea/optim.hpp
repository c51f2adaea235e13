#pragma once

#include <cmath>
#include <vector>

#include "tea/mlp.hpp"
#include "tea/numeric.hpp"

namespace tea {

struct RmspropState {
  double learning_rate = 0.005;
  double decay = 0.9;
  double epsilon = 1e-8;
  std::vector<DenseMatrix> accumulators;  // one per parameter, lazily shaped
};

/// One RMSprop update: acc <- decay*acc + (1-decay)*g^2;  p <- p - lr*g/sqrt(acc + eps).
/// params[i] and grads[i] must have matching shapes; ordering must be stable across calls.
inline void rmsprop_step(RmspropState& state, const std::vector<DenseMatrix*>& params,
                         const std::vector<const DenseMatrix*>& grads) {
  if (params.size() != grads.size()) throw ShapeError("rmsprop_step: parameter/gradient count mismatch");
  for (const auto* g : grads)
    for (double v : g->values())
      if (std::isnan(v)) throw TrainingDiverged("NaN gradient", -1);
  if (state.accumulators.empty()) {
    for (const auto* p : params) state.accumulators.emplace_back(p->rows(), p->cols());
  }
  if (state.accumulators.size() != params.size()) throw ShapeError("rmsprop_step: parameter set changed");
  for (std::size_t i = 0; i < params.size(); ++i) {
    DenseMatrix& p = *params[i];
    const DenseMatrix& g = *grads[i];
    DenseMatrix& acc = state.accumulators[i];
    if (p.rows() != g.rows() || p.cols() != g.cols() || acc.size() != p.size())
      throw ShapeError("rmsprop_step: shape mismatch");
    for (std::size_t k = 0; k < p.size(); ++k) {
      double gk = g.values()[k];
      double& a = acc.values()[k];
      a = state.decay * a + (1.0 - state.decay) * gk * gk;
      p.values()[k] -= state.learning_rate * gk / std::sqrt(a + state.epsilon);
    }
  }
}

inline std::vector<DenseMatrix*> mlp_param_list(MlpParams& p) { return {&p.w1, &p.b1, &p.w2, &p.b2}; }
inline std::vector<const DenseMatrix*> mlp_grad_list(const MlpGrads& g) { return {&g.w1, &g.b1, &g.w2, &g.b2}; }

}  // namespace tea
