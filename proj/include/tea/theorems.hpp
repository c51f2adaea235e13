#pragma once

// Numerical sweeps over the richness-measurement properties:
//   diversity     log-normalised reference weight is smaller for diverse neighbourhoods
//   neighborhood  the reference share W(n) = (A + n a x) / (A + n x) decreases with n
//   cosine        f(a) = a / sqrt(a^2 + (1 - a)^2 C) increases with a

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace tea {

/// log(w_r + 1) / (log(w_r + 1) + sum_i log(c_i + 1)).
inline double reference_weight(std::size_t reference_count, const std::vector<std::size_t>& feature_counts) {
  double ref = std::log(static_cast<double>(reference_count) + 1.0);
  double total = ref;
  for (auto c : feature_counts) total += std::log(static_cast<double>(c) + 1.0);
  return total > 0.0 ? ref / total : 1.0;
}

inline double reference_weight_low_diversity(std::size_t n, std::size_t w_r) {
  return reference_weight(w_r, {n - w_r});
}

inline double reference_weight_high_diversity(std::size_t n, std::size_t w_r) {
  return reference_weight(w_r, std::vector<std::size_t>(n - w_r, 1));
}

inline double reference_share(double a, double x, double alpha, double n) {
  return (a + n * alpha * x) / (a + n * x);
}

inline double reference_cosine(double alpha, double c) {
  return alpha / std::sqrt(alpha * alpha + (1.0 - alpha) * (1.0 - alpha) * c);
}

struct TheoremSweepConfig {
  std::size_t n_min = 3;
  std::size_t n_max = 50;
  std::vector<double> a_grid = {0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0, 50.0};
  std::vector<double> x_grid = {0.05, 0.1, 0.25, 0.5, 0.69, 1.0, 2.0, 4.0, 8.0, 20.0};
  std::vector<double> alpha_grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.99};
  std::vector<double> c_grid = {0.01, 0.05, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0, 100.0};
  std::size_t cosine_points = 1000;
};

struct TheoremResult {
  std::size_t instances = 0;
  std::vector<std::string> violations;
  bool passed() const noexcept { return violations.empty(); }
};

struct TheoremReport {
  TheoremResult diversity;
  TheoremResult neighborhood;
  TheoremResult cosine;
  std::size_t total_instances() const noexcept {
    return diversity.instances + neighborhood.instances + cosine.instances;
  }
  bool passed() const noexcept { return diversity.passed() && neighborhood.passed() && cosine.passed(); }
};

inline TheoremReport check_theorems(const TheoremSweepConfig& cfg = {}) {
  TheoremReport rep;
  for (std::size_t n = cfg.n_min; n <= cfg.n_max; ++n) {
    for (std::size_t w = 1; w + 2 <= n; ++w) {
      ++rep.diversity.instances;
      double low = reference_weight_low_diversity(n, w);
      double high = reference_weight_high_diversity(n, w);
      if (n - w > 1 && !(high < low))
        rep.diversity.violations.push_back("N=" + std::to_string(n) + " w_r=" + std::to_string(w));
    }
  }
  for (double a : cfg.a_grid)
    for (double x : cfg.x_grid)
      for (double alpha : cfg.alpha_grid)
        for (std::size_t n = 1; n < cfg.n_max; ++n) {
          ++rep.neighborhood.instances;
          double wn = reference_share(a, x, alpha, static_cast<double>(n));
          double wn1 = reference_share(a, x, alpha, static_cast<double>(n + 1));
          if (!(wn1 < wn))
            rep.neighborhood.violations.push_back("A=" + std::to_string(a) + " x=" + std::to_string(x) +
                                                  " alpha=" + std::to_string(alpha) + " n=" + std::to_string(n));
        }
  for (double c : cfg.c_grid) {
    double prev = reference_cosine(0.0, c);
    for (std::size_t k = 1; k <= cfg.cosine_points; ++k) {
      ++rep.cosine.instances;
      double alpha = static_cast<double>(k) / static_cast<double>(cfg.cosine_points);
      double cur = reference_cosine(alpha, c);
      if (!(cur > prev))
        rep.cosine.violations.push_back("C=" + std::to_string(c) + " alpha=" + std::to_string(alpha));
      prev = cur;
    }
  }
  return rep;
}

}  // namespace tea
