#pragma once

// Run configuration in a flat `key = value` text format. `#` starts a comment.
// Every field is addressable; unknown keys are errors.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "tea/consensus.hpp"
#include "tea/encoder.hpp"
#include "tea/model.hpp"

namespace tea {

struct AblationFlags {
  std::array<bool, 4> drop{};            // drop_E, drop_R, drop_T, drop_I
  std::array<bool, 4> drop_attention{};  // drop_attention_E ... (uniform aggregation)
  bool gat_attention = false;
  bool relation_attention = false;
  bool equal_weights = false;
  bool no_dynamic_weighting = false;
  bool no_consensus = false;
  bool no_dual_view = false;

  friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
};

enum class CandidatePool { test, all };

struct RunConfig {
  EncoderConfig encoder;
  ConsensusParams consensus;
  int iterations = 2;
  AblationFlags ablation;
  bool sinkhorn = false;
  std::size_t sinkhorn_iterations = 100;
  std::uint64_t rng_seed = 1;
  double seed_fraction = 0.3;
  std::size_t dense_threshold = 5;
  CandidatePool candidate_pool = CandidatePool::test;

  void validate() const {
    encoder.validate();
    consensus.validate();
    if (iterations < 1) throw ConfigError("iterations must be >= 1");
    if (encoder.epochs_structural < 0 || encoder.epochs_temporal < 0 || encoder.epochs_mixed < 0 ||
        consensus.epochs < 0)
      throw ConfigError("epoch counts must be >= 0");
    if (!(seed_fraction > 0.0 && seed_fraction < 1.0)) throw ConfigError("seed_fraction must be in (0, 1)");
    if (!(encoder.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    int mechanisms = (ablation.gat_attention ? 1 : 0) + (ablation.relation_attention ? 1 : 0);
    for (bool b : ablation.drop_attention) mechanisms += b ? 1 : 0;
    if (mechanisms > 1) throw ConfigError("at most one attention-mechanism flag may be active");
    if (ablation.drop[0] && ablation.drop[1] && ablation.drop[2] && ablation.drop[3])
      throw ConfigError("cannot drop every feature type");
  }

  ModelOptions model_options() const {
    ModelOptions o;
    for (std::size_t k = 0; k < 4; ++k) {
      o.active[k] = !ablation.drop[k];
      if (ablation.drop_attention[k]) o.attention[k] = AttentionMode::uniform;
      else if (ablation.gat_attention) o.attention[k] = AttentionMode::gat;
      else if (ablation.relation_attention) o.attention[k] = AttentionMode::relation;
    }
    o.equal_weights = ablation.equal_weights;
    o.dynamic_weighting = !ablation.no_dynamic_weighting;
    o.consensus = !ablation.no_consensus;
    o.dual_view = !ablation.no_dual_view;
    o.attention_layers = encoder.attention_layers;
    return o;
  }

  friend bool operator==(const RunConfig& a, const RunConfig& b) { return to_text(a) == to_text(b); }
  static std::string to_text(const RunConfig& c);
};

namespace detail {

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("bad value for " + key + ": '" + v + "'");
  return out;
}

inline double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw ConfigError("bad value for " + key + ": '" + v + "'");
    return d;
  } catch (const std::logic_error&) {
    throw ConfigError("bad value for " + key + ": '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("bad boolean for " + key + ": '" + v + "'");
}

// shortest text that reads back to the same double
inline std::string real_text(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

struct ConfigField {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename T>
ConfigField size_field(std::string key, T RunConfig::*outer, std::size_t T::*inner) {
  return {key, [=](const RunConfig& c) { return std::to_string(c.*outer.*inner); },
          [=](RunConfig& c, const std::string& v) { c.*outer.*inner = parse_number<std::size_t>(key, v); }};
}
template <typename T>
ConfigField int_field(std::string key, T RunConfig::*outer, int T::*inner) {
  return {key, [=](const RunConfig& c) { return std::to_string(c.*outer.*inner); },
          [=](RunConfig& c, const std::string& v) { c.*outer.*inner = parse_number<int>(key, v); }};
}
template <typename T>
ConfigField real_field(std::string key, T RunConfig::*outer, double T::*inner) {
  return {key, [=](const RunConfig& c) { return real_text(c.*outer.*inner); },
          [=](RunConfig& c, const std::string& v) { c.*outer.*inner = parse_real(key, v); }};
}
inline ConfigField flag_field(std::string key, std::function<bool&(RunConfig&)> ref) {
  return {key, [=](const RunConfig& c) { return ref(const_cast<RunConfig&>(c)) ? "true" : "false"; },
          [=](RunConfig& c, const std::string& v) { ref(c) = parse_bool(key, v); }};
}

inline const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = [] {
    using E = EncoderConfig;
    using C = ConsensusParams;
    std::vector<ConfigField> f{
        size_field("dim", &RunConfig::encoder, &E::dim),
        size_field("gnn_depth", &RunConfig::encoder, &E::depth),
        size_field("attention_layers", &RunConfig::encoder, &E::attention_layers),
        size_field("batch_size", &RunConfig::encoder, &E::batch_size),
        real_field("dropout", &RunConfig::encoder, &E::dropout),
        real_field("temperature", &RunConfig::encoder, &E::temperature),
        real_field("learning_rate", &RunConfig::encoder, &E::learning_rate),
        int_field("epochs_structural", &RunConfig::encoder, &E::epochs_structural),
        int_field("epochs_temporal", &RunConfig::encoder, &E::epochs_temporal),
        int_field("epochs_mixed", &RunConfig::encoder, &E::epochs_mixed),
        size_field("fusion_hidden", &RunConfig::encoder, &E::fusion_hidden),
        real_field("finetune_lr_scale", &RunConfig::encoder, &E::finetune_lr_scale),
        flag_field("freeze_reference", [](RunConfig& c) -> bool& { return c.encoder.freeze_reference; }),
        size_field("random_dim", &RunConfig::consensus, &C::random_dim),
        size_field("propagation_steps", &RunConfig::consensus, &C::propagation_steps),
        size_field("consensus_hidden", &RunConfig::consensus, &C::hidden),
        size_field("top_k", &RunConfig::consensus, &C::k),
        int_field("epochs_consensus", &RunConfig::consensus, &C::epochs),
        {"iterations", [](const RunConfig& c) { return std::to_string(c.iterations); },
         [](RunConfig& c, const std::string& v) { c.iterations = parse_number<int>("iterations", v); }},
        {"rng_seed", [](const RunConfig& c) { return std::to_string(c.rng_seed); },
         [](RunConfig& c, const std::string& v) { c.rng_seed = parse_number<std::uint64_t>("rng_seed", v); }},
        {"seed_fraction", [](const RunConfig& c) { return real_text(c.seed_fraction); },
         [](RunConfig& c, const std::string& v) { c.seed_fraction = parse_real("seed_fraction", v); }},
        {"dense_threshold", [](const RunConfig& c) { return std::to_string(c.dense_threshold); },
         [](RunConfig& c, const std::string& v) {
           c.dense_threshold = parse_number<std::size_t>("dense_threshold", v);
         }},
        {"candidate_pool", [](const RunConfig& c) { return c.candidate_pool == CandidatePool::test ? "test" : "all"; },
         [](RunConfig& c, const std::string& v) {
           if (v == "test") c.candidate_pool = CandidatePool::test;
           else if (v == "all") c.candidate_pool = CandidatePool::all;
           else throw ConfigError("candidate_pool must be 'test' or 'all'");
         }},
        flag_field("sinkhorn", [](RunConfig& c) -> bool& { return c.sinkhorn; }),
        {"sinkhorn_iterations", [](const RunConfig& c) { return std::to_string(c.sinkhorn_iterations); },
         [](RunConfig& c, const std::string& v) {
           c.sinkhorn_iterations = parse_number<std::size_t>("sinkhorn_iterations", v);
         }},
    };
    const char* names = "ERTI";
    for (std::size_t k = 0; k < 4; ++k)
      f.push_back(flag_field(std::string("drop_") + names[k],
                             [k](RunConfig& c) -> bool& { return c.ablation.drop[k]; }));
    for (std::size_t k = 0; k < 4; ++k)
      f.push_back(flag_field(std::string("drop_attention_") + names[k],
                             [k](RunConfig& c) -> bool& { return c.ablation.drop_attention[k]; }));
    f.push_back(flag_field("gat_attention", [](RunConfig& c) -> bool& { return c.ablation.gat_attention; }));
    f.push_back(flag_field("relation_attention", [](RunConfig& c) -> bool& { return c.ablation.relation_attention; }));
    f.push_back(flag_field("equal_weights", [](RunConfig& c) -> bool& { return c.ablation.equal_weights; }));
    f.push_back(
        flag_field("no_dynamic_weighting", [](RunConfig& c) -> bool& { return c.ablation.no_dynamic_weighting; }));
    f.push_back(flag_field("no_consensus", [](RunConfig& c) -> bool& { return c.ablation.no_consensus; }));
    f.push_back(flag_field("no_dual_view", [](RunConfig& c) -> bool& { return c.ablation.no_dual_view; }));
    return f;
  }();
  return fields;
}

}  // namespace detail

/// Names of the boolean ablation keys, in a stable order.
inline std::vector<std::string> ablation_flag_names() {
  std::vector<std::string> out;
  for (const auto& f : detail::config_fields())
    if (f.key.rfind("drop_", 0) == 0 || f.key.find("attention") != std::string::npos || f.key == "equal_weights" ||
        f.key.rfind("no_", 0) == 0)
      if (f.key != "attention_layers") out.push_back(f.key);
  return out;
}

inline void set_config_value(RunConfig& c, const std::string& key, const std::string& value) {
  for (const auto& f : detail::config_fields())
    if (f.key == key) {
      f.set(c, value);
      return;
    }
  throw ConfigError("unknown config key '" + key + "'");
}

inline std::string get_config_value(const RunConfig& c, const std::string& key) {
  for (const auto& f : detail::config_fields())
    if (f.key == key) return f.get(c);
  throw ConfigError("unknown config key '" + key + "'");
}

/// Applies `key = value` lines on top of `base`.
inline RunConfig parse_config(const std::string& text, RunConfig base = {}, const std::string& origin = "<config>") {
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(origin + ":" + std::to_string(n) + ": expected key = value");
    std::string key = detail::trim(line.substr(0, eq)), value = detail::trim(line.substr(eq + 1));
    try {
      set_config_value(base, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return base;
}

inline RunConfig load_config(const std::filesystem::path& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base), path.string());
}

inline std::string RunConfig::to_text(const RunConfig& c) {
  std::string out;
  for (const auto& f : detail::config_fields()) out += f.key + " = " + f.get(c) + "\n";
  return out;
}

inline std::string resolved_config(const RunConfig& c) { return RunConfig::to_text(c); }

}  // namespace tea
