// tea-forge: command line front end.
//
// exit codes: 0 ok, 2 config error, 3 data error, 4 training failure, 1 anything else

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tea/tea.hpp"

namespace fs = std::filesystem;
using namespace tea;

namespace {

struct Common {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> iterations;
  bool sinkhorn = false;
  std::map<std::string, bool> ablate;
};

void add_run_options(CLI::App* app, Common& c, bool with_ablation = true) {
  app->add_option("--config", c.config, "key = value config file");
  app->add_option("--seed", c.seed, "rng seed");
  app->add_option("--iterations", c.iterations, "training iterations t");
  app->add_flag("--sinkhorn", c.sinkhorn, "Sinkhorn post-processing at inference");
  if (!with_ablation) return;
  for (const auto& name : ablation_flag_names()) {
    c.ablate[name] = false;
    std::string opt = name;
    for (char& ch : opt)
      if (ch == '_') ch = '-';
    app->add_flag("--ablate-" + opt, c.ablate[name], "set " + name + " = true");
  }
}

RunConfig resolve(const Common& c) {
  RunConfig cfg;
  if (!c.config.empty()) cfg = load_config(c.config, cfg);
  if (c.seed) cfg.rng_seed = *c.seed;
  if (c.iterations) cfg.iterations = *c.iterations;
  if (c.sinkhorn) cfg.sinkhorn = true;
  for (const auto& [name, on] : c.ablate)
    if (on) set_config_value(cfg, name, "true");
  cfg.validate();
  return cfg;
}

AlignmentTask need_task(const Common& c, const RunConfig& cfg) {
  if (c.data.empty()) throw ConfigError("--data is required");
  return load_task(c.data, cfg.seed_fraction);
}

fs::path need_out(const Common& c) {
  if (c.out.empty()) throw ConfigError("--out is required");
  fs::create_directories(c.out);
  return c.out;
}

// A trained checkpoint plus the seed set its E rows were tied to.
struct Loaded {
  AlignmentTask task;
  ModelInputs inputs;
  ModelParams params;
};

Loaded load_model(const Common& c, const RunConfig& cfg, const std::string& checkpoint, const std::string& seeds) {
  Loaded l{need_task(c, cfg), {}, {}};
  // pseudo seeds of later iterations may cover test pairs, so only the seed file itself is checked
  if (!seeds.empty()) l.task.train_seeds = read_pairs(seeds);
  l.task.train_seeds.validate_one_to_one();
  for (auto [a, b] : l.task.train_seeds.pairs)
    if (a >= l.task.left.entity_count() || b >= l.task.right.entity_count())
      throw ValidationError("seed pair out of entity range");
  l.inputs = build_inputs(l.task);
  l.params = load_checkpoint(fs::path(checkpoint));
  for (std::size_t k = 0; k < 4; ++k)
    if (l.params.encoders[k].features.rows() != l.inputs.vocabulary[k] + 1)
      throw ValidationError("checkpoint does not match the dataset (feature rows of type " +
                            std::string(to_string(kAllFeatureTypes[k])) + "); pass the seeds file it was trained on");
  return l;
}

void eval_rows(const AlignmentTask& task, const RunConfig& cfg, std::vector<Index>& rows, std::vector<Index>& pool) {
  for (auto [a, b] : task.test_pairs.pairs) {
    rows.push_back(a);
    if (cfg.candidate_pool == CandidatePool::test) pool.push_back(b);
  }
  if (cfg.candidate_pool == CandidatePool::all)
    for (Index j = 0; j < task.right.entity_count(); ++j) pool.push_back(j);
  std::sort(pool.begin(), pool.end());
}

int run(int argc, char** argv) {
  CLI::App app{"tea-forge: temporal knowledge graph entity alignment"};
  app.require_subcommand(1);
  Common c;

  auto* ingest = app.add_subcommand("ingest", "validate a dataset directory and print its statistics");
  ingest->add_option("--data", c.data, "dataset directory")->required();
  ingest->add_option("--out", c.out, "write a normalised copy here");
  ingest->add_option("--config", c.config, "config file (seed_fraction)");

  SyntheticParams sp;
  auto* synth = app.add_subcommand("synth", "generate a synthetic twin-graph task");
  synth->add_option("--entities", sp.entities)->capture_default_str();
  synth->add_option("--relations", sp.relations)->capture_default_str();
  synth->add_option("--timestamps", sp.timestamps)->capture_default_str();
  synth->add_option("--density", sp.density)->capture_default_str();
  synth->add_option("--temporal-frac", sp.temporal_fraction)->capture_default_str();
  synth->add_option("--noise", sp.noise)->capture_default_str();
  synth->add_option("--seed", sp.seed)->capture_default_str();
  synth->add_option("--seed-fraction", sp.seed_fraction)->capture_default_str();
  synth->add_option("--out", c.out, "output dataset directory")->required();

  auto* train = app.add_subcommand("train", "run the full pipeline and write every artifact");
  train->add_option("--data", c.data)->required();
  train->add_option("--out", c.out)->required();
  add_run_options(train, c);

  std::string checkpoint, seeds_file;
  std::size_t show = 10;
  auto* align = app.add_subcommand("align", "rank candidates for the test entities with a checkpoint");
  align->add_option("--data", c.data)->required();
  align->add_option("--out", c.out)->required();
  align->add_option("--checkpoint", checkpoint)->required();
  align->add_option("--seeds", seeds_file, "seed file the checkpoint was trained on");
  align->add_option("--top", show, "candidates written per entity")->capture_default_str();
  add_run_options(align, c);

  auto* evaluate_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint on the test pairs");
  evaluate_cmd->add_option("--data", c.data)->required();
  evaluate_cmd->add_option("--out", c.out)->required();
  evaluate_cmd->add_option("--checkpoint", checkpoint)->required();
  evaluate_cmd->add_option("--seeds", seeds_file);
  add_run_options(evaluate_cmd, c);

  auto* expand = app.add_subcommand("seed-expand", "select pseudo seeds with a checkpoint");
  expand->add_option("--data", c.data)->required();
  expand->add_option("--out", c.out)->required();
  expand->add_option("--checkpoint", checkpoint)->required();
  expand->add_option("--seeds", seeds_file);
  add_run_options(expand, c);

  std::vector<std::string> variants{"full", "drop_E", "no_consensus", "equal_weights"};
  auto* ablate_cmd = app.add_subcommand("ablate", "paired runs of ablation variants");
  ablate_cmd->add_option("--data", c.data)->required();
  ablate_cmd->add_option("--out", c.out)->required();
  ablate_cmd->add_option("--variants", variants, "variant names, flags joined with '+'")->delimiter(',');
  add_run_options(ablate_cmd, c);

  auto* report = app.add_subcommand("report", "print metrics.tsv / ablation.tsv of a run directory");
  report->add_option("--out", c.out, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (ingest->parsed()) {
    RunConfig cfg = resolve(c);
    auto task = need_task(c, cfg);
    auto stats = [](const char* side, const TemporalKnowledgeGraph& g) {
      std::size_t timed = 0;
      for (const auto& f : g.facts()) timed += f.has_time() ? 1 : 0;
      std::cout << side << ": entities " << g.entity_count() << " relations " << g.relation_count() << " timestamps "
                << g.timestamp_count() << " facts " << g.facts().size() << " temporal " << timed << " intervals "
                << g.interval_vocab().size() << '\n';
    };
    stats("left", task.left);
    stats("right", task.right);
    std::cout << "train seeds " << task.train_seeds.size() << " test pairs " << task.test_pairs.size() << '\n';
    if (!c.out.empty()) save_task(task, c.out);
    return 0;
  }
  if (synth->parsed()) {
    auto st = generate_synthetic_task(sp);
    save_task(st.task, c.out);
    std::cout << "wrote " << c.out << ": " << st.task.left.facts().size() << " left facts, "
              << st.task.right.facts().size() << " right facts (dropped " << st.dropped << ", rewired " << st.rewired
              << ", jittered " << st.jittered << ")\n";
    return 0;
  }
  if (train->parsed()) {
    RunConfig cfg = resolve(c);
    auto task = need_task(c, cfg);
    auto res = run_pipeline(task, cfg, need_out(c), &std::cerr);
    std::cout << "H@1 " << format_value(res.report().hits(1)) << " MRR " << format_value(res.report().mrr()) << '\n';
    return 0;
  }
  if (align->parsed() || evaluate_cmd->parsed()) {
    RunConfig cfg = resolve(c);
    auto m = load_model(c, cfg, checkpoint, seeds_file);
    const ModelOptions opt = cfg.model_options();
    std::vector<Index> rows, pool;
    eval_rows(m.task, cfg, rows, pool);
    auto views = build_final_views(m.params, m.inputs, cfg, opt, rows, pool);
    auto ranking = rank_and_predict(views.final_view, &pool);
    const fs::path out = need_out(c);
    if (align->parsed()) {
      std::ofstream f(out / "alignment.tsv");
      for (Index a : rows) {
        f << a;
        const auto& r = ranking.ranked[a];
        for (std::size_t k = 0; k < std::min(show, r.size()); ++k)
          f << '\t' << r[k] << ':' << format_value(views.final_view.dense(a, r[k]));
        f << '\n';
      }
      std::cout << "wrote " << (out / "alignment.tsv").string() << '\n';
    } else {
      auto slices = make_slice_info(m.task.left, cfg.dense_threshold);
      auto rep = evaluate(ranking, m.task.test_pairs, &slices);
      std::ofstream f(out / "metrics.tsv");
      write_metrics(f, rep);
      std::cout << "H@1 " << format_value(rep.hits(1)) << " MRR " << format_value(rep.mrr()) << '\n';
    }
    return 0;
  }
  if (expand->parsed()) {
    RunConfig cfg = resolve(c);
    auto m = load_model(c, cfg, checkpoint, seeds_file);
    const ModelOptions opt = cfg.model_options();
    SimilarityView s_r{ViewSource::structural,
                       cosine_matrix(embed(EmbeddingKind::structural, m.params, m.inputs.left, opt),
                                     embed(EmbeddingKind::structural, m.params, m.inputs.right, opt)),
                       std::nullopt};
    SimilarityView s_t{ViewSource::temporal,
                       cosine_matrix(embed(EmbeddingKind::temporal, m.params, m.inputs.left, opt),
                                     embed(EmbeddingKind::temporal, m.params, m.inputs.right, opt)),
                       std::nullopt};
    auto sel = select_seeds(s_r, s_t, m.task.train_seeds);
    const fs::path out = need_out(c);
    write_pairs(sel.expanded, out / "seeds_expanded.tsv");
    write_pairs(SeedAlignment{sel.added}, out / "seeds_added.tsv");
    std::cout << "added " << sel.added.size() << " pseudo seeds\n";
    return 0;
  }
  if (ablate_cmd->parsed()) {
    RunConfig cfg = resolve(c);
    auto task = need_task(c, cfg);
    auto rows = ablate(task, cfg, variants, need_out(c), &std::cerr);
    std::cout << "variant\tH@1\tMRR\n";
    for (const auto& r : rows) std::cout << r.name << '\t' << format_value(r.h1) << '\t' << format_value(r.mrr) << '\n';
    return 0;
  }
  if (report->parsed()) {
    const fs::path dir = c.out;
    bool any = false;
    for (const char* name : {"metrics.tsv", "ablation.tsv"}) {
      std::ifstream in(dir / name);
      if (!in) continue;
      any = true;
      std::cout << "== " << name << '\n' << in.rdbuf();
    }
    if (!any) throw ValidationError("no metrics.tsv or ablation.tsv in " + dir.string());
    return 0;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const InvalidParameter& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const EvaluationError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const TrainingDiverged& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return 4;
  } catch (const UnusableRetrieval& e) {
    std::cerr << "training failed: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
