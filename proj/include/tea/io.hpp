#pragma once

// Dataset directory reader/writer.
//
//   triples_1, triples_2   head \t relation \t tail \t start \t end   ("~" = placeholder)
//   ent_links              left \t right                              (ground truth)
//   ent_ids_1, ent_ids_2   id \t name                                 (optional labels)

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tea/tkg.hpp"

namespace tea {

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == '\t' || line[i] == ' ' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != '\t' && line[j] != ' ' && line[j] != '\r') ++j;
    out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline Index parse_id(const std::string& s, const std::string& file, std::size_t line) {
  Index v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ParseError(file, line, "not a non-negative integer: '" + s + "'");
  return v;
}

inline Timestamp parse_time(const std::string& s, const std::string& file, std::size_t line) {
  if (s == "~") return std::nullopt;
  return parse_id(s, file, line);
}

inline std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ValidationError("cannot open " + p.string());
  return in;
}

}  // namespace detail

/// Parses one triples line; exposed for tests.
inline Fact parse_fact_line(const std::string& line, const std::string& file = "<line>", std::size_t lineno = 1) {
  auto f = detail::split_fields(line);
  if (f.size() != 5) throw ParseError(file, lineno, "expected 5 columns, got " + std::to_string(f.size()));
  return Fact{detail::parse_id(f[0], file, lineno), detail::parse_id(f[1], file, lineno),
              detail::parse_id(f[2], file, lineno), detail::parse_time(f[3], file, lineno),
              detail::parse_time(f[4], file, lineno)};
}

struct RawGraph {
  std::vector<Fact> facts;
  std::vector<std::pair<Index, std::string>> names;
};

inline RawGraph read_graph_files(const std::filesystem::path& dir, const std::string& triples, const std::string& ids) {
  RawGraph g;
  {
    auto path = dir / triples;
    auto in = detail::open_in(path);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (detail::split_fields(line).empty()) continue;
      g.facts.push_back(parse_fact_line(line, path.string(), n));
    }
  }
  auto idpath = dir / ids;
  if (std::filesystem::exists(idpath)) {
    auto in = detail::open_in(idpath);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      auto tab = line.find('\t');
      std::string id = line.substr(0, tab);
      std::string name = tab == std::string::npos ? std::string() : line.substr(tab + 1);
      g.names.emplace_back(detail::parse_id(id, idpath.string(), n), name);
    }
  }
  return g;
}

inline TemporalKnowledgeGraph assemble_graph(const RawGraph& raw, std::size_t min_entities) {
  std::size_t ne = min_entities, nr = 0, nt = 0;
  for (const auto& f : raw.facts) {
    ne = std::max({ne, f.head + 1, f.tail + 1});
    nr = std::max(nr, f.relation + 1);
    if (f.start) nt = std::max(nt, *f.start + 1);
    if (f.end) nt = std::max(nt, *f.end + 1);
  }
  for (const auto& [id, _] : raw.names) ne = std::max(ne, id + 1);
  TemporalKnowledgeGraph g(ne, nr, nt, raw.facts);
  bool any_name = std::any_of(raw.names.begin(), raw.names.end(), [](const auto& p) { return !p.second.empty(); });
  if (any_name) {
    g.names().assign(ne, std::string());
    for (const auto& [id, name] : raw.names) g.names()[id] = name;
  }
  return g;
}

/// Deterministic split: links are stably sorted by (left, right); the first
/// ceil(fraction * n) become training seeds, the rest test pairs.
inline std::pair<SeedAlignment, SeedAlignment> split_links(std::vector<std::pair<Index, Index>> links,
                                                           double seed_fraction) {
  if (!(seed_fraction > 0.0 && seed_fraction < 1.0)) throw InvalidParameter("seed_fraction must be in (0, 1)");
  std::stable_sort(links.begin(), links.end());
  auto n_train = static_cast<std::size_t>(std::ceil(seed_fraction * static_cast<double>(links.size()) - 1e-9));
  n_train = std::min(n_train, links.size());
  SeedAlignment train, test;
  train.pairs.assign(links.begin(), links.begin() + static_cast<std::ptrdiff_t>(n_train));
  test.pairs.assign(links.begin() + static_cast<std::ptrdiff_t>(n_train), links.end());
  return {train, test};
}

inline std::vector<std::pair<Index, Index>> read_links(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  std::vector<std::pair<Index, Index>> links;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    auto f = detail::split_fields(line);
    if (f.empty()) continue;
    if (f.size() != 2) throw ParseError(path.string(), n, "expected 2 columns, got " + std::to_string(f.size()));
    links.emplace_back(detail::parse_id(f[0], path.string(), n), detail::parse_id(f[1], path.string(), n));
  }
  return links;
}

inline AlignmentTask load_task(const std::filesystem::path& dir, double seed_fraction) {
  if (!std::filesystem::is_directory(dir)) throw ValidationError("not a dataset directory: " + dir.string());
  auto raw1 = read_graph_files(dir, "triples_1", "ent_ids_1");
  auto raw2 = read_graph_files(dir, "triples_2", "ent_ids_2");
  auto links = read_links(dir / "ent_links");
  std::size_t min_l = 0, min_r = 0;
  for (auto [a, b] : links) {
    min_l = std::max(min_l, a + 1);
    min_r = std::max(min_r, b + 1);
  }
  SeedAlignment all{links};
  all.validate_one_to_one();
  auto [train, test] = split_links(links, seed_fraction);
  AlignmentTask task{assemble_graph(raw1, min_l), assemble_graph(raw2, min_r), std::move(train), std::move(test)};
  task.validate();
  return task;
}

namespace detail {

inline std::string time_str(const Timestamp& t) { return t ? std::to_string(*t) : std::string("~"); }

inline void write_graph(const TemporalKnowledgeGraph& g, const std::filesystem::path& triples,
                        const std::filesystem::path& ids) {
  std::ofstream out(triples);
  if (!out) throw ValidationError("cannot write " + triples.string());
  for (const auto& f : g.facts())
    out << f.head << '\t' << f.relation << '\t' << f.tail << '\t' << time_str(f.start) << '\t' << time_str(f.end)
        << '\n';
  std::ofstream idout(ids);
  if (!idout) throw ValidationError("cannot write " + ids.string());
  for (Index e = 0; e < g.entity_count(); ++e)
    idout << e << '\t' << (g.names().empty() ? std::string() : g.names()[e]) << '\n';
}

}  // namespace detail

/// Writes the task in the dataset layout; train seeds precede test pairs in ent_links.
inline void save_task(const AlignmentTask& task, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  detail::write_graph(task.left, dir / "triples_1", dir / "ent_ids_1");
  detail::write_graph(task.right, dir / "triples_2", dir / "ent_ids_2");
  std::ofstream out(dir / "ent_links");
  if (!out) throw ValidationError("cannot write ent_links");
  for (auto [a, b] : task.train_seeds.pairs) out << a << '\t' << b << '\n';
  for (auto [a, b] : task.test_pairs.pairs) out << a << '\t' << b << '\n';
}

inline void write_pairs(const SeedAlignment& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  for (auto [a, b] : s.pairs) out << a << '\t' << b << '\n';
}

inline SeedAlignment read_pairs(const std::filesystem::path& path) { return SeedAlignment{read_links(path)}; }

}  // namespace tea
