#pragma once

// Text checkpoint of every model parameter matrix.
//
//   tea-forge-checkpoint 1
//   matrix <name> <rows> <cols>
//   <one line per row, values as C99 hex floats>
//   ...
//   end
//
// Hex floats make the round trip bit-exact. Names:
//   encoder.<E|R|T|I>.features, encoder.<t>.transform.<l>, encoder.<t>.gat.<l>,
//   encoder.<t>.relation.<l>, fusion.{w1,b1,w2,b2}, refine.{w1,b1,w2,b2}

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "tea/model.hpp"

namespace tea {

namespace detail {

inline void write_matrix(std::ostream& out, const std::string& name, const DenseMatrix& m) {
  out << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  char buf[64];
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%a", m(r, c));
      if (c) out << ' ';
      out << buf;
    }
    out << '\n';
  }
}

inline std::string encoder_prefix(std::size_t k) { return "encoder." + std::string(to_string(kAllFeatureTypes[k])); }

}  // namespace detail

inline void save_checkpoint(const ModelParams& p, std::ostream& out) {
  out << "tea-forge-checkpoint 1\n";
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& e = p.encoders[k];
    const std::string pre = detail::encoder_prefix(k);
    detail::write_matrix(out, pre + ".features", e.features);
    for (std::size_t l = 0; l < e.transforms.size(); ++l) {
      detail::write_matrix(out, pre + ".transform." + std::to_string(l), e.transforms[l]);
      detail::write_matrix(out, pre + ".gat." + std::to_string(l), e.gat_vectors[l]);
      detail::write_matrix(out, pre + ".relation." + std::to_string(l), e.relation_scores[l]);
    }
  }
  for (auto [name, mlp] : {std::pair{"fusion", &p.fusion}, std::pair{"refine", &p.refine}}) {
    detail::write_matrix(out, std::string(name) + ".w1", mlp->w1);
    detail::write_matrix(out, std::string(name) + ".b1", mlp->b1);
    detail::write_matrix(out, std::string(name) + ".w2", mlp->w2);
    detail::write_matrix(out, std::string(name) + ".b2", mlp->b2);
  }
  out << "end\n";
}

inline void save_checkpoint(const ModelParams& p, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write checkpoint " + path.string());
  save_checkpoint(p, out);
}

inline ModelParams load_checkpoint(std::istream& in, const std::string& origin = "<checkpoint>") {
  std::string line;
  std::size_t n = 0;
  auto next = [&]() -> std::string& {
    if (!std::getline(in, line)) throw ParseError(origin, n + 1, "unexpected end of checkpoint");
    ++n;
    return line;
  };
  if (next() != "tea-forge-checkpoint 1") throw ParseError(origin, n, "not a version 1 checkpoint");
  std::map<std::string, DenseMatrix> mats;
  while (true) {
    std::istringstream head(next());
    std::string tag, name;
    std::size_t rows = 0, cols = 0;
    head >> tag;
    if (tag == "end") break;
    if (tag != "matrix" || !(head >> name >> rows >> cols)) throw ParseError(origin, n, "bad matrix header");
    DenseMatrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::string& row = next();
      const char* p = row.c_str();
      for (std::size_t c = 0; c < cols; ++c) {
        char* end = nullptr;
        m(r, c) = std::strtod(p, &end);
        if (end == p) throw ParseError(origin, n, "bad value in matrix " + name);
        p = end;
      }
    }
    mats[name] = std::move(m);
  }
  auto take = [&](const std::string& name) {
    auto it = mats.find(name);
    if (it == mats.end()) throw ParseError(origin, n, "missing matrix " + name);
    return it->second;
  };
  ModelParams p;
  for (std::size_t k = 0; k < 4; ++k) {
    const std::string pre = detail::encoder_prefix(k);
    auto& e = p.encoders[k];
    e.features = take(pre + ".features");
    for (std::size_t l = 0; mats.count(pre + ".transform." + std::to_string(l)); ++l) {
      e.transforms.push_back(take(pre + ".transform." + std::to_string(l)));
      e.gat_vectors.push_back(take(pre + ".gat." + std::to_string(l)));
      e.relation_scores.push_back(take(pre + ".relation." + std::to_string(l)));
    }
  }
  auto mlp = [&](const std::string& name, OutputActivation act) {
    MlpParams m{take(name + ".w1"), take(name + ".b1"), take(name + ".w2"), take(name + ".b2"), act, 0};
    m.check_shapes();
    return m;
  };
  p.fusion = mlp("fusion", OutputActivation::sigmoid);
  p.refine = mlp("refine", OutputActivation::identity);
  return p;
}

inline ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  return load_checkpoint(in, path.string());
}

}  // namespace tea
