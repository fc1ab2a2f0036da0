#pragma once

// Dataset ingestion: libsvm text (optionally gzip-compressed), a synthetic
// sparse regression generator, and whitespace-separated edge lists.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <zlib.h>

#include "asyncopt/model_core.hpp"
#include "asyncopt/objectives.hpp"
#include "asyncopt/rng.hpp"

namespace asyncopt {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

namespace detail {

inline bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

inline std::string read_file(const std::string& path) {
  if (ends_with(path, ".gz")) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("cannot open " + path);
    std::string out;
    char buf[1 << 16];
    int got = 0;
    while ((got = gzread(f, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(got));
    const bool failed = got < 0;
    gzclose(f);
    if (failed) throw std::runtime_error("gzip read error in " + path);
    return out;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& data) {
  if (ends_with(path, ".gz")) {
    gzFile f = gzopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    const int wrote = data.empty() ? 0 : gzwrite(f, data.data(), static_cast<unsigned>(data.size()));
    gzclose(f);
    if (!data.empty() && wrote <= 0) throw std::runtime_error("gzip write error in " + path);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << data;
  if (!out) throw std::runtime_error("write error in " + path);
}

/// Calls fn(line_number, line) for each line, line numbers starting at 1.
template <class Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    fn(++line_no, line);
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t b = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > b) out.push_back(line.substr(b, i - b));
  }
  return out;
}

inline std::optional<double> to_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<std::uint64_t> to_uint(std::string_view s) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace detail

/// Parses "label idx:val ..." lines with 1-based, strictly increasing
/// indices. d is max index + 1 unless `dim` is given.
inline RegressionDataset parse_libsvm_text(std::string_view text, std::optional<std::size_t> dim = std::nullopt) {
  std::vector<std::vector<index_t>> idx;
  std::vector<std::vector<double>> val;
  RegressionDataset data;
  std::size_t max_index = 0;
  detail::for_each_line(text, [&](std::size_t ln, std::string_view line) {
    const auto hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tok = detail::split_ws(line);
    if (tok.empty()) return;
    const auto label = detail::to_double(tok[0]);
    if (!label || !std::isfinite(*label)) throw ParseError(ln, "bad label '" + std::string(tok[0]) + "'");
    std::vector<index_t> ri;
    std::vector<double> rv;
    for (std::size_t t = 1; t < tok.size(); ++t) {
      const auto colon = tok[t].find(':');
      if (colon == std::string_view::npos) throw ParseError(ln, "expected idx:val, got '" + std::string(tok[t]) + "'");
      const auto k = detail::to_uint(tok[t].substr(0, colon));
      const auto v = detail::to_double(tok[t].substr(colon + 1));
      if (!k || *k == 0) throw ParseError(ln, "bad feature index '" + std::string(tok[t]) + "'");
      if (*k > 0xffffffffULL) throw ParseError(ln, "feature index too large");
      if (!v || !std::isfinite(*v)) throw ParseError(ln, "bad feature value '" + std::string(tok[t]) + "'");
      const auto i0 = static_cast<index_t>(*k - 1);
      if (!ri.empty() && i0 <= ri.back()) throw ParseError(ln, "feature indices must be strictly increasing");
      ri.push_back(i0);
      rv.push_back(*v);
      max_index = std::max<std::size_t>(max_index, static_cast<std::size_t>(i0) + 1);
    }
    data.labels.push_back(*label);
    idx.push_back(std::move(ri));
    val.push_back(std::move(rv));
  });
  data.d = max_index;
  if (dim) {
    if (*dim < max_index) throw std::invalid_argument("dimension override smaller than the largest feature index");
    data.d = *dim;
  }
  data.rows.reserve(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) data.rows.emplace_back(data.d, std::move(idx[i]), std::move(val[i]));
  return data;
}

inline RegressionDataset parse_libsvm(const std::string& path, std::optional<std::size_t> dim = std::nullopt) {
  return parse_libsvm_text(detail::read_file(path), dim);
}

inline std::string format_libsvm(const RegressionDataset& data) {
  std::string out;
  char buf[64];
  for (std::size_t i = 0; i < data.rows.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", data.labels[i]);
    out += buf;
    const auto idx = data.rows[i].indices();
    const auto val = data.rows[i].values();
    for (std::size_t k = 0; k < idx.size(); ++k) {
      std::snprintf(buf, sizeof buf, " %u:%.17g", static_cast<unsigned>(idx[k]) + 1u, val[k]);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

inline void write_libsvm(const std::string& path, const RegressionDataset& data) {
  detail::write_file(path, format_libsvm(data));
}

enum class LabelModel { linear, logistic };

struct SyntheticSpec {
  std::size_t n = 100000;
  std::size_t d = 1000;
  std::size_t nnz = 20;
  LabelModel label_model = LabelModel::linear;
  std::uint64_t seed = 1;
  double noise = 0.1;  // standard deviation of the linear-model label noise
};

/// Planted weights w† with N(0,1) entries.
inline std::vector<double> planted_weights(const SyntheticSpec& spec) {
  SplitMix64 rng(counter_hash(spec.seed, streams::kData, 0));
  std::normal_distribution<double> normal;
  std::vector<double> w(spec.d);
  for (double& v : w) v = normal(rng);
  return w;
}

/// Rows with `nnz` distinct uniform coordinates and N(0,1) values. Row i uses
/// its own generator seeded from (seed, i), so the output does not depend
/// on `threads`.
inline RegressionDataset gen_synthetic(const SyntheticSpec& spec, unsigned threads = 1) {
  if (spec.n == 0 || spec.d == 0) throw std::invalid_argument("synthetic spec needs n, d >= 1");
  if (spec.nnz == 0 || spec.nnz > spec.d) throw std::invalid_argument("synthetic spec needs 1 <= nnz <= d");
  const auto w = planted_weights(spec);
  RegressionDataset data;
  data.d = spec.d;
  data.rows.resize(spec.n);
  data.labels.resize(spec.n);

  auto make_rows = [&](std::size_t begin, std::size_t end) {
    std::normal_distribution<double> normal;
    std::vector<index_t> picked;
    for (std::size_t i = begin; i < end; ++i) {
      SplitMix64 rng(counter_hash(spec.seed, streams::kData, i + 1));
      // Floyd's sampling without replacement.
      picked.clear();
      for (std::size_t j = spec.d - spec.nnz; j < spec.d; ++j) {
        const auto t = static_cast<index_t>(bounded(rng(), j + 1));
        if (std::find(picked.begin(), picked.end(), t) == picked.end()) {
          picked.push_back(t);
        } else {
          picked.push_back(static_cast<index_t>(j));
        }
      }
      std::sort(picked.begin(), picked.end());
      std::vector<double> vals(spec.nnz);
      double margin = 0.0;
      for (std::size_t k = 0; k < spec.nnz; ++k) {
        do {
          vals[k] = normal(rng);
        } while (vals[k] == 0.0);
        margin += w[picked[k]] * vals[k];
      }
      if (spec.label_model == LabelModel::linear) {
        data.labels[i] = margin + spec.noise * normal(rng);
      } else {
        data.labels[i] = unit_double(rng()) < detail::sigmoid(margin) ? 1.0 : -1.0;
      }
      data.rows[i] = SparseVector(spec.d, picked, std::move(vals));
    }
  };

  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(spec.n)));
  if (threads == 1) {
    make_rows(0, spec.n);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back(make_rows, spec.n * t / threads, spec.n * (t + 1) / threads);
    }
    for (auto& th : pool) th.join();
  }
  return data;
}

/// "u v" lines with non-negative integer ids; '#' and '%' start comments.
/// Self-loops are dropped and duplicate (undirected) edges merged.
inline VertexCoverProblem parse_edge_list_text(std::string_view text, double beta = 1.0) {
  VertexCoverProblem p;
  p.beta = beta;
  std::size_t max_id = 0;
  bool any = false;
  detail::for_each_line(text, [&](std::size_t ln, std::string_view line) {
    const auto c = line.find_first_of("#%");
    if (c != std::string_view::npos) line = line.substr(0, c);
    const auto tok = detail::split_ws(line);
    if (tok.empty()) return;
    if (tok.size() != 2) throw ParseError(ln, "expected two vertex ids");
    const auto u = detail::to_uint(tok[0]);
    const auto v = detail::to_uint(tok[1]);
    if (!u || !v) throw ParseError(ln, "vertex ids must be non-negative integers");
    if (*u > 0xfffffffeULL || *v > 0xfffffffeULL) throw ParseError(ln, "vertex id too large");
    any = true;
    max_id = std::max<std::size_t>(max_id, std::max(*u, *v));
    if (*u == *v) return;
    p.edges.emplace_back(static_cast<index_t>(std::min(*u, *v)), static_cast<index_t>(std::max(*u, *v)));
  });
  std::sort(p.edges.begin(), p.edges.end());
  p.edges.erase(std::unique(p.edges.begin(), p.edges.end()), p.edges.end());
  p.num_vertices = any ? max_id + 1 : 0;
  return p;
}

inline VertexCoverProblem parse_edge_list(const std::string& path, double beta = 1.0) {
  return parse_edge_list_text(detail::read_file(path), beta);
}

}  // namespace asyncopt
