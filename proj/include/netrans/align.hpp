// align.hpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Many-to-many grapheme alignment. A graphone pairs a source segment with a
// target segment; EM over monotone segmentation lattices learns a unigram
// distribution over graphones, and Viterbi decoding turns each training
// pair into a graphone sequence for language model training.
//
// Segment shapes are restricted to (i,1), (1,j) and, when the target side
// may be empty, (i,0). Source-empty graphones (0,j) are only generated when
// allow_source_deletion is set.

#ifndef NETRANS_ALIGN_HPP_
#define NETRANS_ALIGN_HPP_

#include <algorithm>
#include <cmath>
#include <compare>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "netrans/corpus.hpp"
#include "netrans/error.hpp"
#include "netrans/parallel.hpp"
#include "netrans/symbol_table.hpp"
#include "netrans/text_util.hpp"
#include "netrans/utf8.hpp"

namespace netrans {

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

inline double LogAdd(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

struct Graphone {
  std::vector<Label> source;
  std::vector<Label> target;

  auto operator<=>(const Graphone&) const = default;
};

struct SegmentShape {
  int source_len;
  int target_len;
};

struct AlignmentConfig {
  int max_source_len = 2;
  int max_target_len = 2;
  bool allow_target_deletion = true;
  bool allow_source_deletion = false;
  int max_iterations = 11;
  // Stop when the per-pair log-likelihood gain drops below this.
  double convergence_epsilon = 1e-4;
  double prune_threshold = 1e-7;
  Tokenization source_tokenization = Tokenization::kChars;
  Tokenization target_tokenization = Tokenization::kChars;

  void Validate() const {
    if (max_source_len < 1 || max_target_len < 1)
      throw ConfigError("segment lengths must be >= 1");
    if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
    if (prune_threshold < 0 || prune_threshold >= 1)
      throw ConfigError("prune_threshold must lie in [0, 1)");
  }

  std::vector<SegmentShape> Shapes() const {
    std::vector<SegmentShape> shapes;
    for (int i = 1; i <= max_source_len; ++i) shapes.push_back({i, 1});
    for (int j = 2; j <= max_target_len; ++j) shapes.push_back({1, j});
    if (allow_target_deletion)
      for (int i = 1; i <= max_source_len; ++i) shapes.push_back({i, 0});
    if (allow_source_deletion)
      for (int j = 1; j <= max_target_len; ++j) shapes.push_back({0, j});
    return shapes;
  }
};

class GraphoneTable {
 public:
  int Add(std::span<const Label> source, std::span<const Label> target) {
    Key(source, target, scratch_);
    auto it = index_.find(scratch_);
    if (it != index_.end()) return it->second;
    const int id = static_cast<int>(graphones_.size());
    index_.emplace(scratch_, id);
    graphones_.push_back({{source.begin(), source.end()},
                          {target.begin(), target.end()}});
    return id;
  }
  int Add(const Graphone& g) { return Add(g.source, g.target); }

  std::optional<int> Find(std::span<const Label> source,
                          std::span<const Label> target) const {
    std::string key;
    Key(source, target, key);
    auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<int> Find(const Graphone& g) const {
    return Find(g.source, g.target);
  }

  const Graphone& at(int id) const { return graphones_.at(id); }
  std::size_t size() const { return graphones_.size(); }

 private:
  static void Key(std::span<const Label> s, std::span<const Label> t,
                  std::string& out) {
    out.clear();
    auto put = [&out](Label v) {
      out.append(reinterpret_cast<const char*>(&v), sizeof(v));
    };
    put(static_cast<Label>(s.size()));
    for (Label l : s) put(l);
    for (Label l : t) put(l);
  }

  std::vector<Graphone> graphones_;
  std::unordered_map<std::string, int> index_;
  std::string scratch_;
};

struct AlignmentModel {
  AlignmentConfig config;
  SymbolTable source_symbols;
  SymbolTable target_symbols;
  GraphoneTable graphones;
  std::vector<double> logprob;  // natural log, kLogZero once pruned

  double LogProb(int id) const { return logprob.at(id); }

  double TotalProbability() const {
    double total = 0;
    for (double lp : logprob) total += std::exp(lp);
    return total;
  }

  // `s+h|ш`; an empty segment renders as `_`.
  std::string GraphoneText(const Graphone& g) const {
    auto seg = [](const std::vector<Label>& labels, const SymbolTable& syms) {
      if (labels.empty()) return std::string("_");
      std::string out;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (i) out.push_back('+');
        out += syms.Symbol(labels[i]);
      }
      return out;
    };
    return seg(g.source, source_symbols) + "|" + seg(g.target, target_symbols);
  }
  std::string GraphoneText(int id) const { return GraphoneText(graphones.at(id)); }

  // Parses graphone notation against the model's symbol tables. Returns
  // nullopt when a segment names an unknown grapheme.
  std::optional<Graphone> ParseGraphone(std::string_view text) const {
    auto bar = text.find('|');
    if (bar == std::string_view::npos || text.find('|', bar + 1) != std::string_view::npos)
      return std::nullopt;
    Graphone g;
    auto seg = [](std::string_view s, const SymbolTable& syms,
                  std::vector<Label>& out) {
      if (s == "_") return true;
      for (auto part : text::SplitOn(s, '+')) {
        auto id = syms.Find(std::string(part));
        if (!id || *id == kEpsilon) return false;
        out.push_back(*id);
      }
      return true;
    };
    if (!seg(text.substr(0, bar), source_symbols, g.source) ||
        !seg(text.substr(bar + 1), target_symbols, g.target))
      return std::nullopt;
    if (g.source.empty() && g.target.empty()) return std::nullopt;
    return g;
  }

  std::optional<std::vector<Label>> Encode(std::string_view token,
                                           bool source_side) const {
    const auto& syms = source_side ? source_symbols : target_symbols;
    const auto mode = source_side ? config.source_tokenization
                                  : config.target_tokenization;
    std::vector<Label> out;
    for (const auto& g : SplitGraphemes(token, mode)) {
      auto id = syms.Find(g);
      if (!id) return std::nullopt;
      out.push_back(*id);
    }
    return out;
  }
};

// Monotone segmentation lattice. Node (i, j) means i source and j target
// graphemes consumed; edges are listed in topological order.
struct AlignmentLattice {
  struct Edge {
    int from;
    int to;
    int source_begin;
    int source_len;
    int target_begin;
    int target_len;
  };

  int source_size = 0;
  int target_size = 0;
  std::vector<Edge> edges;

  int Node(int i, int j) const { return i * (target_size + 1) + j; }
  int NumNodes() const { return (source_size + 1) * (target_size + 1); }
  int Start() const { return 0; }
  int Final() const { return NumNodes() - 1; }

  double CountCompletePaths() const {
    std::vector<double> paths(NumNodes(), 0.0);
    paths[Start()] = 1;
    for (const auto& e : edges) paths[e.to] += paths[e.from];
    return paths[Final()];
  }
  bool HasCompletePath() const { return CountCompletePaths() > 0; }
};

namespace internal {

// Visits every edge as visit(i, j, shape) in topological order.
template <class Visit>
void VisitLatticeEdges(int source_size, int target_size,
                       const std::vector<SegmentShape>& shapes, Visit&& visit) {
  for (int i = 0; i <= source_size; ++i)
    for (int j = 0; j <= target_size; ++j)
      for (const auto& s : shapes)
        if (i + s.source_len <= source_size && j + s.target_len <= target_size)
          visit(i, j, s);
}

}  // namespace internal

inline AlignmentLattice BuildLattice(std::span<const Label> source,
                                     std::span<const Label> target,
                                     const AlignmentConfig& config) {
  AlignmentLattice lattice;
  lattice.source_size = static_cast<int>(source.size());
  lattice.target_size = static_cast<int>(target.size());
  internal::VisitLatticeEdges(
      lattice.source_size, lattice.target_size, config.Shapes(),
      [&](int i, int j, const SegmentShape& s) {
        lattice.edges.push_back({lattice.Node(i, j),
                                 lattice.Node(i + s.source_len, j + s.target_len),
                                 i, s.source_len, j, s.target_len});
      });
  return lattice;
}

inline AlignmentLattice BuildLattice(std::string_view source_token,
                                     std::string_view target_token,
                                     const AlignmentConfig& config) {
  auto src = SplitGraphemes(source_token, config.source_tokenization);
  auto tgt = SplitGraphemes(target_token, config.target_tokenization);
  std::vector<Label> s(src.size()), t(tgt.size());
  SymbolTable ss, ts;
  for (std::size_t i = 0; i < src.size(); ++i) s[i] = ss.Add(src[i]);
  for (std::size_t i = 0; i < tgt.size(); ++i) t[i] = ts.Add(tgt[i]);
  return BuildLattice(s, t, config);
}

struct EmTrace {
  std::vector<double> log_likelihoods;  // one per E-step, alignable pairs only
  std::size_t pairs = 0;
  std::size_t unalignable = 0;
  std::size_t iterations = 0;
  std::size_t initial_graphones = 0;
  std::size_t final_graphones = 0;
};

namespace internal {

struct EncodedPair {
  std::vector<Label> source;
  std::vector<Label> target;
};

inline void CheckGraphemeSymbol(const std::string& g) {
  if (g == "_" || g.find_first_of("|+ \t") != std::string::npos)
    throw ConfigError("grapheme '" + g +
                      "' collides with graphone notation characters");
}

// Forward-backward over one pair's lattice in the log semiring. `gids`
// holds graphone ids in edge visiting order. Adds edge posteriors to
// `counts` and returns the log of the total path mass.
inline double ForwardBackward(const EncodedPair& pair,
                              const std::vector<SegmentShape>& shapes,
                              std::span<const int> gids,
                              const std::vector<double>& logprob,
                              std::vector<double>& alpha,
                              std::vector<double>& beta,
                              std::vector<double>* counts) {
  const int S = static_cast<int>(pair.source.size());
  const int T = static_cast<int>(pair.target.size());
  const int nodes = (S + 1) * (T + 1);
  alpha.assign(nodes, kLogZero);
  beta.assign(nodes, kLogZero);
  alpha[0] = 0;
  std::size_t k = 0;
  VisitLatticeEdges(S, T, shapes, [&](int i, int j, const SegmentShape& s) {
    const double lp = logprob[gids[k++]];
    const int from = i * (T + 1) + j;
    if (lp == kLogZero || alpha[from] == kLogZero) return;
    const int to = (i + s.source_len) * (T + 1) + j + s.target_len;
    alpha[to] = LogAdd(alpha[to], alpha[from] + lp);
  });
  const double total = alpha[nodes - 1];
  if (total == kLogZero || !counts) return total;

  beta[nodes - 1] = 0;
  // Reverse pass: collect edges, then walk them backwards.
  struct E {
    int from, to, gid;
  };
  thread_local std::vector<E> edges;
  edges.clear();
  k = 0;
  VisitLatticeEdges(S, T, shapes, [&](int i, int j, const SegmentShape& s) {
    edges.push_back({i * (T + 1) + j,
                     (i + s.source_len) * (T + 1) + j + s.target_len, gids[k++]});
  });
  for (auto it = edges.rbegin(); it != edges.rend(); ++it) {
    const double lp = logprob[it->gid];
    if (lp == kLogZero || beta[it->to] == kLogZero) continue;
    beta[it->from] = LogAdd(beta[it->from], lp + beta[it->to]);
    if (alpha[it->from] != kLogZero)
      (*counts)[it->gid] += std::exp(alpha[it->from] + lp + beta[it->to] - total);
  }
  return total;
}

}  // namespace internal

// Trains the graphone unigram model by EM. Pairs without any complete
// lattice path are skipped; if none is alignable a TrainingError is thrown.
inline AlignmentModel EmTrain(const std::vector<TokenPair>& pairs,
                              const AlignmentConfig& config,
                              EmTrace* trace = nullptr) {
  config.Validate();
  if (pairs.empty()) throw TrainingError("alignment corpus is empty");
  AlignmentModel model;
  model.config = config;
  const auto shapes = config.Shapes();

  std::vector<internal::EncodedPair> encoded;
  encoded.reserve(pairs.size());
  for (const auto& p : pairs) {
    internal::EncodedPair e;
    for (const auto& g : SplitGraphemes(p.source_token, config.source_tokenization)) {
      internal::CheckGraphemeSymbol(g);
      e.source.push_back(model.source_symbols.Add(g));
    }
    for (const auto& g : SplitGraphemes(p.target_token, config.target_tokenization)) {
      internal::CheckGraphemeSymbol(g);
      e.target.push_back(model.target_symbols.Add(g));
    }
    encoded.push_back(std::move(e));
  }

  // Intern graphones of every lattice edge; keep only alignable pairs.
  std::vector<std::size_t> offsets;  // into gids, per kept pair
  std::vector<int> gids;
  std::vector<std::size_t> kept;
  std::size_t unalignable = 0;
  for (std::size_t p = 0; p < encoded.size(); ++p) {
    const auto& e = encoded[p];
    AlignmentLattice lattice = BuildLattice(e.source, e.target, config);
    if (!lattice.HasCompletePath()) {
      ++unalignable;
      continue;
    }
    kept.push_back(p);
    offsets.push_back(gids.size());
    for (const auto& edge : lattice.edges) {
      gids.push_back(model.graphones.Add(
          std::span<const Label>(e.source).subspan(edge.source_begin, edge.source_len),
          std::span<const Label>(e.target).subspan(edge.target_begin, edge.target_len)));
    }
  }
  offsets.push_back(gids.size());
  if (kept.empty())
    throw TrainingError("no training pair is alignable under the configuration");

  const std::size_t G = model.graphones.size();
  model.logprob.assign(G, -std::log(static_cast<double>(G)));

  constexpr std::size_t kChunk = 2048;
  const std::size_t chunks = (kept.size() + kChunk - 1) / kChunk;
  std::vector<std::vector<double>> chunk_counts(chunks);
  std::vector<double> chunk_ll(chunks);

  EmTrace local;
  local.pairs = pairs.size();
  local.unalignable = unalignable;
  local.initial_graphones = G;
  double previous = kLogZero;
  for (int iter = 0; iter < config.max_iterations + 1; ++iter) {
    ParallelFor(chunks, [&](std::size_t c) {
      auto& counts = chunk_counts[c];
      counts.assign(G, 0.0);
      std::vector<double> alpha, beta;
      double ll = 0;
      const std::size_t end = std::min(kept.size(), (c + 1) * kChunk);
      for (std::size_t k = c * kChunk; k < end; ++k) {
        std::span<const int> edge_gids(gids.data() + offsets[k],
                                       offsets[k + 1] - offsets[k]);
        double z = internal::ForwardBackward(encoded[kept[k]], shapes, edge_gids,
                                             model.logprob, alpha, beta, &counts);
        if (z != kLogZero) ll += z;
      }
      chunk_ll[c] = ll;
    });
    double ll = 0;
    for (double v : chunk_ll) ll += v;
    local.log_likelihoods.push_back(ll);
    const bool converged =
        iter > 0 && (ll - previous) / static_cast<double>(kept.size()) <
                        config.convergence_epsilon;
    if (converged || iter == config.max_iterations) break;
    previous = ll;

    // M-step: renormalize expected counts, prune, renormalize again.
    std::vector<double> counts(G, 0.0);
    for (const auto& cc : chunk_counts)
      for (std::size_t g = 0; g < G; ++g) counts[g] += cc[g];
    double total = 0;
    for (double v : counts) total += v;
    double kept_mass = 0;
    for (auto& v : counts) {
      if (v / total < config.prune_threshold || v <= 0) v = 0;
      kept_mass += v;
    }
    for (std::size_t g = 0; g < G; ++g)
      model.logprob[g] = counts[g] > 0 ? std::log(counts[g] / kept_mass) : kLogZero;
    ++local.iterations;
  }
  local.final_graphones = static_cast<std::size_t>(
      std::count_if(model.logprob.begin(), model.logprob.end(),
                    [](double lp) { return lp != kLogZero; }));
  if (trace) *trace = std::move(local);
  return model;
}

// Highest-probability segmentation. On equal scores the longer source
// segment wins, then the longer target segment.
inline std::vector<Graphone> ViterbiAlign(const TokenPair& pair,
                                          const AlignmentModel& model) {
  auto src = model.Encode(pair.source_token, true);
  auto tgt = model.Encode(pair.target_token, false);
  if (!src || !tgt)
    throw AlignmentError("pair '" + pair.source_token + "' / '" +
                         pair.target_token + "' contains unknown graphemes");
  const AlignmentLattice lattice = BuildLattice(*src, *tgt, model.config);
  const int nodes = lattice.NumNodes();
  std::vector<double> best(nodes, kLogZero);
  std::vector<int> back(nodes, -1);
  std::vector<int> back_gid(nodes, -1);
  best[lattice.Start()] = 0;
  for (std::size_t e = 0; e < lattice.edges.size(); ++e) {
    const auto& edge = lattice.edges[e];
    if (best[edge.from] == kLogZero) continue;
    auto gid = model.graphones.Find(
        std::span<const Label>(*src).subspan(edge.source_begin, edge.source_len),
        std::span<const Label>(*tgt).subspan(edge.target_begin, edge.target_len));
    if (!gid || model.logprob[*gid] == kLogZero) continue;
    const double score = best[edge.from] + model.logprob[*gid];
    bool take = score > best[edge.to];
    if (!take && score == best[edge.to] && back[edge.to] >= 0) {
      const auto& cur = lattice.edges[back[edge.to]];
      take = edge.source_len > cur.source_len ||
             (edge.source_len == cur.source_len && edge.target_len > cur.target_len);
    }
    if (take) {
      best[edge.to] = score;
      back[edge.to] = static_cast<int>(e);
      back_gid[edge.to] = *gid;
    }
  }
  if (best[lattice.Final()] == kLogZero)
    throw AlignmentError("pair '" + pair.source_token + "' / '" +
                         pair.target_token + "' has no alignment path");
  std::vector<Graphone> path;
  for (int node = lattice.Final(); node != lattice.Start();) {
    path.push_back(model.graphones.at(back_gid[node]));
    node = lattice.edges[back[node]].from;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

inline double PathLogProb(const std::vector<Graphone>& path,
                          const AlignmentModel& model) {
  double lp = 0;
  for (const auto& g : path) {
    auto id = model.graphones.Find(g);
    if (!id) return kLogZero;
    lp += model.logprob[*id];
  }
  return lp;
}

struct LikelihoodReport {
  double log_likelihood = 0;  // over alignable pairs
  std::size_t unalignable = 0;

  double total() const { return unalignable ? kLogZero : log_likelihood; }
};

inline LikelihoodReport LogLikelihood(const std::vector<TokenPair>& pairs,
                                      const AlignmentModel& model) {
  LikelihoodReport report;
  const auto shapes = model.config.Shapes();
  std::vector<double> alpha, beta;
  std::vector<double> logprob = model.logprob;
  const int unknown = static_cast<int>(logprob.size());
  logprob.push_back(kLogZero);
  for (const auto& p : pairs) {
    auto src = model.Encode(p.source_token, true);
    auto tgt = model.Encode(p.target_token, false);
    if (!src || !tgt) {
      ++report.unalignable;
      continue;
    }
    internal::EncodedPair e{*src, *tgt};
    std::vector<int> gids;
    internal::VisitLatticeEdges(
        static_cast<int>(src->size()), static_cast<int>(tgt->size()), shapes,
        [&](int i, int j, const SegmentShape& s) {
          auto id = model.graphones.Find(
              std::span<const Label>(*src).subspan(i, s.source_len),
              std::span<const Label>(*tgt).subspan(j, s.target_len));
          gids.push_back(id ? *id : unknown);
        });
    double z = internal::ForwardBackward(e, shapes, gids, logprob, alpha, beta,
                                         nullptr);
    if (z == kLogZero)
      ++report.unalignable;
    else
      report.log_likelihood += z;
  }
  return report;
}

inline std::string FormatAlignment(const std::vector<Graphone>& path,
                                   const AlignmentModel& model) {
  std::string out;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i) out.push_back(' ');
    out += model.GraphoneText(path[i]);
  }
  return out;
}

// Header line with the lattice shape configuration, then one
// `graphone<TAB>logprob` line per surviving graphone, sorted by text.
inline void WriteAlignmentModel(std::ostream& os, const AlignmentModel& model) {
  const auto& c = model.config;
  os << "#netrans-align max_source_len=" << c.max_source_len
     << " max_target_len=" << c.max_target_len
     << " allow_target_deletion=" << c.allow_target_deletion
     << " allow_source_deletion=" << c.allow_source_deletion
     << " source_tokenization=" << ToString(c.source_tokenization)
     << " target_tokenization=" << ToString(c.target_tokenization) << '\n';
  std::vector<std::pair<std::string, double>> rows;
  for (std::size_t g = 0; g < model.graphones.size(); ++g)
    if (model.logprob[g] != kLogZero)
      rows.emplace_back(model.GraphoneText(static_cast<int>(g)), model.logprob[g]);
  std::sort(rows.begin(), rows.end());
  for (const auto& [text, lp] : rows)
    os << text << '\t' << text::FormatDouble(lp) << '\n';
}

// Symbol tables may be pre-seeded so ids match other archive members.
inline AlignmentModel ReadAlignmentModel(std::istream& is,
                                         SymbolTable source_symbols = {},
                                         SymbolTable target_symbols = {}) {
  AlignmentModel model;
  model.source_symbols = std::move(source_symbols);
  model.target_symbols = std::move(target_symbols);
  std::string line;
  if (!std::getline(is, line) || line.rfind("#netrans-align", 0) != 0)
    throw ParseError("missing alignment model header", 1);
  for (auto field : text::Fields(std::string_view(line).substr(14))) {
    auto eq = field.find('=');
    if (eq == std::string_view::npos) throw ParseError("bad header field", 1);
    auto key = field.substr(0, eq);
    auto val = std::string(field.substr(eq + 1));
    auto& c = model.config;
    if (key == "max_source_len") c.max_source_len = std::stoi(val);
    else if (key == "max_target_len") c.max_target_len = std::stoi(val);
    else if (key == "allow_target_deletion") c.allow_target_deletion = val == "1";
    else if (key == "allow_source_deletion") c.allow_source_deletion = val == "1";
    else if (key == "source_tokenization") c.source_tokenization = ParseTokenization(val);
    else if (key == "target_tokenization") c.target_tokenization = ParseTokenization(val);
    else throw ParseError("unknown header field", 1);
  }
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("expected graphone<TAB>logprob", lineno);
    auto lp = text::ParseDouble(std::string_view(line).substr(tab + 1));
    if (!lp) throw ParseError("bad log-probability", lineno);
    std::string_view gtext = std::string_view(line).substr(0, tab);
    auto bar = gtext.find('|');
    if (bar == std::string_view::npos) throw ParseError("bad graphone", lineno);
    Graphone g;
    auto seg = [](std::string_view s, SymbolTable& syms, std::vector<Label>& out) {
      if (s == "_") return;
      for (auto part : text::SplitOn(s, '+')) out.push_back(syms.Add(std::string(part)));
    };
    seg(gtext.substr(0, bar), model.source_symbols, g.source);
    seg(gtext.substr(bar + 1), model.target_symbols, g.target);
    int id = model.graphones.Add(g);
    if (static_cast<std::size_t>(id) != model.logprob.size())
      throw ParseError("duplicate graphone", lineno);
    model.logprob.push_back(*lp);
  }
  return model;
}

}  // namespace netrans

#endif  // NETRANS_ALIGN_HPP_
