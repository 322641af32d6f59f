// fst.hpp
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
// Weighted transducers over the tropical semiring (min, +). Weights are
// negative natural-log probabilities and label 0 is epsilon on both tapes.

#ifndef NETRANS_FST_HPP_
#define NETRANS_FST_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <queue>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "netrans/align.hpp"
#include "netrans/error.hpp"
#include "netrans/ngram.hpp"
#include "netrans/symbol_table.hpp"
#include "netrans/text_util.hpp"

namespace netrans {

using StateId = int;
inline constexpr StateId kNoState = -1;
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct Arc {
  Label ilabel;
  Label olabel;
  double weight;
  StateId nextstate;

  bool operator==(const Arc&) const = default;
};

// Immutable transducer with arcs stored contiguously per state.
class Transducer {
 public:
  Transducer() : offsets_(1, 0) {}

  StateId Start() const { return start_; }
  std::size_t NumStates() const { return finals_.size(); }
  std::size_t NumArcs() const { return arcs_.size(); }
  double Final(StateId s) const { return finals_[s]; }
  bool IsFinal(StateId s) const { return finals_[s] != kInfinity; }
  std::span<const Arc> Arcs(StateId s) const {
    return {arcs_.data() + offsets_[s], arcs_.data() + offsets_[s + 1]};
  }
  bool InputSorted() const { return input_sorted_; }
  bool empty() const { return start_ == kNoState; }

  // Arcs leaving s whose input label is `label`. Requires input-sorted arcs
  // for a binary search, otherwise scans linearly into `scratch`.
  std::span<const Arc> ArcsWithInput(StateId s, Label label,
                                     std::vector<Arc>& scratch) const {
    auto arcs = Arcs(s);
    if (input_sorted_) {
      auto lo = std::lower_bound(arcs.begin(), arcs.end(), label,
                                 [](const Arc& a, Label l) { return a.ilabel < l; });
      auto hi = std::upper_bound(lo, arcs.end(), label,
                                 [](Label l, const Arc& a) { return l < a.ilabel; });
      return std::span<const Arc>(lo, hi);
    }
    scratch.clear();
    for (const auto& a : arcs)
      if (a.ilabel == label) scratch.push_back(a);
    return scratch;
  }

  const std::shared_ptr<const SymbolTable>& InputSymbols() const { return isyms_; }
  const std::shared_ptr<const SymbolTable>& OutputSymbols() const { return osyms_; }
  void SetSymbols(std::shared_ptr<const SymbolTable> isyms,
                  std::shared_ptr<const SymbolTable> osyms) {
    isyms_ = std::move(isyms);
    osyms_ = std::move(osyms);
  }

  bool operator==(const Transducer& o) const {
    return start_ == o.start_ && finals_ == o.finals_ && offsets_ == o.offsets_ &&
           arcs_ == o.arcs_;
  }

 private:
  friend class TransducerBuilder;

  StateId start_ = kNoState;
  std::vector<double> finals_;
  std::vector<std::size_t> offsets_;
  std::vector<Arc> arcs_;
  bool input_sorted_ = false;
  std::shared_ptr<const SymbolTable> isyms_;
  std::shared_ptr<const SymbolTable> osyms_;
};

class TransducerBuilder {
 public:
  StateId AddState() {
    finals_.push_back(kInfinity);
    return static_cast<StateId>(finals_.size() - 1);
  }
  void SetStart(StateId s) { start_ = s; }
  void SetFinal(StateId s, double w) { finals_.at(s) = w; }
  void AddArc(StateId from, const Arc& arc) { pending_.push_back({from, arc}); }
  std::size_t NumStates() const { return finals_.size(); }

  // With sort_input, arcs of each state are stably sorted by input label.
  Transducer Build(bool sort_input = false) {
    Transducer t;
    t.start_ = start_;
    t.finals_ = std::move(finals_);
    const std::size_t n = t.finals_.size();
    t.offsets_.assign(n + 1, 0);
    for (const auto& [from, arc] : pending_) {
      if (from < 0 || static_cast<std::size_t>(from) >= n || arc.nextstate < 0 ||
          static_cast<std::size_t>(arc.nextstate) >= n)
        throw ConfigError("arc references a missing state");
      ++t.offsets_[from + 1];
    }
    for (std::size_t i = 0; i < n; ++i) t.offsets_[i + 1] += t.offsets_[i];
    t.arcs_.resize(pending_.size());
    std::vector<std::size_t> fill(t.offsets_.begin(), t.offsets_.end() - 1);
    for (const auto& [from, arc] : pending_) t.arcs_[fill[from]++] = arc;
    pending_.clear();
    pending_.shrink_to_fit();
    if (sort_input) {
      for (std::size_t s = 0; s < n; ++s)
        std::stable_sort(t.arcs_.begin() + t.offsets_[s], t.arcs_.begin() + t.offsets_[s + 1],
                         [](const Arc& a, const Arc& b) { return a.ilabel < b.ilabel; });
      t.input_sorted_ = true;
    }
    finals_.clear();
    start_ = kNoState;
    return t;
  }

 private:
  StateId start_ = kNoState;
  std::vector<double> finals_;
  std::vector<std::pair<StateId, Arc>> pending_;
};

// Linear acceptor spelling `word`.
inline Transducer MakeInputAcceptor(std::span<const Label> word,
                                    std::shared_ptr<const SymbolTable> syms = nullptr) {
  if (word.empty()) throw ConfigError("cannot build an acceptor for an empty word");
  TransducerBuilder b;
  StateId s = b.AddState();
  b.SetStart(s);
  for (Label l : word) {
    StateId n = b.AddState();
    b.AddArc(s, {l, l, 0.0, n});
    s = n;
  }
  b.SetFinal(s, 0.0);
  Transducer t = b.Build(true);
  t.SetSymbols(syms, syms);
  return t;
}

// Composition matching a's output tape against b's input tape. The three
// filter states keep exactly one composed path per pair of matched paths:
// 0 after a matching move, 1 after a moved alone on output epsilon, 2 after
// b moved alone on input epsilon.
inline Transducer Compose(const Transducer& a, const Transducer& b) {
  TransducerBuilder out;
  if (a.empty() || b.empty()) {
    Transducer t = out.Build();
    t.SetSymbols(a.InputSymbols(), b.OutputSymbols());
    return t;
  }
  struct Key {
    StateId qa, qb;
    int f;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::uint64_t h = static_cast<std::uint32_t>(k.qa);
      h = h * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint32_t>(k.qb);
      h = h * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint32_t>(k.f);
      return static_cast<std::size_t>(h ^ (h >> 29));
    }
  };
  std::unordered_map<Key, StateId, KeyHash> ids;
  std::vector<Key> queue;
  auto state = [&](const Key& k) {
    auto [it, inserted] = ids.emplace(k, 0);
    if (inserted) {
      it->second = out.AddState();
      queue.push_back(k);
    }
    return it->second;
  };
  out.SetStart(state({a.Start(), b.Start(), 0}));
  std::vector<Arc> scratch_a, scratch_b;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const Key k = queue[head];
    const StateId s = ids.at(k);
    if (a.IsFinal(k.qa) && b.IsFinal(k.qb)) out.SetFinal(s, a.Final(k.qa) + b.Final(k.qb));
    for (const Arc& ea : a.Arcs(k.qa)) {
      if (ea.olabel == kEpsilon) {
        if (k.f != 2)
          out.AddArc(s, {ea.ilabel, kEpsilon, ea.weight, state({ea.nextstate, k.qb, 1})});
        if (k.f == 0)
          for (const Arc& eb : b.ArcsWithInput(k.qb, kEpsilon, scratch_b))
            out.AddArc(s, {ea.ilabel, eb.olabel, ea.weight + eb.weight,
                           state({ea.nextstate, eb.nextstate, 0})});
      } else {
        for (const Arc& eb : b.ArcsWithInput(k.qb, ea.olabel, scratch_b))
          out.AddArc(s, {ea.ilabel, eb.olabel, ea.weight + eb.weight,
                         state({ea.nextstate, eb.nextstate, 0})});
      }
    }
    if (k.f != 1)
      for (const Arc& eb : b.ArcsWithInput(k.qb, kEpsilon, scratch_a))
        out.AddArc(s, {kEpsilon, eb.olabel, eb.weight, state({k.qa, eb.nextstate, 2})});
  }
  Transducer t = out.Build();
  t.SetSymbols(a.InputSymbols(), b.OutputSymbols());
  return t;
}

// Keeps states that are both accessible and co-accessible, in their
// original relative order.
inline Transducer Trim(const Transducer& t) {
  TransducerBuilder out;
  if (t.empty()) {
    Transducer e = out.Build();
    e.SetSymbols(t.InputSymbols(), t.OutputSymbols());
    return e;
  }
  const std::size_t n = t.NumStates();
  std::vector<char> access(n, 0), coaccess(n, 0);
  std::vector<StateId> stack{t.Start()};
  access[t.Start()] = 1;
  std::vector<std::vector<StateId>> reverse(n);
  while (!stack.empty()) {
    StateId s = stack.back();
    stack.pop_back();
    for (const Arc& arc : t.Arcs(s)) {
      reverse[arc.nextstate].push_back(s);
      if (!access[arc.nextstate]) {
        access[arc.nextstate] = 1;
        stack.push_back(arc.nextstate);
      }
    }
  }
  for (std::size_t s = 0; s < n; ++s)
    if (access[s] && t.IsFinal(static_cast<StateId>(s))) {
      coaccess[s] = 1;
      stack.push_back(static_cast<StateId>(s));
    }
  while (!stack.empty()) {
    StateId s = stack.back();
    stack.pop_back();
    for (StateId p : reverse[s])
      if (!coaccess[p]) {
        coaccess[p] = 1;
        stack.push_back(p);
      }
  }
  std::vector<StateId> remap(n, kNoState);
  for (std::size_t s = 0; s < n; ++s)
    if (access[s] && coaccess[s]) remap[s] = out.AddState();
  if (remap[t.Start()] != kNoState) {
    out.SetStart(remap[t.Start()]);
    for (std::size_t s = 0; s < n; ++s) {
      if (remap[s] == kNoState) continue;
      if (t.IsFinal(static_cast<StateId>(s))) out.SetFinal(remap[s], t.Final(static_cast<StateId>(s)));
      for (const Arc& arc : t.Arcs(static_cast<StateId>(s)))
        if (remap[arc.nextstate] != kNoState)
          out.AddArc(remap[s], {arc.ilabel, arc.olabel, arc.weight, remap[arc.nextstate]});
    }
  } else {
    out = TransducerBuilder();
  }
  Transducer r = out.Build(t.InputSorted());
  r.SetSymbols(t.InputSymbols(), t.OutputSymbols());
  return r;
}

// Compiles a graphone language model into a transducer from source
// graphemes to target graphemes.
//
// States are n-gram histories with explicit continuations. An explicit
// entry (h, g) becomes a chain of max(|src|, |tgt|, 1) arcs where arc k
// reads src[k] and writes tgt[k] (epsilon past either end), weighted
// -ln P(g|h) on the first arc. Backoff weights become epsilon:epsilon arcs to
// the longest suffix history; EOS becomes the final weight.
inline Transducer CompileLm(const NGramModel& lm, const AlignmentModel& alignment) {
  if (lm.order() < 1) throw ConfigError("language model order must be >= 1");
  const auto& trie = lm.trie();
  const std::size_t n = trie.size();
  const auto& vocab = lm.vocabulary();

  // Graphone symbol -> labels, resolved once per vocabulary entry.
  std::vector<std::optional<Graphone>> graphones(vocab.size());
  for (std::size_t w = 3; w < vocab.size(); ++w) {
    graphones[w] = alignment.ParseGraphone(vocab.Symbol(static_cast<int>(w)));
    if (!graphones[w])
      throw ConfigError("language model symbol '" + vocab.Symbol(static_cast<int>(w)) +
                        "' is not a graphone of the alignment model");
  }

  TransducerBuilder b;
  std::vector<StateId> state_of(n, kNoState);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& node = trie.node(static_cast<int>(i));
    bool history = i == NGramTrie::kRoot;
    if (node.depth < lm.order())
      for (int c = node.first_child; c < node.first_child + node.num_children && !history; ++c)
        history = lm.LogProb(c) > NGramModel::kNoEvent;
    if (history) state_of[i] = b.AddState();
  }
  auto as_state = [&](int node) {
    while (state_of[node] == kNoState && node != NGramTrie::kRoot) node = lm.Suffix(node);
    return state_of[node];
  };
  auto check = [](double w) {
    if (w < 0 || std::isnan(w)) throw ConfigError("model yields a negative tropical weight");
    return w;
  };

  int start = NGramTrie::kRoot;
  for (int k = 0; k + 1 < lm.order(); ++k) {
    auto c = trie.Child(start, GraphoneVocabulary::kBos);
    if (!c) break;
    start = *c;
  }
  b.SetStart(as_state(start));

  for (std::size_t i = 0; i < n; ++i) {
    const StateId from = state_of[i];
    if (from == kNoState) continue;
    const auto& node = trie.node(static_cast<int>(i));
    if (i != NGramTrie::kRoot && lm.HasBackoff(static_cast<int>(i)))
      b.AddArc(from, {kEpsilon, kEpsilon, check(-lm.Backoff(static_cast<int>(i))),
                      as_state(lm.Suffix(static_cast<int>(i)))});
    for (int c = node.first_child; c < node.first_child + node.num_children; ++c) {
      const double lp = lm.LogProb(c);
      if (lp <= NGramModel::kNoEvent) continue;
      const int word = trie.node(c).word;
      if (word == GraphoneVocabulary::kEos) {
        b.SetFinal(from, check(-lp));
        continue;
      }
      if (!graphones[word]) continue;  // BOS / UNK
      const Graphone& g = *graphones[word];
      const int dest_node = trie.node(c).depth <= lm.order() - 1 ? c : lm.Suffix(c);
      const StateId dest = as_state(dest_node);
      const std::size_t len = std::max({g.source.size(), g.target.size(), std::size_t{1}});
      StateId cur = from;
      for (std::size_t kk = 0; kk < len; ++kk) {
        const Label il = kk < g.source.size() ? g.source[kk] : kEpsilon;
        const Label ol = kk < g.target.size() ? g.target[kk] : kEpsilon;
        const StateId next = kk + 1 == len ? dest : b.AddState();
        b.AddArc(cur, {il, ol, kk == 0 ? check(-lp) : 0.0, next});
        cur = next;
      }
    }
  }
  Transducer t = b.Build(true);
  t.SetSymbols(std::make_shared<SymbolTable>(alignment.source_symbols),
               std::make_shared<SymbolTable>(alignment.target_symbols));
  return t;
}

struct Path {
  std::vector<Arc> arcs;
  double total_weight = 0;
  std::vector<Label> output;  // epsilon-free output labels

  std::string OutputString(const SymbolTable& osyms, Tokenization mode) const {
    std::vector<std::string> symbols;
    for (Label l : output) symbols.push_back(osyms.Symbol(l));
    return JoinGraphemes(symbols, mode);
  }
};

// Shortest distance from every state to a final state, final weight
// included. Dijkstra over reversed arcs; weights must be non-negative.
inline std::vector<double> ShortestDistanceToFinal(const Transducer& t) {
  const std::size_t n = t.NumStates();
  std::vector<double> dist(n, kInfinity);
  std::vector<std::vector<std::pair<StateId, double>>> reverse(n);
  for (std::size_t s = 0; s < n; ++s)
    for (const Arc& arc : t.Arcs(static_cast<StateId>(s))) {
      if (arc.weight < 0) throw ConfigError("negative arc weight in shortest-path search");
      reverse[arc.nextstate].push_back({static_cast<StateId>(s), arc.weight});
    }
  using Item = std::pair<double, StateId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  for (std::size_t s = 0; s < n; ++s)
    if (t.IsFinal(static_cast<StateId>(s))) {
      dist[s] = t.Final(static_cast<StateId>(s));
      heap.push({dist[s], static_cast<StateId>(s)});
    }
  while (!heap.empty()) {
    auto [d, s] = heap.top();
    heap.pop();
    if (d > dist[s]) continue;
    for (auto [p, w] : reverse[s])
      if (d + w < dist[p]) {
        dist[p] = d + w;
        heap.push({dist[p], p});
      }
  }
  return dist;
}

// The `count` lowest-weight complete paths in non-decreasing order.
// Best-first search guided by exact distances to final, so completed paths
// leave the queue in weight order; a state expanded more than `count`
// times cannot lie on any of the best `count` paths.
inline std::vector<Path> NShortestPaths(const Transducer& t, std::size_t count) {
  std::vector<Path> paths;
  if (t.empty() || count == 0) return paths;
  const auto potential = ShortestDistanceToFinal(t);
  if (potential[t.Start()] == kInfinity) return paths;

  struct Item {
    StateId state;
    double g;
    int parent;      // item index, -1 at the start
    Arc arc;         // arc taken from the parent
    bool complete;   // final weight already added
  };
  std::vector<Item> items;
  struct Entry {
    double f;
    std::uint64_t seq;
    int item;
    bool operator>(const Entry& o) const { return f != o.f ? f > o.f : seq > o.seq; }
  };
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  std::uint64_t seq = 0;
  std::vector<std::size_t> pops(t.NumStates(), 0);

  items.push_back({t.Start(), 0.0, -1, {}, false});
  heap.push({potential[t.Start()], seq++, 0});
  while (!heap.empty() && paths.size() < count) {
    const Entry e = heap.top();
    heap.pop();
    const Item item = items[e.item];
    if (item.complete) {
      Path p;
      p.total_weight = item.g;
      for (int i = e.item; items[i].parent >= 0; i = items[i].parent) p.arcs.push_back(items[i].arc);
      std::reverse(p.arcs.begin(), p.arcs.end());
      for (const Arc& a : p.arcs)
        if (a.olabel != kEpsilon) p.output.push_back(a.olabel);
      paths.push_back(std::move(p));
      continue;
    }
    if (++pops[item.state] > count) continue;
    if (t.IsFinal(item.state)) {
      items.push_back({item.state, item.g + t.Final(item.state), item.parent, item.arc, true});
      heap.push({items.back().g, seq++, static_cast<int>(items.size() - 1)});
    }
    for (const Arc& arc : t.Arcs(item.state)) {
      if (potential[arc.nextstate] == kInfinity) continue;
      const double g = item.g + arc.weight;
      items.push_back({arc.nextstate, g, e.item, arc, false});
      heap.push({g + potential[arc.nextstate], seq++, static_cast<int>(items.size() - 1)});
    }
  }
  return paths;
}

// Up to k paths with pairwise distinct output strings, cheapest first.
// Runs the k * overgen_factor shortest paths and keeps the first path of
// each output; the factor doubles up to 32 while fewer than k distinct
// outputs were found and more paths may exist.
inline std::vector<Path> NShortestUnique(const Transducer& t, std::size_t k,
                                         std::size_t overgen_factor = 4) {
  if (k == 0) throw ConfigError("k must be >= 1");
  overgen_factor = std::max<std::size_t>(overgen_factor, 1);
  while (true) {
    const std::size_t want = k * overgen_factor;
    std::vector<Path> all = NShortestPaths(t, want);
    std::vector<Path> unique;
    std::vector<std::vector<Label>> seen;
    for (auto& p : all) {
      if (std::find(seen.begin(), seen.end(), p.output) != seen.end()) continue;
      seen.push_back(p.output);
      unique.push_back(std::move(p));
      if (unique.size() == k) break;
    }
    if (unique.size() >= k || all.size() < want || overgen_factor >= 32) return unique;
    overgen_factor *= 2;
  }
}

// AT&T text form: `src dst ilabel olabel weight` per arc, `state weight`
// per final state. The start state's lines come first.
inline void WriteFstText(std::ostream& os, const Transducer& t) {
  if (t.empty()) return;
  auto emit = [&](StateId s) {
    for (const Arc& a : t.Arcs(s))
      os << s << ' ' << a.nextstate << ' ' << a.ilabel << ' ' << a.olabel << ' '
         << text::FormatDouble(a.weight) << '\n';
    if (t.IsFinal(s)) os << s << ' ' << text::FormatDouble(t.Final(s)) << '\n';
  };
  if (t.Arcs(t.Start()).empty() && !t.IsFinal(t.Start())) os << t.Start() << " inf\n";
  emit(t.Start());
  for (std::size_t s = 0; s < t.NumStates(); ++s)
    if (static_cast<StateId>(s) != t.Start()) emit(static_cast<StateId>(s));
  // States without arcs or final weight still count toward NumStates.
  os << "#states " << t.NumStates() << '\n';
}

inline Transducer ReadFstText(std::istream& is, bool sort_input = true) {
  TransducerBuilder b;
  std::string line;
  std::size_t lineno = 0;
  std::size_t declared = 0;
  auto ensure = [&](long long s) {
    if (s < 0) throw ParseError("negative state id", lineno);
    while (b.NumStates() <= static_cast<std::size_t>(s)) b.AddState();
  };
  bool first = true;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line.rfind("#states ", 0) == 0) {
      auto n = text::ParseInt(std::string_view(line).substr(8));
      if (!n) throw ParseError("bad state count", lineno);
      declared = static_cast<std::size_t>(*n);
      continue;
    }
    auto f = text::Fields(line);
    auto src = f.empty() ? std::nullopt : text::ParseInt(f[0]);
    if (!src) throw ParseError("bad state id", lineno);
    ensure(*src);
    if (first) {
      b.SetStart(static_cast<StateId>(*src));
      first = false;
    }
    if (f.size() == 2) {
      auto w = text::ParseDouble(f[1]);
      if (!w) throw ParseError("bad final weight", lineno);
      if (*w != kInfinity) b.SetFinal(static_cast<StateId>(*src), *w);
    } else if (f.size() == 5) {
      auto dst = text::ParseInt(f[1]);
      auto il = text::ParseInt(f[2]);
      auto ol = text::ParseInt(f[3]);
      auto w = text::ParseDouble(f[4]);
      if (!dst || !il || !ol || !w) throw ParseError("bad arc line", lineno);
      ensure(*dst);
      b.AddArc(static_cast<StateId>(*src), {static_cast<Label>(*il), static_cast<Label>(*ol), *w,
                                            static_cast<StateId>(*dst)});
    } else {
      throw ParseError("expected 2 or 5 fields", lineno);
    }
  }
  if (declared) {
    if (declared < b.NumStates()) throw ParseError("state count smaller than used ids", lineno);
    while (b.NumStates() < declared) b.AddState();
  }
  return b.Build(sort_input);
}

}  // namespace netrans

#endif  // NETRANS_FST_HPP_
