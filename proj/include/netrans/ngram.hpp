// ngram.hpp
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
// Backoff n-gram language model over graphone symbols.
//
// Sequences are padded with order-1 BOS symbols and one EOS, so every
// predicted token has a full-length history. N-grams live in a trie whose
// node for (t1 .. tk) is reached from the root along t1, ..., tk; children
// of each node are contiguous and sorted by symbol id.
//
// Probabilities are natural logs internally; ARPA files carry log10.

#ifndef NETRANS_NGRAM_HPP_
#define NETRANS_NGRAM_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "netrans/error.hpp"
#include "netrans/text_util.hpp"

namespace netrans {

class GraphoneVocabulary {
 public:
  static constexpr int kBos = 0;
  static constexpr int kEos = 1;
  static constexpr int kUnk = 2;

  GraphoneVocabulary() {
    for (const char* s : {"<s>", "</s>", "<unk>"}) Add(s);
  }

  int Add(const std::string& symbol) {
    auto [it, inserted] = ids_.emplace(symbol, static_cast<int>(symbols_.size()));
    if (inserted) symbols_.push_back(symbol);
    return it->second;
  }
  std::optional<int> Find(const std::string& symbol) const {
    auto it = ids_.find(symbol);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }
  int IdOrUnk(const std::string& symbol) const {
    auto id = Find(symbol);
    return id ? *id : kUnk;
  }
  const std::string& Symbol(int id) const { return symbols_.at(id); }
  std::size_t size() const { return symbols_.size(); }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> ids_;
};

enum class Smoothing { kMle, kWittenBell };

inline std::string_view ToString(Smoothing s) {
  return s == Smoothing::kMle ? "mle" : "witten_bell";
}

inline Smoothing ParseSmoothing(std::string_view s) {
  if (s == "mle") return Smoothing::kMle;
  if (s == "witten_bell" || s == "wb") return Smoothing::kWittenBell;
  throw ConfigError("unknown smoothing '" + std::string(s) + "'");
}

namespace internal {

// Trie under construction: nodes in creation order, children found by hash.
class TrieBuilder {
 public:
  TrieBuilder() { nodes_.push_back({-1, -1, 0}); }

  int ChildOrAdd(int parent, int word) {
    const std::uint64_t key =
        (static_cast<std::uint64_t>(static_cast<std::uint32_t>(parent)) << 32) |
        static_cast<std::uint32_t>(word);
    auto [it, inserted] = index_.emplace(key, static_cast<int>(nodes_.size()));
    if (inserted)
      nodes_.push_back({word, parent, nodes_[parent].depth + 1});
    return it->second;
  }
  std::optional<int> Child(int parent, int word) const {
    const std::uint64_t key =
        (static_cast<std::uint64_t>(static_cast<std::uint32_t>(parent)) << 32) |
        static_cast<std::uint32_t>(word);
    auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  struct Node {
    int word;
    int parent;
    int depth;
  };
  const std::vector<Node>& nodes() const { return nodes_; }

  // Breadth-first order with children sorted by word: new_index[old].
  std::vector<int> BreadthFirstOrder() const {
    std::vector<std::vector<int>> children(nodes_.size());
    for (std::size_t i = 1; i < nodes_.size(); ++i)
      children[nodes_[i].parent].push_back(static_cast<int>(i));
    std::vector<int> order{0};
    for (std::size_t head = 0; head < order.size(); ++head) {
      auto& kids = children[order[head]];
      std::sort(kids.begin(), kids.end(), [&](int a, int b) {
        return nodes_[a].word < nodes_[b].word;
      });
      order.insert(order.end(), kids.begin(), kids.end());
    }
    std::vector<int> new_index(nodes_.size());
    for (std::size_t i = 0; i < order.size(); ++i) new_index[order[i]] = static_cast<int>(i);
    return new_index;
  }

 private:
  std::vector<Node> nodes_;
  std::unordered_map<std::uint64_t, int> index_;
};

}  // namespace internal

// Compact trie shared by count tables and models.
class NGramTrie {
 public:
  struct Node {
    int word = -1;
    int parent = -1;
    int depth = 0;
    int first_child = 0;
    int num_children = 0;
  };

  NGramTrie() { nodes_.push_back({}); }

  // Returns the trie plus the old->new index mapping.
  static NGramTrie FromBuilder(const internal::TrieBuilder& builder,
                               std::vector<int>* mapping) {
    NGramTrie trie;
    const auto& src = builder.nodes();
    std::vector<int> new_index = builder.BreadthFirstOrder();
    trie.nodes_.assign(src.size(), {});
    for (std::size_t old = 0; old < src.size(); ++old) {
      auto& n = trie.nodes_[new_index[old]];
      n.word = src[old].word;
      n.parent = src[old].parent < 0 ? -1 : new_index[src[old].parent];
      n.depth = src[old].depth;
    }
    // Children are contiguous in breadth-first order.
    for (std::size_t i = 1; i < trie.nodes_.size(); ++i) {
      auto& p = trie.nodes_[trie.nodes_[i].parent];
      if (p.num_children == 0) p.first_child = static_cast<int>(i);
      ++p.num_children;
    }
    if (mapping) *mapping = std::move(new_index);
    return trie;
  }

  static constexpr int kRoot = 0;

  std::optional<int> Child(int node, int word) const {
    const auto& n = nodes_[node];
    auto begin = nodes_.begin() + n.first_child;
    auto end = begin + n.num_children;
    auto it = std::lower_bound(begin, end, word,
                               [](const Node& a, int w) { return a.word < w; });
    if (it == end || it->word != word) return std::nullopt;
    return static_cast<int>(it - nodes_.begin());
  }

  std::optional<int> Find(std::span<const int> ngram) const {
    int node = kRoot;
    for (int w : ngram) {
      auto c = Child(node, w);
      if (!c) return std::nullopt;
      node = *c;
    }
    return node;
  }

  // Symbols along the path from the root.
  std::vector<int> Words(int node) const {
    std::vector<int> out;
    for (; node != kRoot; node = nodes_[node].parent) out.push_back(nodes_[node].word);
    std::reverse(out.begin(), out.end());
    return out;
  }

  const Node& node(int i) const { return nodes_[i]; }
  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
};

struct NGramCounts {
  int order = 0;
  GraphoneVocabulary vocabulary;
  NGramTrie trie;
  // Occurrences of each node's n-gram as a predicted event.
  std::vector<std::uint64_t> counts;

  std::uint64_t Count(std::span<const int> ngram) const {
    auto n = trie.Find(ngram);
    return n ? counts[*n] : 0;
  }
  std::uint64_t Count(const std::vector<std::string>& symbols) const {
    std::vector<int> ids;
    for (const auto& s : symbols) {
      auto id = vocabulary.Find(s);
      if (!id) return 0;
      ids.push_back(*id);
    }
    return Count(ids);
  }
  bool empty() const { return trie.size() <= 1; }
};

// Vocabulary ids are assigned in sorted symbol order after the reserved
// symbols, so identical corpora always produce identical models.
inline NGramCounts CountNGrams(const std::vector<std::vector<std::string>>& sequences,
                               int order) {
  if (order < 1) throw ConfigError("n-gram order must be >= 1");
  NGramCounts out;
  out.order = order;
  std::set<std::string> symbols;
  for (const auto& seq : sequences) symbols.insert(seq.begin(), seq.end());
  for (const auto& s : symbols) out.vocabulary.Add(s);

  internal::TrieBuilder builder;
  std::vector<std::uint64_t> raw_counts(1, 0);
  std::vector<int> prev(order + 1, NGramTrie::kRoot), cur(order + 1, NGramTrie::kRoot);
  std::vector<int> padded;
  for (const auto& seq : sequences) {
    padded.assign(order - 1, GraphoneVocabulary::kBos);
    for (const auto& s : seq) padded.push_back(*out.vocabulary.Find(s));
    padded.push_back(GraphoneVocabulary::kEos);
    std::fill(prev.begin(), prev.end(), NGramTrie::kRoot);
    for (std::size_t p = 0; p < padded.size(); ++p) {
      const int max_k = static_cast<int>(std::min<std::size_t>(order, p + 1));
      const bool predicted = p + 1 >= static_cast<std::size_t>(order);
      for (int k = 1; k <= max_k; ++k) {
        cur[k] = builder.ChildOrAdd(prev[k - 1], padded[p]);
        if (raw_counts.size() < builder.nodes().size())
          raw_counts.resize(builder.nodes().size(), 0);
        if (predicted) ++raw_counts[cur[k]];
      }
      std::swap(prev, cur);
      prev[0] = NGramTrie::kRoot;
    }
  }
  raw_counts.resize(builder.nodes().size(), 0);
  std::vector<int> mapping;
  out.trie = NGramTrie::FromBuilder(builder, &mapping);
  out.counts.assign(out.trie.size(), 0);
  for (std::size_t old = 0; old < mapping.size(); ++old)
    out.counts[mapping[old]] = raw_counts[old];
  return out;
}

class NGramModel {
 public:
  // Probability assigned to UNK at the unigram level by Witten-Bell.
  static constexpr double kUnkProbability = 1e-10;

  int order() const { return order_; }
  const GraphoneVocabulary& vocabulary() const { return vocab_; }
  const NGramTrie& trie() const { return trie_; }
  Smoothing smoothing() const { return smoothing_; }

  // ln P(word | node's n-gram minus its last word); kLogZero-like -inf for
  // entries that exist only as histories.
  double LogProb(int node) const { return logprob_[node]; }
  // ln backoff weight of the node's n-gram used as a history.
  double Backoff(int node) const { return backoff_[node]; }
  bool HasBackoff(int node) const { return has_backoff_[node]; }
  // Longest proper suffix of the node's n-gram present in the trie.
  int Suffix(int node) const { return suffix_[node]; }

  // ln P(word | history) with the standard backoff recursion.
  double WordLogProb(std::span<const int> history, int word) const {
    const std::size_t max_h = std::min<std::size_t>(history.size(), order_ - 1);
    double acc = 0;
    for (std::size_t k = max_h + 1; k-- > 0;) {
      auto h = trie_.Find(history.subspan(history.size() - k));
      if (!h) continue;
      if (auto hw = trie_.Child(*h, word); hw && logprob_[*hw] > kNoEvent)
        return acc + logprob_[*hw];
      if (smoothing_ == Smoothing::kMle) break;
      if (has_backoff_[*h]) acc += backoff_[*h];
    }
    return -std::numeric_limits<double>::infinity();
  }

  // Per-token log10 scores, EOS last.
  std::vector<double> TokenScores(const std::vector<std::string>& sequence) const {
    std::vector<int> ctx(order_ - 1, GraphoneVocabulary::kBos);
    std::vector<double> out;
    auto step = [&](int word) {
      out.push_back(WordLogProb(ctx, word) / std::log(10.0));
      ctx.push_back(word);
    };
    for (const auto& s : sequence) step(vocab_.IdOrUnk(s));
    step(GraphoneVocabulary::kEos);
    return out;
  }

  // log10 probability of the padded sequence.
  double Score(const std::vector<std::string>& sequence) const {
    double total = 0;
    for (double v : TokenScores(sequence)) total += v;
    return total;
  }

  // Symbols that may be predicted: everything except BOS.
  std::vector<int> PredictableSymbols() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < vocab_.size(); ++i)
      if (static_cast<int>(i) != GraphoneVocabulary::kBos) out.push_back(static_cast<int>(i));
    return out;
  }

  // Histories with at least one explicit continuation.
  std::vector<int> Histories() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < trie_.size(); ++i) {
      const auto& n = trie_.node(static_cast<int>(i));
      if (n.depth >= order_) continue;
      for (int c = n.first_child; c < n.first_child + n.num_children; ++c)
        if (logprob_[c] > kNoEvent) {
          out.push_back(static_cast<int>(i));
          break;
        }
    }
    return out;
  }

  // Total probability mass of P(. | history node) summed over every
  // predictable symbol through the backoff recursion.
  double HistoryMass(int node) const {
    const auto words = trie_.Words(node);
    double total = 0;
    for (int w : PredictableSymbols()) total += std::exp(WordLogProb(words, w));
    return total;
  }

  // Entries at or below this log value are history-only placeholders.
  static constexpr double kNoEvent = -1e30;

 private:
  friend NGramModel Estimate(const NGramCounts&, Smoothing);
  friend NGramModel ReadArpa(std::istream&);

  void ComputeSuffixLinks() {
    suffix_.assign(trie_.size(), NGramTrie::kRoot);
    for (std::size_t i = 1; i < trie_.size(); ++i) {
      const auto& n = trie_.node(static_cast<int>(i));
      if (n.depth == 1) continue;
      int s = suffix_[n.parent];
      while (true) {
        if (auto c = trie_.Child(s, n.word)) {
          suffix_[i] = *c;
          break;
        }
        if (s == NGramTrie::kRoot) break;
        s = suffix_[s];
      }
    }
  }

  int order_ = 0;
  Smoothing smoothing_ = Smoothing::kWittenBell;
  GraphoneVocabulary vocab_;
  NGramTrie trie_;
  std::vector<double> logprob_;
  std::vector<double> backoff_;
  std::vector<char> has_backoff_;
  std::vector<int> suffix_;
};

// Witten-Bell (interpolated, in backoff form) or plain relative frequency.
//   P(w|h) = (c(h,w) + T(h) P(w|h')) / (c(h) + T(h)),  bo(h) = T(h) / (c(h) + T(h))
// with T(h) the number of distinct continuations of h. The unigram level is
// relative frequency scaled by (1 - kUnkProbability), with the rest on UNK.
inline NGramModel Estimate(const NGramCounts& counts, Smoothing smoothing) {
  if (counts.empty()) throw TrainingError("cannot estimate a model from empty counts");
  NGramModel m;
  m.order_ = counts.order;
  m.smoothing_ = smoothing;
  m.vocab_ = counts.vocabulary;

  // WB needs an UNK unigram; rebuild the trie with it when absent.
  NGramTrie trie = counts.trie;
  std::vector<std::uint64_t> c = counts.counts;
  if (smoothing == Smoothing::kWittenBell &&
      !trie.Child(NGramTrie::kRoot, GraphoneVocabulary::kUnk)) {
    internal::TrieBuilder builder;
    std::vector<int> old_to_builder(trie.size(), 0);
    for (std::size_t i = 1; i < trie.size(); ++i) {
      const auto& n = trie.node(static_cast<int>(i));
      old_to_builder[i] = builder.ChildOrAdd(old_to_builder[n.parent], n.word);
    }
    builder.ChildOrAdd(NGramTrie::kRoot, GraphoneVocabulary::kUnk);
    std::vector<int> mapping;
    trie = NGramTrie::FromBuilder(builder, &mapping);
    std::vector<std::uint64_t> remapped(trie.size(), 0);
    for (std::size_t i = 1; i < counts.trie.size(); ++i)
      remapped[mapping[old_to_builder[i]]] = counts.counts[i];
    c = std::move(remapped);
  }
  m.trie_ = std::move(trie);
  const std::size_t n_nodes = m.trie_.size();
  m.ComputeSuffixLinks();

  std::vector<double> history_count(n_nodes, 0.0), types(n_nodes, 0.0);
  for (std::size_t i = 1; i < n_nodes; ++i) {
    if (c[i] == 0) continue;
    const int parent = m.trie_.node(static_cast<int>(i)).parent;
    history_count[parent] += static_cast<double>(c[i]);
    types[parent] += 1;
  }

  m.logprob_.assign(n_nodes, -std::numeric_limits<double>::infinity());
  m.backoff_.assign(n_nodes, 0.0);
  m.has_backoff_.assign(n_nodes, 0);
  // Breadth-first order visits lower orders first.
  for (std::size_t i = 1; i < n_nodes; ++i) {
    const auto& n = m.trie_.node(static_cast<int>(i));
    const double ch = history_count[n.parent];
    if (smoothing == Smoothing::kMle) {
      if (c[i] > 0) m.logprob_[i] = std::log(static_cast<double>(c[i]) / ch);
      continue;
    }
    if (n.depth == 1) {
      if (n.word == GraphoneVocabulary::kUnk && c[i] == 0)
        m.logprob_[i] = std::log(NGramModel::kUnkProbability);
      else if (c[i] > 0)
        m.logprob_[i] = std::log1p(-NGramModel::kUnkProbability) +
                        std::log(static_cast<double>(c[i]) / ch);
      continue;
    }
    if (c[i] == 0) continue;
    const double lower = std::exp(m.logprob_[m.suffix_[i]]);
    const double t = types[n.parent];
    m.logprob_[i] = std::log((static_cast<double>(c[i]) + t * lower) / (ch + t));
  }
  for (std::size_t i = 0; i < n_nodes; ++i) {
    const auto& n = m.trie_.node(static_cast<int>(i));
    if (smoothing == Smoothing::kMle) break;
    if (n.num_children == 0 || n.depth >= m.order_ || i == NGramTrie::kRoot) continue;
    m.has_backoff_[i] = 1;
    if (history_count[i] > 0)
      m.backoff_[i] = std::log(types[i] / (history_count[i] + types[i]));
  }
  return m;
}

inline constexpr double kArpaLogZero = -99.0;

// ARPA text: \data\ counts, one \k-grams: section per order, \end\.
inline void WriteArpa(std::ostream& os, const NGramModel& m) {
  const auto& trie = m.trie();
  std::vector<std::vector<int>> by_order(m.order() + 1);
  for (std::size_t i = 1; i < trie.size(); ++i)
    by_order[trie.node(static_cast<int>(i)).depth].push_back(static_cast<int>(i));
  const double ln10 = std::log(10.0);
  os << "\n\\data\\\n";
  for (int k = 1; k <= m.order(); ++k)
    os << "ngram " << k << "=" << by_order[k].size() << '\n';
  for (int k = 1; k <= m.order(); ++k) {
    os << "\n\\" << k << "-grams:\n";
    for (int node : by_order[k]) {
      const double lp = m.LogProb(node);
      os << (lp <= NGramModel::kNoEvent ? text::FormatDouble(kArpaLogZero)
                                        : text::FormatDouble(lp / ln10));
      for (int w : trie.Words(node)) os << ' ' << m.vocabulary().Symbol(w);
      if (m.HasBackoff(node)) os << ' ' << text::FormatDouble(m.Backoff(node) / ln10);
      os << '\n';
    }
  }
  os << "\n\\end\\\n";
}

inline NGramModel ReadArpa(std::istream& is) {
  std::string line;
  std::size_t lineno = 0;
  auto next = [&]() -> bool {
    while (std::getline(is, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  };
  if (!next() || line != "\\data\\") throw ParseError("expected \\data\\ header", lineno);
  std::vector<std::size_t> declared;
  while (next() && line.rfind("ngram ", 0) == 0) {
    auto eq = line.find('=');
    auto k = text::ParseInt(std::string_view(line).substr(6, eq - 6));
    auto n = text::ParseInt(std::string_view(line).substr(eq + 1));
    if (eq == std::string::npos || !k || !n || *k != static_cast<long long>(declared.size()) + 1)
      throw ParseError("bad ngram count line", lineno);
    declared.push_back(static_cast<std::size_t>(*n));
  }
  if (declared.empty()) throw ParseError("no ngram count lines", lineno);
  const int order = static_cast<int>(declared.size());

  NGramModel m;
  m.order_ = order;
  m.smoothing_ = Smoothing::kWittenBell;
  internal::TrieBuilder builder;
  struct Entry {
    double logprob;
    double backoff;
    bool has_backoff;
  };
  std::vector<Entry> entries(1, {0, 0, false});
  const double ln10 = std::log(10.0);

  for (int k = 1; k <= order; ++k) {
    if (line != "\\" + std::to_string(k) + "-grams:")
      throw ParseError("expected \\" + std::to_string(k) + "-grams: section", lineno);
    std::size_t seen = 0;
    while (next() && line[0] != '\\') {
      auto f = text::Fields(line);
      if (f.size() != static_cast<std::size_t>(k) + 1 &&
          f.size() != static_cast<std::size_t>(k) + 2)
        throw ParseError("wrong field count in " + std::to_string(k) + "-gram entry", lineno);
      auto lp = text::ParseDouble(f[0]);
      if (!lp) throw ParseError("bad log-probability", lineno);
      std::optional<double> bo;
      if (f.size() == static_cast<std::size_t>(k) + 2) {
        bo = text::ParseDouble(f[k + 1]);
        if (!bo) throw ParseError("bad backoff weight", lineno);
      }
      int node = NGramTrie::kRoot;
      for (int i = 1; i <= k; ++i) {
        std::string sym(f[i]);
        int id;
        if (k == 1) {
          id = m.vocab_.Add(sym);
        } else {
          auto found = m.vocab_.Find(sym);
          if (!found) throw ParseError("symbol '" + sym + "' missing from 1-grams", lineno);
          id = *found;
        }
        if (i < k) {
          auto child = builder.Child(node, id);
          if (!child) throw ParseError("n-gram prefix is not a listed entry", lineno);
          node = *child;
        } else {
          const std::size_t before = builder.nodes().size();
          node = builder.ChildOrAdd(node, id);
          if (builder.nodes().size() == before) throw ParseError("duplicate n-gram", lineno);
        }
      }
      entries.push_back({*lp <= kArpaLogZero ? -std::numeric_limits<double>::infinity()
                                             : *lp * ln10,
                         bo ? *bo * ln10 : 0.0, bo.has_value()});
      ++seen;
    }
    if (seen != declared[k - 1])
      throw ParseError("\\data\\ declares " + std::to_string(declared[k - 1]) + " " +
                           std::to_string(k) + "-grams but the section has " +
                           std::to_string(seen),
                       lineno);
  }
  if (line != "\\end\\") throw ParseError("expected \\end\\", lineno);

  std::vector<int> mapping;
  m.trie_ = NGramTrie::FromBuilder(builder, &mapping);
  const std::size_t n = m.trie_.size();
  m.logprob_.assign(n, -std::numeric_limits<double>::infinity());
  m.backoff_.assign(n, 0.0);
  m.has_backoff_.assign(n, 0);
  for (std::size_t old = 1; old < entries.size(); ++old) {
    const int idx = mapping[old];
    m.logprob_[idx] = entries[old].logprob;
    m.backoff_[idx] = entries[old].backoff;
    m.has_backoff_[idx] = entries[old].has_backoff;
  }
  m.ComputeSuffixLinks();
  return m;
}

}  // namespace netrans

#endif  // NETRANS_NGRAM_HPP_
