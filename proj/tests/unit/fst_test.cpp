// fst_test.cpp
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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <tuple>

#include "fst_oracle.hpp"
#include "netrans/decode.hpp"
#include "netrans/fst.hpp"
#include "tiling_oracle.hpp"

namespace netrans {
namespace {

Transducer Identity(int labels) {
  TransducerBuilder b;
  StateId s = b.AddState();
  b.SetStart(s);
  b.SetFinal(s, 0);
  for (Label l = 1; l <= labels; ++l) b.AddArc(s, {l, l, 0, s});
  return b.Build(true);
}

using Triple = std::tuple<std::vector<Label>, std::vector<Label>, double>;

std::vector<Triple> Triples(const std::vector<oracle::FullPath>& paths) {
  std::vector<Triple> out;
  for (const auto& p : paths) out.emplace_back(p.input, p.output, p.weight);
  std::sort(out.begin(), out.end());
  return out;
}

double PathSum(const Transducer& t, const Path& p) {
  double w = 0;
  StateId s = t.Start();
  for (const Arc& a : p.arcs) {
    w += a.weight;
    s = a.nextstate;
  }
  return w + t.Final(s);
}

TEST(Acceptor, Shape) {
  std::vector<Label> ab = {1, 2};
  Transducer t = MakeInputAcceptor(ab);
  EXPECT_EQ(t.NumStates(), 3u);
  EXPECT_EQ(t.NumArcs(), 2u);
  EXPECT_EQ(t.Arcs(t.Start())[0], (Arc{1, 1, 0, 1}));
  std::vector<Label> x = {7};
  EXPECT_EQ(MakeInputAcceptor(x).NumStates(), 2u);
  EXPECT_THROW(MakeInputAcceptor(std::vector<Label>{}), ConfigError);
  auto paths = oracle::AllPaths(Compose(t, t));
  ASSERT_EQ(paths.size(), 1u);
  EXPECT_EQ(paths[0].weight, 0.0);
}

TEST(Compose, IdentityPreservesAcceptor) {
  std::vector<Label> ab = {1, 2};
  Transducer a = MakeInputAcceptor(ab);
  EXPECT_EQ(Triples(oracle::AllPaths(Compose(a, Identity(2)))), Triples(oracle::AllPaths(a)));
  EXPECT_TRUE(Compose(a, Transducer()).empty());
  EXPECT_TRUE(Compose(Transducer(), a).empty());
}

TEST(ComposeProperty, MatchesBruteForcePathPairs) {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 300; ++trial) {
    Transducer a = oracle::RandomAcyclic(rng, 2 + static_cast<int>(rng() % 5), 2, 0.3);
    Transducer b = oracle::RandomAcyclic(rng, 2 + static_cast<int>(rng() % 5), 2, 0.3);
    std::vector<Triple> want;
    const auto pa = oracle::AllPaths(a), pb = oracle::AllPaths(b);
    for (const auto& x : pa)
      for (const auto& y : pb)
        if (x.output == y.input) want.emplace_back(x.input, y.output, x.weight + y.weight);
    std::sort(want.begin(), want.end());
    ASSERT_EQ(Triples(oracle::AllPaths(Compose(a, b))), want) << "trial " << trial;
  }
}

TEST(ComposeProperty, IdentityPreservesEveryPathWeight) {
  std::mt19937_64 rng(73);
  for (int trial = 0; trial < 100; ++trial) {
    Transducer a = oracle::RandomAcyclic(rng, 2 + static_cast<int>(rng() % 6), 3, 0.25);
    EXPECT_EQ(Triples(oracle::AllPaths(Compose(Identity(3), a))), Triples(oracle::AllPaths(a)));
  }
}

TEST(Trim, RemovesUselessStates) {
  TransducerBuilder b;
  for (int i = 0; i < 5; ++i) b.AddState();
  b.SetStart(0);
  b.AddArc(0, {1, 1, 1.0, 1});
  b.AddArc(0, {2, 2, 0.5, 3});  // dead end
  b.AddArc(4, {1, 1, 0.0, 1});  // unreachable
  b.SetFinal(1, 0.25);
  Transducer t = b.Build();
  Transducer tr = Trim(t);
  EXPECT_EQ(tr.NumStates(), 2u);
  EXPECT_EQ(tr.NumArcs(), 1u);
  EXPECT_EQ(Trim(tr), tr);
  EXPECT_TRUE(Trim(MakeInputAcceptor(std::vector<Label>{1})) ==
              MakeInputAcceptor(std::vector<Label>{1}));
}

TEST(TrimProperty, PreservesPathsAndKBest) {
  std::mt19937_64 rng(79);
  for (int trial = 0; trial < 200; ++trial) {
    Transducer t = oracle::RandomAcyclic(rng, 2 + static_cast<int>(rng() % 7), 3, 0.2, 0.3);
    Transducer tr = Trim(t);
    EXPECT_EQ(Triples(oracle::AllPaths(tr)), Triples(oracle::AllPaths(t)));
    const auto d = ShortestDistanceToFinal(t);
    if (!tr.empty()) {
      EXPECT_EQ(ShortestDistanceToFinal(tr)[tr.Start()], d[t.Start()]);
    }
    auto before = NShortestUnique(t, 3), after = NShortestUnique(tr, 3);
    ASSERT_EQ(before.size(), after.size());
    for (std::size_t i = 0; i < before.size(); ++i)
      EXPECT_EQ(before[i].total_weight, after[i].total_weight);
  }
}

TEST(NShortest, DiamondOrdersOutputs) {
  TransducerBuilder b;
  for (int i = 0; i < 4; ++i) b.AddState();
  b.SetStart(0);
  b.AddArc(0, {1, 5, 1.5, 1});
  b.AddArc(0, {1, 6, 0.5, 2});
  b.AddArc(1, {2, kEpsilon, 0.5, 3});
  b.AddArc(2, {2, kEpsilon, 0.5, 3});
  b.SetFinal(3, 0);
  Transducer t = b.Build();
  auto paths = NShortestUnique(t, 2);
  ASSERT_EQ(paths.size(), 2u);
  EXPECT_EQ(paths[0].output, std::vector<Label>{6});
  EXPECT_DOUBLE_EQ(paths[0].total_weight, 1.0);
  EXPECT_EQ(paths[1].output, std::vector<Label>{5});
  EXPECT_DOUBLE_EQ(paths[1].total_weight, 2.0);
  EXPECT_EQ(NShortestUnique(t, 5).size(), 2u);
  EXPECT_THROW(NShortestUnique(t, 0), ConfigError);
  EXPECT_TRUE(NShortestUnique(Transducer(), 3).empty());
}

TEST(NShortestProperty, MatchesExhaustiveEnumeration) {
  std::mt19937_64 rng(83);
  for (int trial = 0; trial < 400; ++trial) {
    Transducer t = oracle::RandomAcyclic(rng, 2 + static_cast<int>(rng() % 7), 3, 0.3);
    const auto want = oracle::BestPerOutput(t);
    const std::size_t k = 1 + rng() % 5;
    const auto got = NShortestUnique(t, k);
    ASSERT_EQ(got.size(), std::min(k, want.size())) << "trial " << trial;
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_NEAR(got[i].total_weight, want[i].second, 1e-9);
      EXPECT_NEAR(PathSum(t, got[i]), got[i].total_weight, 1e-9);
      if (i) {
        EXPECT_GE(got[i].total_weight, got[i - 1].total_weight);
      }
      auto it = std::find_if(want.begin(), want.end(),
                             [&](const auto& w) { return w.first == got[i].output; });
      ASSERT_NE(it, want.end());
      EXPECT_NEAR(it->second, got[i].total_weight, 1e-9);
      for (std::size_t j = 0; j < i; ++j) EXPECT_NE(got[j].output, got[i].output);
    }
    if (!want.empty()) {
      auto all = oracle::AllPaths(t);
      double best = kInfinity;
      for (const auto& p : all) best = std::min(best, p.weight);
      EXPECT_NEAR(NShortestPaths(t, 1).at(0).total_weight, best, 1e-9);
      EXPECT_NEAR(ShortestDistanceToFinal(t)[t.Start()], best, 1e-9);
      EXPECT_LE(NShortestPaths(t, all.size() + 3).size(), all.size());
      EXPECT_EQ(NShortestPaths(t, all.size()).size(), all.size());
    }
  }
}

TEST(FstText, RoundTrip) {
  std::mt19937_64 rng(89);
  for (int trial = 0; trial < 50; ++trial) {
    Transducer t = oracle::RandomAcyclic(rng, 1 + static_cast<int>(rng() % 7), 3, 0.3);
    std::stringstream ss;
    WriteFstText(ss, t);
    Transducer back = ReadFstText(ss, t.InputSorted());
    EXPECT_EQ(back, t);
  }
  std::istringstream bad("0 1 1 1\n");
  EXPECT_THROW(ReadFstText(bad), ParseError);
}

TransliterationModel Train(const std::vector<TokenPair>& pairs, int order) {
  TrainConfig cfg;
  cfg.lm_order = order;
  return TrainModel(pairs, cfg);
}

TEST(CompileLm, ExpandsDigraphIntoChain) {
  auto m = Train({{"sh", "ш", 1}}, 1);
  ASSERT_EQ(m.lm.vocabulary().size(), 4u);
  EXPECT_EQ(m.lm.vocabulary().Symbol(3), "s+h|ш");
  const Transducer& t = m.compiled;
  ASSERT_EQ(t.NumStates(), 2u);
  ASSERT_EQ(t.Arcs(t.Start()).size(), 1u);
  const Arc first = t.Arcs(t.Start())[0];
  EXPECT_EQ(m.alignment.source_symbols.Symbol(first.ilabel), "s");
  EXPECT_EQ(m.alignment.target_symbols.Symbol(first.olabel), "ш");
  ASSERT_EQ(t.Arcs(first.nextstate).size(), 1u);
  const Arc second = t.Arcs(first.nextstate)[0];
  EXPECT_EQ(m.alignment.source_symbols.Symbol(second.ilabel), "h");
  EXPECT_EQ(second.olabel, kEpsilon);
  EXPECT_EQ(second.weight, 0.0);
  EXPECT_EQ(second.nextstate, t.Start());
}

TEST(CompileLm, UnigramHasOneLogicalState) {
  auto m = Train({{"a", "x", 1}, {"b", "y", 1}}, 1);
  const Transducer& t = m.compiled;
  EXPECT_EQ(t.NumStates(), 1u);
  EXPECT_EQ(t.NumArcs(), 2u);
  EXPECT_TRUE(t.IsFinal(t.Start()));
  // 2 single-graphone sequences: each graphone has probability 1/4 and EOS 1/2.
  const double u = 1 - NGramModel::kUnkProbability;
  EXPECT_NEAR(t.Final(t.Start()), -std::log(u * 0.5), 1e-12);
  for (const Arc& a : t.Arcs(t.Start())) EXPECT_NEAR(a.weight, -std::log(u * 0.25), 1e-12);
}

TEST(CompileLm, HandCountedBigram) {
  // Graphone sequences [a|x b|y] and [a|x]. Histories: root, <s>, a|x, b|y.
  // Arcs: root 2 unigrams; <s> one bigram and a backoff; a|x one bigram and
  // a backoff; b|y a backoff.
  auto m = Train({{"ab", "xy", 1}, {"a", "x", 1}}, 2);
  ASSERT_EQ(m.lm.vocabulary().size(), 5u);
  EXPECT_EQ(m.compiled.NumStates(), 4u);
  EXPECT_EQ(m.compiled.NumArcs(), 7u);
  std::size_t finals = 0, eps = 0;
  for (std::size_t s = 0; s < m.compiled.NumStates(); ++s) {
    finals += m.compiled.IsFinal(static_cast<StateId>(s));
    for (const Arc& a : m.compiled.Arcs(static_cast<StateId>(s)))
      eps += a.ilabel == kEpsilon && a.olabel == kEpsilon;
  }
  EXPECT_EQ(finals, 3u);
  EXPECT_EQ(eps, 3u);
}

// Number of history states, which CompileLm numbers before chain states.
std::size_t HistoryStates(const NGramModel& lm) {
  std::size_t h = 0;
  for (std::size_t i = 0; i < lm.trie().size(); ++i) {
    const auto& n = lm.trie().node(static_cast<int>(i));
    bool history = i == NGramTrie::kRoot;
    if (n.depth < lm.order())
      for (int c = n.first_child; c < n.first_child + n.num_children; ++c)
        history = history || lm.LogProb(c) > NGramModel::kNoEvent;
    h += history;
  }
  return h;
}

// Weights of every path spelling exactly the graphone sequence `seq`.
void GraphonePaths(const Transducer& t, std::size_t histories,
                   const std::vector<std::vector<std::pair<Label, Label>>>& seq, StateId s,
                   std::size_t i, double w, std::vector<double>& out) {
  if (i == seq.size() && t.IsFinal(s)) out.push_back(w + t.Final(s));
  for (const Arc& a : t.Arcs(s)) {
    if (a.ilabel == kEpsilon && a.olabel == kEpsilon) {
      GraphonePaths(t, histories, seq, a.nextstate, i, w + a.weight, out);
      continue;
    }
    if (i == seq.size() || std::pair(a.ilabel, a.olabel) != seq[i][0]) continue;
    StateId cur = a.nextstate;
    double acc = w + a.weight;
    bool ok = true;
    for (std::size_t k = 1; k < seq[i].size() && ok; ++k) {
      ok = static_cast<std::size_t>(cur) >= histories && t.Arcs(cur).size() == 1 &&
           std::pair(t.Arcs(cur)[0].ilabel, t.Arcs(cur)[0].olabel) == seq[i][k];
      if (ok) {
        acc += t.Arcs(cur)[0].weight;
        cur = t.Arcs(cur)[0].nextstate;
      }
    }
    if (ok && static_cast<std::size_t>(cur) < histories)
      GraphonePaths(t, histories, seq, cur, i + 1, acc, out);
  }
}

TEST(CompileLmProperty, EverySequenceHasItsExactPath) {
  std::mt19937_64 rng(97);
  const std::vector<TokenPair> corpus = {{"shab", "шаб", 1}, {"ab", "аб", 1}, {"sha", "ша", 1},
                                         {"bab", "баб", 1}, {"has", "хас", 1}, {"bash", "баш", 1}};
  for (int order : {1, 2, 3, 5}) {
    auto m = Train(corpus, order);
    const std::size_t H = HistoryStates(m.lm);
    for (std::size_t s = H; s < m.compiled.NumStates(); ++s) {
      EXPECT_EQ(m.compiled.Arcs(static_cast<StateId>(s)).size(), 1u);
      EXPECT_FALSE(m.compiled.IsFinal(static_cast<StateId>(s)));
    }
    std::vector<int> graphones;
    for (std::size_t w = 3; w < m.lm.vocabulary().size(); ++w) graphones.push_back(static_cast<int>(w));
    for (int trial = 0; trial < 60; ++trial) {
      std::vector<int> ids;
      std::vector<std::vector<std::pair<Label, Label>>> seq;
      const int len = 1 + static_cast<int>(rng() % 4);
      for (int k = 0; k < len; ++k) {
        const int id = graphones[rng() % graphones.size()];
        ids.push_back(id);
        auto g = *m.alignment.ParseGraphone(m.lm.vocabulary().Symbol(id));
        std::vector<std::pair<Label, Label>> chain;
        for (std::size_t c = 0; c < std::max({g.source.size(), g.target.size(), std::size_t{1}}); ++c)
          chain.push_back({c < g.source.size() ? g.source[c] : kEpsilon,
                           c < g.target.size() ? g.target[c] : kEpsilon});
        seq.push_back(std::move(chain));
      }
      std::vector<double> weights;
      GraphonePaths(m.compiled, H, seq, m.compiled.Start(), 0, 0.0, weights);
      ASSERT_FALSE(weights.empty());
      const double exact = oracle::ExactCost(m.lm, ids);
      const bool found = std::any_of(weights.begin(), weights.end(),
                                     [&](double w) { return std::abs(w - exact) < 1e-6; });
      EXPECT_TRUE(found) << "order " << order << " exact " << exact;
      const double min = *std::min_element(weights.begin(), weights.end());
      EXPECT_NEAR(min, oracle::BackoffMin(m.lm, oracle::StartContext(m.lm), ids, 0), 1e-9);
      EXPECT_LE(min, exact + 1e-9);
      std::vector<std::string> symbols;
      for (int id : ids) symbols.push_back(m.lm.vocabulary().Symbol(id));
      EXPECT_NEAR(exact, -m.lm.Score(symbols) * std::log(10.0), 1e-6);
    }
  }
}

}  // namespace
}  // namespace netrans
