// segmentation_oracle.hpp
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
// Exhaustive enumeration of monotone segmentations, written without any of
// the lattice code so it can serve as an independent reference.

#ifndef NETRANS_TESTS_SEGMENTATION_ORACLE_HPP_
#define NETRANS_TESTS_SEGMENTATION_ORACLE_HPP_

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "netrans/align.hpp"

namespace netrans::oracle {

// A segmentation is the list of (source length, target length) blocks.
using Segmentation = std::vector<std::pair<int, int>>;

inline bool ShapeAllowed(int a, int b, const AlignmentConfig& c) {
  if (a < 0 || b < 0 || (a == 0 && b == 0) || a > c.max_source_len || b > c.max_target_len)
    return false;
  if (b == 0) return c.allow_target_deletion;
  if (a == 0) return c.allow_source_deletion;
  return a == 1 || b == 1;
}

inline void Enumerate(int s, int t, const AlignmentConfig& c, Segmentation& cur,
                      std::vector<Segmentation>& out) {
  if (s == 0 && t == 0) {
    out.push_back(cur);
    return;
  }
  for (int a = 0; a <= s; ++a)
    for (int b = 0; b <= t; ++b) {
      if (!ShapeAllowed(a, b, c)) continue;
      cur.push_back({a, b});
      Enumerate(s - a, t - b, c, cur, out);
      cur.pop_back();
    }
}

inline std::vector<Segmentation> Segmentations(int source_len, int target_len,
                                               const AlignmentConfig& c) {
  std::vector<Segmentation> out;
  Segmentation cur;
  Enumerate(source_len, target_len, c, cur, out);
  return out;
}

// Graphone sequence of a segmentation over concrete grapheme strings.
inline std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> Blocks(
    const Segmentation& seg, const std::vector<std::string>& src,
    const std::vector<std::string>& tgt) {
  std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> out;
  std::size_t i = 0, j = 0;
  for (auto [a, b] : seg) {
    out.push_back({{src.begin() + i, src.begin() + i + a}, {tgt.begin() + j, tgt.begin() + j + b}});
    i += a;
    j += b;
  }
  return out;
}

// Natural-log probability of one segmentation; -inf when a block is not a
// graphone of the model.
inline double SegmentationLogProb(const Segmentation& seg, const TokenPair& pair,
                                  const AlignmentModel& model) {
  const auto src = SplitGraphemes(pair.source_token, model.config.source_tokenization);
  const auto tgt = SplitGraphemes(pair.target_token, model.config.target_tokenization);
  double lp = 0;
  for (const auto& [s, t] : Blocks(seg, src, tgt)) {
    Graphone g;
    for (const auto& x : s) {
      auto id = model.source_symbols.Find(x);
      if (!id) return -std::numeric_limits<double>::infinity();
      g.source.push_back(*id);
    }
    for (const auto& x : t) {
      auto id = model.target_symbols.Find(x);
      if (!id) return -std::numeric_limits<double>::infinity();
      g.target.push_back(*id);
    }
    auto gid = model.graphones.Find(g);
    if (!gid) return -std::numeric_limits<double>::infinity();
    lp += model.logprob[*gid];
  }
  return lp;
}

// log sum over all segmentations of the path probability.
inline double BruteForceLogLikelihood(const TokenPair& pair, const AlignmentModel& model) {
  const auto src = SplitGraphemes(pair.source_token, model.config.source_tokenization);
  const auto tgt = SplitGraphemes(pair.target_token, model.config.target_tokenization);
  double total = 0;
  for (const auto& seg : Segmentations(static_cast<int>(src.size()), static_cast<int>(tgt.size()),
                                       model.config))
    total += std::exp(SegmentationLogProb(seg, pair, model));
  return std::log(total);
}

inline double BruteForceBestLogProb(const TokenPair& pair, const AlignmentModel& model) {
  const auto src = SplitGraphemes(pair.source_token, model.config.source_tokenization);
  const auto tgt = SplitGraphemes(pair.target_token, model.config.target_tokenization);
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& seg : Segmentations(static_cast<int>(src.size()), static_cast<int>(tgt.size()),
                                       model.config))
    best = std::max(best, SegmentationLogProb(seg, pair, model));
  return best;
}

}  // namespace netrans::oracle

#endif  // NETRANS_TESTS_SEGMENTATION_ORACLE_HPP_
