// ngram_oracle.hpp
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
// Sliding-window n-gram counting and a direct evaluation of the
// Witten-Bell recursion from raw counts, both on plain string vectors.

#ifndef NETRANS_TESTS_NGRAM_ORACLE_HPP_
#define NETRANS_TESTS_NGRAM_ORACLE_HPP_

#include <map>
#include <set>
#include <string>
#include <vector>

namespace netrans::oracle {

using Gram = std::vector<std::string>;

class NaiveNGrams {
 public:
  NaiveNGrams(const std::vector<std::vector<std::string>>& sequences, int order) : order_(order) {
    for (const auto& seq : sequences) {
      Gram padded(order - 1, "<s>");
      padded.insert(padded.end(), seq.begin(), seq.end());
      padded.push_back("</s>");
      for (std::size_t end = order - 1; end < padded.size(); ++end) {
        for (int k = 1; k <= order; ++k) {
          if (static_cast<int>(end) + 1 < k) break;
          counts_[Gram(padded.begin() + (end + 1 - k), padded.begin() + end + 1)]++;
        }
        vocab_.insert(padded[end]);
        ++events_;
      }
    }
  }

  std::uint64_t Count(const Gram& g) const {
    auto it = counts_.find(g);
    return it == counts_.end() ? 0 : it->second;
  }
  const std::map<Gram, std::uint64_t>& counts() const { return counts_; }
  const std::set<std::string>& vocabulary() const { return vocab_; }  // predicted symbols
  std::uint64_t events() const { return events_; }
  int order() const { return order_; }

  // Relative frequency c(h w) / sum_v c(h v).
  double Mle(const Gram& h, const std::string& w) const {
    std::uint64_t total = 0;
    for (const auto& v : vocab_) total += Count(Extend(h, v));
    return total ? static_cast<double>(Count(Extend(h, w))) / static_cast<double>(total) : 0.0;
  }

  // Interpolated Witten-Bell with a 1e-10 unknown-word floor at the
  // unigram level.
  double WittenBell(const Gram& h, const std::string& w) const {
    if (h.empty()) {
      if (w == "<unk>") return 1e-10;
      return (1 - 1e-10) * static_cast<double>(Count({w})) / static_cast<double>(events_);
    }
    const Gram shorter(h.begin() + 1, h.end());
    std::uint64_t total = 0, types = 0;
    for (const auto& v : vocab_) {
      const auto c = Count(Extend(h, v));
      total += c;
      types += c > 0;
    }
    const double lower = WittenBell(shorter, w);
    if (total == 0) return lower;
    return (static_cast<double>(Count(Extend(h, w))) + static_cast<double>(types) * lower) /
           static_cast<double>(total + types);
  }

 private:
  static Gram Extend(Gram h, const std::string& w) {
    h.push_back(w);
    return h;
  }

  int order_;
  std::map<Gram, std::uint64_t> counts_;
  std::set<std::string> vocab_;
  std::uint64_t events_ = 0;
};

}  // namespace netrans::oracle

#endif  // NETRANS_TESTS_NGRAM_ORACLE_HPP_
