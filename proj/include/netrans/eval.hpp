// eval.hpp
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
// k-best word error rate and the experiment drivers built on it.

#ifndef NETRANS_EVAL_HPP_
#define NETRANS_EVAL_HPP_

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "netrans/corpus.hpp"
#include "netrans/decode.hpp"
#include "netrans/error.hpp"

namespace netrans {

struct WerReport {
  std::map<std::size_t, double> wer_at;
  std::map<std::size_t, std::size_t> errors_at;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;  // decode failures, counted as errors at every k
};

namespace internal {

inline std::string Canonical(const std::string& s) {
  auto n = Normalize(s, ScriptSpec::Any());
  return n.ok() ? n.value() : s;
}

}  // namespace internal

// Items whose gold target is not among the first k candidates. An empty
// candidate list is an error.
inline std::size_t CountErrors(const std::vector<TokenPair>& gold,
                               const std::vector<std::vector<Candidate>>& predictions,
                               std::size_t k) {
  if (gold.size() != predictions.size())
    throw ProtocolError("gold has " + std::to_string(gold.size()) + " items but predictions have " +
                        std::to_string(predictions.size()));
  if (k == 0) throw ProtocolError("k must be >= 1");
  std::size_t errors = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const std::string want = internal::Canonical(gold[i].target_token);
    const auto& cands = predictions[i];
    const std::size_t n = std::min(k, cands.size());
    bool hit = false;
    for (std::size_t r = 0; r < n && !hit; ++r) hit = internal::Canonical(cands[r].target) == want;
    errors += !hit;
  }
  return errors;
}

inline double WerK(const std::vector<TokenPair>& gold,
                   const std::vector<std::vector<Candidate>>& predictions, std::size_t k) {
  const std::size_t errors = CountErrors(gold, predictions, k);
  if (gold.empty()) throw ProtocolError("cannot compute WER over an empty set");
  return static_cast<double>(errors) / static_cast<double>(gold.size());
}

inline WerReport MakeWerReport(const std::vector<TokenPair>& gold,
                               const std::vector<std::vector<Candidate>>& predictions,
                               const std::vector<std::size_t>& ks, std::size_t skipped = 0) {
  if (gold.empty()) throw ProtocolError("cannot compute WER over an empty set");
  WerReport r;
  r.evaluated = gold.size();
  r.skipped = skipped;
  for (std::size_t k : ks) {
    r.errors_at[k] = CountErrors(gold, predictions, k);
    r.wer_at[k] = static_cast<double>(r.errors_at[k]) / static_cast<double>(r.evaluated);
  }
  return r;
}

// Decodes the test sources only; targets are read after decoding.
inline WerReport EvaluateSplit(const TransliterationModel& model, const SplitBundle& bundle,
                               const std::vector<std::size_t>& ks = {1, 2, 3},
                               std::ostream* progress = nullptr) {
  if (ks.empty()) throw ConfigError("no k values requested");
  std::vector<std::string> words;
  words.reserve(bundle.test.size());
  for (const auto& p : bundle.test) words.push_back(p.source_token);
  const std::size_t kmax = *std::max_element(ks.begin(), ks.end());
  BatchResult decoded = BatchDecode(model, words, kmax, false, progress);
  return MakeWerReport(bundle.test, decoded.candidates, ks, decoded.failures.size());
}

struct LearningCurvePoint {
  std::size_t train_size = 0;
  double wer_1best = 0;
};

// Trains on nested prefixes of one seeded shuffle of the training split and
// evaluates 1-best WER on the fixed test split.
inline std::vector<LearningCurvePoint> LearningCurve(const SplitBundle& bundle,
                                                     std::vector<std::size_t> sizes,
                                                     std::uint64_t seed, const TrainConfig& config,
                                                     std::ostream* progress = nullptr) {
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  std::vector<TokenPair> shuffled = bundle.train;
  SeededShuffle(shuffled, seed);
  std::vector<LearningCurvePoint> points;
  if (!sizes.empty() && sizes.back() > shuffled.size())
    throw ConfigError("learning-curve size " + std::to_string(sizes.back()) +
                      " exceeds the training split (" + std::to_string(shuffled.size()) + ")");
  for (std::size_t n : sizes) {
    if (n == 0) throw ConfigError("learning-curve sizes must be positive");
    std::vector<TokenPair> subset(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n));
    TransliterationModel model = TrainModel(subset, config);
    WerReport r = EvaluateSplit(model, bundle, {1});
    points.push_back({n, r.wer_at.at(1)});
    if (progress) *progress << "train_size=" << n << " wer=" << r.wer_at.at(1) << '\n';
  }
  return points;
}

struct ExperimentReport {
  std::string dataset;
  std::string direction;
  std::string condition;
  WerReport wer;
};

inline TrainConfig Reversed(const TrainConfig& config) {
  TrainConfig r = config;
  std::swap(r.source_lang, r.target_lang);
  std::swap(r.align.source_tokenization, r.align.target_tokenization);
  return r;
}

// Trains and evaluates on the bundle as given and with every pair's sides
// exchanged. Both directions use the same alignment and LM settings.
inline std::pair<ExperimentReport, ExperimentReport> DirectionExperiment(
    const SplitBundle& bundle, const std::vector<std::size_t>& ks, const TrainConfig& config,
    const std::string& dataset = "") {
  auto run = [&](const SplitBundle& b, const TrainConfig& c) {
    TransliterationModel model = TrainModel(b.train, c);
    return ExperimentReport{dataset, c.source_lang + "->" + c.target_lang, "full",
                            EvaluateSplit(model, b, ks)};
  };
  return {run(bundle, config), run(SwapSides(bundle), Reversed(config))};
}

inline constexpr const char* kConditionBaseline = "Full Train, Full Test (Baseline)";
inline constexpr const char* kConditionFilteredTest = "Full Train, Filtered Test";
inline constexpr const char* kConditionFilteredTrain = "Filtered Train, Full Test";
inline constexpr const char* kConditionFilteredBoth = "Filtered Train, Filtered Test";

// The four cells of {full, filtered} train x {full, filtered} test.
// `tokens` is the token-aligned corpus before dedup, so frequencies are
// occurrence counts. One seeded split is made; the filtered train and test
// sets are its tokens occurring at least twice.
inline std::vector<ExperimentReport> SingletonExperiment(const std::vector<TokenPair>& tokens,
                                                         std::uint64_t seed,
                                                         const TrainConfig& config,
                                                         const std::vector<std::size_t>& ks = {1, 2, 3},
                                                         const std::string& dataset = "",
                                                         SplitRatios ratios = {}) {
  SplitBundle full = Split(DedupMostFrequent(tokens), ratios, seed);
  SplitBundle filtered = full;
  filtered.train = FilterSingletons(full.train);
  filtered.dev = FilterSingletons(full.dev);
  filtered.test = FilterSingletons(full.test);
  if (filtered.train.empty() || filtered.test.empty())
    throw TrainingError("no token occurs twice; the filtered conditions are empty");
  const std::string direction = config.source_lang + "->" + config.target_lang;
  TransliterationModel full_model = TrainModel(full.train, config);
  TransliterationModel filtered_model = TrainModel(filtered.train, config);
  return {
      {dataset, direction, kConditionBaseline, EvaluateSplit(full_model, full, ks)},
      {dataset, direction, kConditionFilteredTest, EvaluateSplit(full_model, filtered, ks)},
      {dataset, direction, kConditionFilteredTrain, EvaluateSplit(filtered_model, full, ks)},
      {dataset, direction, kConditionFilteredBoth, EvaluateSplit(filtered_model, filtered, ks)},
  };
}

struct TokenFrequencyReport {
  std::size_t tokens = 0;
  std::size_t singletons = 0;
  double singleton_fraction = 0;
  double mean_length_singleton = 0;  // in source graphemes
  double mean_length_frequent = 0;
  double spearman = 0;  // frequency vs length
};

namespace internal {

inline std::vector<double> AverageRanks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j) + 1.0) / 2.0;
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = avg;
    i = j;
  }
  return ranks;
}

inline double Pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  if (x.size() < 2) return 0;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0 || syy <= 0) return 0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace internal

inline double SpearmanCorrelation(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ConfigError("correlation inputs differ in length");
  return internal::Pearson(internal::AverageRanks(x), internal::AverageRanks(y));
}

// Statistics over distinct source tokens; rows with the same source token
// have their frequencies summed.
inline TokenFrequencyReport TokenFrequencyStats(const std::vector<TokenPair>& pairs,
                                                Tokenization source_tokenization = Tokenization::kChars) {
  std::map<std::string, std::size_t> freq;
  for (const auto& p : pairs) freq[p.source_token] += p.frequency;
  TokenFrequencyReport r;
  r.tokens = freq.size();
  if (freq.empty()) return r;
  std::vector<double> f, len;
  double sum_single = 0, sum_frequent = 0;
  for (const auto& [token, n] : freq) {
    const double l = static_cast<double>(SplitGraphemes(token, source_tokenization).size());
    f.push_back(static_cast<double>(n));
    len.push_back(l);
    if (n == 1) {
      ++r.singletons;
      sum_single += l;
    } else {
      sum_frequent += l;
    }
  }
  r.singleton_fraction = static_cast<double>(r.singletons) / static_cast<double>(r.tokens);
  if (r.singletons) r.mean_length_singleton = sum_single / static_cast<double>(r.singletons);
  if (r.tokens > r.singletons)
    r.mean_length_frequent = sum_frequent / static_cast<double>(r.tokens - r.singletons);
  r.spearman = SpearmanCorrelation(f, len);
  return r;
}

inline void WriteReportTsv(std::ostream& os, const std::vector<ExperimentReport>& reports) {
  os << "dataset\tdirection\tcondition\tk\twer\tevaluated\terrors\tskipped\n";
  for (const auto& r : reports)
    for (const auto& [k, wer] : r.wer.wer_at)
      os << r.dataset << '\t' << r.direction << '\t' << r.condition << '\t' << k << '\t'
         << text::FormatDouble(wer) << '\t' << r.wer.evaluated << '\t' << r.wer.errors_at.at(k)
         << '\t' << r.wer.skipped << '\n';
}

// Fixed-width table, one row per report and one column per k.
inline void WriteReportTable(std::ostream& os, const std::vector<ExperimentReport>& reports) {
  std::vector<std::size_t> ks;
  for (const auto& r : reports)
    for (const auto& [k, _] : r.wer.wer_at)
      if (std::find(ks.begin(), ks.end(), k) == ks.end()) ks.push_back(k);
  std::sort(ks.begin(), ks.end());
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"dataset", "direction", "condition"});
  for (std::size_t k : ks) rows[0].push_back(std::to_string(k) + "-best");
  rows[0].push_back("n");
  for (const auto& r : reports) {
    std::vector<std::string> row{r.dataset.empty() ? "-" : r.dataset, r.direction, r.condition};
    for (std::size_t k : ks) {
      auto it = r.wer.wer_at.find(k);
      std::ostringstream cell;
      if (it == r.wer.wer_at.end()) cell << "-";
      else cell << std::fixed << std::setprecision(2) << it->second;
      row.push_back(cell.str());
    }
    row.push_back(std::to_string(r.wer.evaluated));
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> width(rows[0].size(), 0);
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c)
      width[c] = std::max(width[c], utf8::Length(row[c]));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < rows[i].size(); ++c) {
      os << rows[i][c];
      if (c + 1 < rows[i].size()) os << std::string(width[c] - utf8::Length(rows[i][c]) + 2, ' ');
    }
    os << '\n';
    if (i == 0) {
      std::size_t total = 0;
      for (std::size_t c = 0; c < width.size(); ++c) total += width[c] + (c + 1 < width.size() ? 2 : 0);
      os << std::string(total, '-') << '\n';
    }
  }
}

inline void WriteLearningCurveTsv(std::ostream& os, const std::vector<LearningCurvePoint>& points) {
  os << "train_size\twer\n";
  for (const auto& p : points) os << p.train_size << '\t' << text::FormatDouble(p.wer_1best) << '\n';
}

}  // namespace netrans

#endif  // NETRANS_EVAL_HPP_
