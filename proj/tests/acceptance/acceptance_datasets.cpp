// acceptance_datasets.cpp
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

// Dataset-level acceptance checks against the released splits.
//
// Data layout: $NETRANS_DATA_DIR/<name>/{train,dev,test}.tsv with source and
// target token columns, plus an optional tokens.tsv holding the token pairs
// with occurrence frequencies for the singleton criteria. Each criterion
// prints PASS, FAIL or SKIP. Exit status is 1 on any failure, 77 when some
// criterion was skipped and none failed, and 0 otherwise.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "netrans/eval.hpp"

namespace {

using namespace netrans;
namespace fs = std::filesystem;

constexpr double kAverageTolerance = 0.05;
constexpr double kWerTolerance = 0.05;
constexpr double kCurveNoise = 0.02;
constexpr double kSingletonFractionTolerance = 0.02;
constexpr double kTokenLengthTolerance = 0.1;
constexpr std::uint64_t kSeed = 1;

struct Table1Row {
  std::size_t total, train;
  double avg_source, avg_target;
  std::size_t source_alphabet, target_alphabet;
};

struct Dataset {
  std::string name;   // directory under the data root
  std::string label;  // report label
  std::string source_lang, target_lang;
  Tokenization target_tok = Tokenization::kChars;
  bool wikidata = false;
  Table1Row table1;
  double wer[3];  // 1-, 2- and 3-best reference
};

const std::vector<Dataset> kDatasets = {
    {"wd-en-ru", "WD-EN-RU", "en", "ru", Tokenization::kChars, true,
     {164640, 105371, 7.0, 6.6, 188, 62}, {0.38, 0.24, 0.19}},
    {"wd-en-ka", "WD-EN-KA", "en", "ja", Tokenization::kChars, true,
     {98820, 63246, 7.0, 4.8, 170, 105}, {0.57, 0.43, 0.36}},
    {"wd-en-ar", "WD-EN-AR", "en", "ar", Tokenization::kChars, true,
     {74973, 41584, 6.7, 5.9, 145, 67}, {0.51, 0.37, 0.30}},
    {"wd-en-he", "WD-EN-HE", "en", "he", Tokenization::kChars, true,
     {50039, 32036, 6.7, 5.6, 135, 57}, {0.49, 0.32, 0.26}},
    {"rosca-ar-en", "AR-EN", "ar", "en", Tokenization::kChars, false,
     {15898, 12877, 6.0, 6.8, 48, 39}, {0.75, 0.65, 0.59}},
    {"cmudict", "CMUdict", "en", "arpabet", Tokenization::kWhitespace, false,
     {126191, 113438, 7.5, 6.3, 27, 39}, {0.27, 0.14, 0.10}},
};

enum class Status { kPass, kFail, kSkip };

struct Criterion {
  Status status = Status::kPass;
  std::vector<std::string> notes;

  void Check(bool ok, const std::string& what) {
    notes.push_back((ok ? "ok " : "MISMATCH ") + what);
    if (!ok) status = Status::kFail;
  }
  void Missing(const std::string& what) {
    notes.push_back("missing " + what);
    if (status == Status::kPass) status = Status::kSkip;
  }
};

std::string Fmt(double v) {
  std::ostringstream os;
  os.precision(8);
  os << v;
  return os.str();
}

bool Near(double got, double want, double tol) { return std::abs(got - want) <= tol + 1e-12; }

std::string Compare(double got, double want) { return "got " + Fmt(got) + " want " + Fmt(want); }

class Data {
 public:
  explicit Data(fs::path root) : root_(std::move(root)) {}

  const SplitBundle* Split(const Dataset& d) {
    auto it = splits_.find(d.name);
    if (it != splits_.end()) return it->second ? &*it->second : nullptr;
    const fs::path dir = root_ / d.name;
    std::optional<SplitBundle> b;
    if (fs::exists(dir / "train.tsv") && fs::exists(dir / "test.tsv")) {
      const fs::path dev = dir / "dev.tsv";
      SplitBundle s;
      s.train = ReadTokenPairs((dir / "train.tsv").string());
      if (fs::exists(dev)) s.dev = ReadTokenPairs(dev.string());
      s.test = ReadTokenPairs((dir / "test.tsv").string());
      VerifyDisjoint(s);
      b = std::move(s);
    }
    return (splits_[d.name] = std::move(b)) ? &*splits_[d.name] : nullptr;
  }

  const std::vector<TokenPair>* Tokens(const Dataset& d) {
    auto it = tokens_.find(d.name);
    if (it == tokens_.end()) {
      const fs::path p = root_ / d.name / "tokens.tsv";
      std::optional<std::vector<TokenPair>> t;
      if (fs::exists(p)) t = ReadTokenPairs(p.string());
      it = tokens_.emplace(d.name, std::move(t)).first;
    }
    return it->second ? &*it->second : nullptr;
  }

  // Forward and reverse reports at k = 1..3, computed once per dataset.
  const std::pair<ExperimentReport, ExperimentReport>& Directions(const Dataset& d) {
    auto it = directions_.find(d.name);
    if (it == directions_.end()) {
      std::cerr << "# training " << d.label << " in both directions\n";
      it = directions_.emplace(d.name, DirectionExperiment(*Split(d), {1, 2, 3}, Config(d), d.label)).first;
    }
    return it->second;
  }

  const ExperimentReport& Forward(const Dataset& d) {
    if (!d.wikidata) {
      auto it = forward_.find(d.name);
      if (it == forward_.end()) {
        std::cerr << "# training " << d.label << "\n";
        const SplitBundle& b = *Split(d);
        ExperimentReport r{d.label, d.source_lang + "->" + d.target_lang, "full",
                           EvaluateSplit(TrainModel(b.train, Config(d)), b)};
        it = forward_.emplace(d.name, std::move(r)).first;
      }
      return it->second;
    }
    return Directions(d).first;
  }

  static TrainConfig Config(const Dataset& d) {
    TrainConfig c;
    c.source_lang = d.source_lang;
    c.target_lang = d.target_lang;
    c.align.target_tokenization = d.target_tok;
    return c;
  }

 private:
  fs::path root_;
  std::map<std::string, std::optional<SplitBundle>> splits_;
  std::map<std::string, std::optional<std::vector<TokenPair>>> tokens_;
  std::map<std::string, std::pair<ExperimentReport, ExperimentReport>> directions_;
  std::map<std::string, ExperimentReport> forward_;
};

Criterion Table1(Data& data) {
  Criterion c;
  for (const auto& d : kDatasets) {
    const SplitBundle* b = data.Split(d);
    if (!b) {
      c.Missing(d.name);
      continue;
    }
    const CorpusStats s = Stats(*b, Tokenization::kChars, d.target_tok);
    const auto& t = d.table1;
    c.Check(s.total_size == t.total, d.label + " total " + Compare(s.total_size, t.total));
    c.Check(s.training_set_size == t.train, d.label + " train " + Compare(s.training_set_size, t.train));
    c.Check(Near(s.avg_source_length, t.avg_source, kAverageTolerance),
            d.label + " avg source " + Compare(s.avg_source_length, t.avg_source));
    c.Check(Near(s.avg_target_length, t.avg_target, kAverageTolerance),
            d.label + " avg target " + Compare(s.avg_target_length, t.avg_target));
    c.Check(s.source_alphabet_size == t.source_alphabet,
            d.label + " source alphabet " + Compare(s.source_alphabet_size, t.source_alphabet));
    c.Check(s.target_alphabet_size == t.target_alphabet,
            d.label + " target alphabet " + Compare(s.target_alphabet_size, t.target_alphabet));
  }
  return c;
}

Criterion Table2(Data& data) {
  Criterion c;
  for (const auto& d : kDatasets) {
    if (!data.Split(d)) {
      c.Missing(d.name);
      continue;
    }
    const WerReport& r = data.Forward(d).wer;
    for (std::size_t k = 1; k <= 3; ++k)
      c.Check(Near(r.wer_at.at(k), d.wer[k - 1], kWerTolerance),
              d.label + " " + std::to_string(k) + "-best " + Compare(r.wer_at.at(k), d.wer[k - 1]));
  }
  return c;
}

Criterion Curves(Data& data) {
  Criterion c;
  struct Target {
    const char* name;
    std::vector<std::size_t> sizes;  // 0 stands for the full training split
    std::map<std::size_t, double> reference;
  };
  const std::vector<Target> targets = {
      {"wd-en-ru", {5000, 10000, 25000, 50000, 0}, {{50000, 0.40}, {0, 0.38}}},
      {"cmudict", {5000, 10000, 25000, 50000, 100000}, {{50000, 0.33}, {100000, 0.28}}},
  };
  for (const auto& t : targets) {
    const Dataset& d = *std::find_if(kDatasets.begin(), kDatasets.end(),
                                     [&](const Dataset& x) { return x.name == t.name; });
    const SplitBundle* b = data.Split(d);
    if (!b) {
      c.Missing(d.name);
      continue;
    }
    std::vector<std::size_t> sizes;
    for (std::size_t n : t.sizes) sizes.push_back(n ? n : b->train.size());
    std::vector<LearningCurvePoint> points;
    try {
      points = LearningCurve(*b, sizes, kSeed, Data::Config(d), &std::cerr);
    } catch (const Error& e) {
      c.Check(false, d.label + " learning curve: " + e.what());
      continue;
    }
    for (std::size_t i = 1; i < points.size(); ++i)
      c.Check(points[i].wer_1best <= points[i - 1].wer_1best + kCurveNoise,
              d.label + " monotone at " + std::to_string(points[i].train_size) + " " +
                  Compare(points[i].wer_1best, points[i - 1].wer_1best));
    for (const auto& [size, want] : t.reference) {
      const std::size_t n = size ? size : b->train.size();
      for (const auto& p : points)
        if (p.train_size == n)
          c.Check(Near(p.wer_1best, want, kWerTolerance),
                  d.label + " at " + std::to_string(n) + " " + Compare(p.wer_1best, want));
    }
  }
  return c;
}

Criterion DirectionOrdering(Data& data) {
  Criterion c;
  for (const auto& d : kDatasets) {
    if (!d.wikidata) continue;
    if (!data.Split(d)) {
      c.Missing(d.name);
      continue;
    }
    const auto& [fwd, bwd] = data.Directions(d);
    const double f = fwd.wer.wer_at.at(1), r = bwd.wer.wer_at.at(1);
    c.Check(f < r, d.label + " " + fwd.direction + " " + Fmt(f) + " < " + bwd.direction + " " + Fmt(r));
  }
  return c;
}

Criterion SingletonOrdering(Data& data) {
  Criterion c;
  for (const auto& d : kDatasets) {
    if (!d.wikidata) continue;
    const auto* tokens = data.Tokens(d);
    if (!tokens) {
      c.Missing(d.name + "/tokens.tsv");
      continue;
    }
    std::cerr << "# singleton experiment " << d.label << "\n";
    const auto reports = SingletonExperiment(*tokens, kSeed, Data::Config(d), {1}, d.label);
    const double base = reports[0].wer.wer_at.at(1);
    const double filtered_test = reports[1].wer.wer_at.at(1);
    const double filtered_train = reports[2].wer.wer_at.at(1);
    c.Check(filtered_test < base, d.label + " filtered test " + Fmt(filtered_test) + " < " + Fmt(base));
    c.Check(filtered_train > base, d.label + " filtered train " + Fmt(filtered_train) + " > " + Fmt(base));
  }
  return c;
}

Criterion TokenStatistics(Data& data) {
  Criterion c;
  std::vector<TokenPair> pooled;
  for (const auto& d : kDatasets) {
    if (!d.wikidata) continue;
    const auto* tokens = data.Tokens(d);
    if (!tokens) {
      c.Missing(d.name + "/tokens.tsv");
      continue;
    }
    pooled.insert(pooled.end(), tokens->begin(), tokens->end());
    if (d.name == "wd-en-he") {
      const auto r = TokenFrequencyStats(*tokens);
      c.Check(Near(r.singleton_fraction, 0.77, kSingletonFractionTolerance),
              "WD-EN-HE singleton fraction " + Compare(r.singleton_fraction, 0.77));
    }
  }
  if (c.status == Status::kSkip) return c;
  const auto r = TokenFrequencyStats(pooled);
  c.Check(Near(r.mean_length_singleton, 7.1, kTokenLengthTolerance),
          "pooled f=1 mean length " + Compare(r.mean_length_singleton, 7.1));
  c.Check(Near(r.mean_length_frequent, 6.4, kTokenLengthTolerance),
          "pooled f>=2 mean length " + Compare(r.mean_length_frequent, 6.4));
  return c;
}

}  // namespace

int main() {
  const char* root = std::getenv("NETRANS_DATA_DIR");
  Data data(root ? fs::path(root) : fs::path("data"));
  struct Entry {
    const char* id;
    const char* title;
    Criterion (*run)(Data&);
  };
  const Entry entries[] = {
      {"1", "dataset statistics table", Table1},
      {"2", "1/2/3-best WER against the WFST reference row", Table2},
      {"3", "learning curves", Curves},
      {"4", "English->X WER below X->English", DirectionOrdering},
      {"5", "singleton filtering ordering", SingletonOrdering},
      {"6", "token frequency statistics", TokenStatistics},
  };
  bool failed = false, skipped = false;
  for (const auto& e : entries) {
    Criterion c;
    try {
      c = e.run(data);
    } catch (const std::exception& ex) {
      c.Check(false, std::string("error: ") + ex.what());
    }
    const char* tag = c.status == Status::kPass ? "PASS" : c.status == Status::kFail ? "FAIL" : "SKIP";
    std::cout << tag << " " << e.id << " " << e.title;
    if (c.status == Status::kSkip && root == nullptr) std::cout << " (NETRANS_DATA_DIR not set)";
    std::cout << std::endl;
    for (const auto& n : c.notes) std::cout << "    " << n << std::endl;
    failed |= c.status == Status::kFail;
    skipped |= c.status == Status::kSkip;
  }
  if (failed) return 1;
  return skipped ? 77 : 0;
}
