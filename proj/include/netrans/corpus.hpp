// corpus.hpp
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
// Bilingual name corpus curation: dump ingestion, normalization, token
// alignment of multi-token names, deduplication, singleton filtering,
// seeded splits and dataset statistics.

#ifndef NETRANS_CORPUS_HPP_
#define NETRANS_CORPUS_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"
#include "netrans/error.hpp"
#include "netrans/utf8.hpp"

namespace netrans {

struct CharRange {
  char32_t lo;
  char32_t hi;
};

// Which characters a label may contain, and how it breaks into tokens.
struct ScriptSpec {
  std::string language_tag;  // dump label key: en, ru, he, ar, ja
  std::vector<CharRange> allowed_ranges;
  std::u32string separator_chars;
  bool requires_separator_on_multitoken = false;
  // "last, first" targets are reordered to "first last" before pairing.
  bool comma_reorder = false;
  Tokenization tokenization = Tokenization::kChars;

  bool Allows(char32_t cp) const {
    for (const auto& r : allowed_ranges)
      if (cp >= r.lo && cp <= r.hi) return true;
    return false;
  }
  bool IsSeparator(char32_t cp) const {
    return separator_chars.find(cp) != std::u32string::npos;
  }

  static ScriptSpec Latin() {
    return {"en",
            {{U'a', U'z'}, {U'A', U'Z'}, {U'\'', U'\''}, {U'-', U'.'},
             {0x00C0, 0x00D6}, {0x00D8, 0x00F6}, {0x00F8, 0x024F},
             {0x0250, 0x02AF}, {0x0300, 0x036F}, {0x1E00, 0x1EFF}},
            U" ",
            false,
            false,
            Tokenization::kChars};
  }
  static ScriptSpec Cyrillic() {
    return {"ru",
            {{0x0400, 0x052F}, {U'\'', U'\''}, {U'-', U'-'}},
            U" ,",
            false,
            true,
            Tokenization::kChars};
  }
  static ScriptSpec Hebrew() {
    return {"he",
            {{0x0591, 0x05F4}, {U'\'', U'\''}, {U'-', U'-'}, {U'"', U'"'}},
            U" ",
            false,
            false,
            Tokenization::kChars};
  }
  static ScriptSpec Arabic() {
    return {"ar",
            {{0x0600, 0x06FF}, {0x0750, 0x077F}, {0x08A0, 0x08FF},
             {0xFB50, 0xFDFF}, {0xFE70, 0xFEFF}, {U'-', U'-'}},
            U" ",
            false,
            false,
            Tokenization::kChars};
  }
  // Katakana block minus the middledot (a separator) and the double hyphen.
  static ScriptSpec Katakana() {
    return {"ja", {{0x30A1, 0x30FA}, {0x30FC, 0x30FF}, {0x31F0, 0x31FF}},
            U" ・", true, false, Tokenization::kChars};
  }
  // No script restriction; used for phone sets and pre-curated data.
  static ScriptSpec Any(Tokenization tok = Tokenization::kChars) {
    return {"any", {{0x21, 0x10FFFF}}, tok == Tokenization::kChars ? U" " : U"",
            false, false, tok};
  }

  static ScriptSpec ForLanguage(std::string_view tag) {
    if (tag == "en") return Latin();
    if (tag == "ru") return Cyrillic();
    if (tag == "he") return Hebrew();
    if (tag == "ar") return Arabic();
    if (tag == "ja" || tag == "ka") return Katakana();
    if (tag == "any") return Any();
    if (tag == "arpabet") {
      ScriptSpec spec = Any(Tokenization::kWhitespace);
      spec.language_tag = "arpabet";
      return spec;
    }
    throw ConfigError("unknown language tag '" + std::string(tag) + "'");
  }
};

struct NamePhrasePair {
  std::string source;
  std::string target;
  std::string pair_id;
};

struct TokenPair {
  std::string source_token;
  std::string target_token;
  std::size_t frequency = 1;

  bool operator==(const TokenPair&) const = default;
};

enum class RejectReason {
  kEmpty,
  kScriptViolation,
  kCountMismatch,
  kKatakanaUnsegmented,
  kMissingLabel,
  kNotHuman,
  kMalformed,
};

inline std::string_view ToString(RejectReason r) {
  switch (r) {
    case RejectReason::kEmpty: return "empty";
    case RejectReason::kScriptViolation: return "script-violation";
    case RejectReason::kCountMismatch: return "count-mismatch";
    case RejectReason::kKatakanaUnsegmented: return "katakana-unsegmented";
    case RejectReason::kMissingLabel: return "missing-label";
    case RejectReason::kNotHuman: return "not-human";
    case RejectReason::kMalformed: return "malformed";
  }
  return "unknown";
}

struct Rejection {
  RejectReason reason;
};

// Either a value or the reason it was rejected.
template <class T>
class Outcome {
 public:
  Outcome(T value) : v_(std::move(value)) {}
  Outcome(Rejection r) : v_(r) {}

  bool ok() const { return std::holds_alternative<T>(v_); }
  explicit operator bool() const { return ok(); }
  const T& value() const { return std::get<T>(v_); }
  T& value() { return std::get<T>(v_); }
  RejectReason reason() const { return std::get<Rejection>(v_).reason; }

 private:
  std::variant<T, Rejection> v_;
};

// Lowercases, turns underscores into spaces, deletes braces and
// exclamation marks, collapses runs of spaces. Diacritics are kept.
inline Outcome<std::string> Normalize(std::string_view raw,
                                      const ScriptSpec& spec) {
  std::u32string cps;
  try {
    cps = utf8::Decode(raw);
  } catch (const ParseError&) {
    return Rejection{RejectReason::kScriptViolation};
  }
  std::u32string out;
  out.reserve(cps.size());
  for (char32_t cp : cps) {
    if (cp == U'_' || cp == U'\t') cp = U' ';
    if (cp == U'{' || cp == U'}' || cp == U'!') continue;
    if (cp == U' ') {
      if (out.empty() || out.back() == U' ') continue;
      out.push_back(cp);
      continue;
    }
    out.push_back(utf8::ToLower(cp));
  }
  while (!out.empty() && out.back() == U' ') out.pop_back();
  if (out.empty()) return Rejection{RejectReason::kEmpty};
  for (char32_t cp : out) {
    if (cp == U' ' || spec.IsSeparator(cp)) continue;
    if (!spec.Allows(cp)) return Rejection{RejectReason::kScriptViolation};
  }
  return utf8::Encode(out);
}

namespace internal {

inline std::vector<std::string> SplitOnSeparators(std::u32string_view text,
                                                  const ScriptSpec& spec) {
  std::vector<std::string> tokens;
  std::u32string cur;
  for (char32_t cp : text) {
    if (cp == U' ' || spec.IsSeparator(cp)) {
      if (!cur.empty()) tokens.push_back(utf8::Encode(cur));
      cur.clear();
    } else {
      cur.push_back(cp);
    }
  }
  if (!cur.empty()) tokens.push_back(utf8::Encode(cur));
  return tokens;
}

}  // namespace internal

// Splits a normalized phrase pair into positionally paired tokens.
inline Outcome<std::vector<TokenPair>> AlignTokens(
    const NamePhrasePair& pair, const ScriptSpec& source_spec,
    const ScriptSpec& target_spec) {
  const std::u32string src = utf8::Decode(pair.source);
  std::u32string tgt = utf8::Decode(pair.target);

  if (target_spec.comma_reorder) {
    auto comma = tgt.find(U',');
    if (comma != std::u32string::npos) {
      std::u32string last = tgt.substr(0, comma);
      std::u32string first = tgt.substr(comma + 1);
      tgt = first + U' ' + last;
    }
  }

  auto source_tokens = internal::SplitOnSeparators(src, source_spec);
  auto target_tokens = internal::SplitOnSeparators(tgt, target_spec);
  if (source_tokens.empty() || target_tokens.empty())
    return Rejection{RejectReason::kEmpty};

  if (target_spec.requires_separator_on_multitoken &&
      source_tokens.size() > 1 && target_tokens.size() == 1)
    return Rejection{RejectReason::kKatakanaUnsegmented};
  if (source_tokens.size() != target_tokens.size())
    return Rejection{RejectReason::kCountMismatch};

  std::vector<TokenPair> out;
  out.reserve(source_tokens.size());
  for (std::size_t i = 0; i < source_tokens.size(); ++i)
    out.push_back({std::move(source_tokens[i]), std::move(target_tokens[i]), 1});
  return out;
}

struct RejectionRow {
  std::string raw_source;
  std::string raw_target;
  RejectReason reason;
};

struct IngestReport {
  std::vector<NamePhrasePair> pairs;
  std::vector<RejectionRow> rejections;
  std::size_t records = 0;
  std::size_t malformed = 0;
  std::size_t missing_label = 0;
  std::size_t not_human = 0;
};

namespace internal {

inline const nlohmann::json* LabelValue(const nlohmann::json& entity,
                                        const std::string& lang) {
  auto labels = entity.find("labels");
  if (labels == entity.end() || !labels->is_object()) return nullptr;
  auto label = labels->find(lang);
  if (label == labels->end()) return nullptr;
  if (label->is_string()) return &*label;
  if (!label->is_object()) return nullptr;
  auto value = label->find("value");
  if (value == label->end() || !value->is_string()) return nullptr;
  return &*value;
}

inline constexpr std::string_view kInstanceOf = "P31";
inline constexpr std::string_view kHuman = "Q5";

inline bool IsHuman(const nlohmann::json& entity) {
  auto claims = entity.find("claims");
  if (claims == entity.end() || !claims->is_object()) return false;
  auto p31 = claims->find(std::string(kInstanceOf));
  if (p31 == claims->end() || !p31->is_array()) return false;
  for (const auto& claim : *p31) {
    const auto* v = &claim;
    for (const char* key : {"mainsnak", "datavalue", "value"}) {
      if (!v->is_object() || !v->contains(key)) {
        v = nullptr;
        break;
      }
      v = &(*v)[key];
    }
    if (!v) continue;
    if (v->is_object() && v->contains("id") && (*v)["id"] == kHuman)
      return true;
    if (v->is_object() && v->contains("numeric-id") &&
        (*v)["numeric-id"] == 5)
      return true;
  }
  return false;
}

}  // namespace internal

// One entity object per line; the enclosing `[`/`]` lines and trailing
// commas of full dumps are tolerated. Bad lines are counted, never fatal.
inline IngestReport IngestWikidataDump(std::istream& dump,
                                       const ScriptSpec& source_spec,
                                       const ScriptSpec& target_spec,
                                       bool human_only) {
  IngestReport report;
  std::string line;
  while (std::getline(dump, line)) {
    std::string_view view(line);
    while (!view.empty() && (view.back() == '\r' || view.back() == ' ' ||
                             view.back() == ','))
      view.remove_suffix(1);
    while (!view.empty() && view.front() == ' ') view.remove_prefix(1);
    if (view.empty() || view == "[" || view == "]") continue;
    ++report.records;

    nlohmann::json entity = nlohmann::json::parse(view, nullptr, false);
    if (entity.is_discarded() || !entity.is_object()) {
      ++report.malformed;
      continue;
    }
    const auto* src = internal::LabelValue(entity, source_spec.language_tag);
    const auto* tgt = internal::LabelValue(entity, target_spec.language_tag);
    if (!src || !tgt) {
      ++report.missing_label;
      continue;
    }
    const std::string raw_src = src->get<std::string>();
    const std::string raw_tgt = tgt->get<std::string>();
    if (human_only && !internal::IsHuman(entity)) {
      ++report.not_human;
      report.rejections.push_back({raw_src, raw_tgt, RejectReason::kNotHuman});
      continue;
    }
    auto ns = Normalize(raw_src, source_spec);
    auto nt = Normalize(raw_tgt, target_spec);
    if (!ns || !nt) {
      report.rejections.push_back(
          {raw_src, raw_tgt, !ns ? ns.reason() : nt.reason()});
      continue;
    }
    std::string id = entity.contains("id") && entity["id"].is_string()
                         ? entity["id"].get<std::string>()
                         : std::to_string(report.records);
    report.pairs.push_back({ns.value(), nt.value(), std::move(id)});
  }
  return report;
}

struct TokenizeReport {
  // Aggregated (source, target) occurrence counts, sorted.
  std::vector<TokenPair> tokens;
  std::vector<RejectionRow> rejections;
};

// Token-aligns every phrase and counts pair occurrences.
inline TokenizeReport TokenizePhrases(const std::vector<NamePhrasePair>& pairs,
                                      const ScriptSpec& source_spec,
                                      const ScriptSpec& target_spec) {
  TokenizeReport report;
  std::map<std::pair<std::string, std::string>, std::size_t> counts;
  for (const auto& pair : pairs) {
    auto aligned = AlignTokens(pair, source_spec, target_spec);
    if (!aligned) {
      report.rejections.push_back({pair.source, pair.target, aligned.reason()});
      continue;
    }
    for (auto& tp : aligned.value())
      counts[{tp.source_token, tp.target_token}] += tp.frequency;
  }
  report.tokens.reserve(counts.size());
  for (auto& [key, n] : counts) report.tokens.push_back({key.first, key.second, n});
  return report;
}

// One pair per source token: the most frequent target, ties to the
// lexicographically smallest. The retained frequency is the total number
// of occurrences of the source token.
inline std::vector<TokenPair> DedupMostFrequent(
    const std::vector<TokenPair>& pairs) {
  std::map<std::string, std::map<std::string, std::size_t>> by_source;
  for (const auto& p : pairs)
    by_source[p.source_token][p.target_token] += p.frequency;
  std::vector<TokenPair> out;
  out.reserve(by_source.size());
  for (const auto& [source, targets] : by_source) {
    const std::string* best = nullptr;
    std::size_t best_count = 0;
    std::size_t total = 0;
    for (const auto& [target, n] : targets) {  // ascending target order
      total += n;
      if (!best || n > best_count) {
        best = &target;
        best_count = n;
      }
    }
    out.push_back({source, *best, total});
  }
  return out;
}

inline std::vector<TokenPair> FilterSingletons(
    const std::vector<TokenPair>& pairs) {
  std::vector<TokenPair> out;
  std::copy_if(pairs.begin(), pairs.end(), std::back_inserter(out),
               [](const TokenPair& p) { return p.frequency >= 2; });
  return out;
}

struct SplitRatios {
  double train = 0.64;
  double dev = 0.16;
  double test = 0.20;
};

struct SplitBundle {
  std::vector<TokenPair> train;
  std::vector<TokenPair> dev;
  std::vector<TokenPair> test;
  std::uint64_t seed = 0;
  SplitRatios ratios;

  std::size_t size() const { return train.size() + dev.size() + test.size(); }
};

// Unbiased draw in [0, bound) from a standardized engine, so shuffles are
// reproducible across standard libraries.
inline std::uint64_t UniformBelow(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

template <class T>
void SeededShuffle(std::vector<T>& items, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = items.size(); i > 1; --i)
    std::swap(items[i - 1], items[UniformBelow(rng, i)]);
}

inline void VerifyDisjoint(const SplitBundle& bundle) {
  std::unordered_set<std::string> seen;
  for (const auto* part : {&bundle.train, &bundle.dev, &bundle.test})
    for (const auto& p : *part)
      if (!seen.insert(p.source_token).second)
        throw IntegrityError("source token '" + p.source_token +
                             "' appears more than once across splits");
}

inline SplitBundle Split(std::vector<TokenPair> pairs, SplitRatios ratios,
                         std::uint64_t seed) {
  if (ratios.train < 0 || ratios.dev < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.dev + ratios.test - 1.0) > 1e-9)
    throw ConfigError("split ratios must be non-negative and sum to 1");
  SeededShuffle(pairs, seed);
  const double n = static_cast<double>(pairs.size());
  const auto train_end = static_cast<std::size_t>(std::llround(n * ratios.train));
  const auto dev_end = std::max(
      train_end,
      static_cast<std::size_t>(std::llround(n * (ratios.train + ratios.dev))));
  SplitBundle bundle;
  bundle.seed = seed;
  bundle.ratios = ratios;
  bundle.train.assign(pairs.begin(), pairs.begin() + train_end);
  bundle.dev.assign(pairs.begin() + train_end, pairs.begin() + dev_end);
  bundle.test.assign(pairs.begin() + dev_end, pairs.end());
  VerifyDisjoint(bundle);
  return bundle;
}

// Two tab-separated columns (source, target); an optional third column
// carries a frequency.
inline std::vector<TokenPair> ReadTokenPairs(std::istream& is) {
  std::vector<TokenPair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto t1 = line.find('\t');
    if (t1 == std::string::npos)
      throw ParseError("expected two tab-separated columns", lineno);
    auto t2 = line.find('\t', t1 + 1);
    TokenPair p;
    p.source_token = line.substr(0, t1);
    p.target_token = line.substr(t1 + 1, t2 == std::string::npos
                                             ? std::string::npos
                                             : t2 - t1 - 1);
    if (t2 != std::string::npos) {
      const std::string f = line.substr(t2 + 1);
      if (f.empty() || f.find_first_not_of("0123456789") != std::string::npos ||
          f.find('\t') != std::string::npos)
        throw ParseError("third column must be a frequency", lineno);
      p.frequency = std::stoull(f);
    }
    if (p.source_token.empty() || p.target_token.empty())
      throw ParseError("empty column", lineno);
    out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<TokenPair> ReadTokenPairs(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open " + path);
  try {
    return ReadTokenPairs(is);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline void WriteTokenPairs(std::ostream& os, const std::vector<TokenPair>& pairs,
                            bool with_frequency = false) {
  for (const auto& p : pairs) {
    os << p.source_token << '\t' << p.target_token;
    if (with_frequency) os << '\t' << p.frequency;
    os << '\n';
  }
}

inline std::vector<NamePhrasePair> ReadPhrasePairs(std::istream& is) {
  std::vector<NamePhrasePair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
      throw ParseError("expected two tab-separated columns", lineno);
    out.push_back({line.substr(0, tab), line.substr(tab + 1),
                   std::to_string(lineno)});
  }
  return out;
}

inline void WritePhrasePairs(std::ostream& os,
                             const std::vector<NamePhrasePair>& pairs) {
  for (const auto& p : pairs) os << p.source << '\t' << p.target << '\n';
}

inline void WriteRejections(std::ostream& os,
                            const std::vector<RejectionRow>& rows) {
  auto clean = [](std::string s) {
    std::replace(s.begin(), s.end(), '\t', ' ');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
  };
  for (const auto& r : rows)
    os << clean(r.raw_source) << '\t' << clean(r.raw_target) << '\t'
       << ToString(r.reason) << '\n';
}

inline SplitBundle LoadSplit(const std::string& train_path,
                             const std::string& dev_path,
                             const std::string& test_path) {
  SplitBundle bundle;
  bundle.train = ReadTokenPairs(train_path);
  bundle.dev = ReadTokenPairs(dev_path);
  bundle.test = ReadTokenPairs(test_path);
  VerifyDisjoint(bundle);
  const double n = static_cast<double>(bundle.size());
  if (n > 0)
    bundle.ratios = {bundle.train.size() / n, bundle.dev.size() / n,
                     bundle.test.size() / n};
  return bundle;
}

struct CorpusStats {
  std::size_t total_size = 0;
  std::size_t training_set_size = 0;
  double avg_source_length = 0;
  double avg_target_length = 0;
  std::size_t source_alphabet_size = 0;
  std::size_t target_alphabet_size = 0;
};

// Lengths are in grapheme units of the given tokenization.
inline CorpusStats Stats(const SplitBundle& bundle,
                         Tokenization source_tok = Tokenization::kChars,
                         Tokenization target_tok = Tokenization::kChars) {
  CorpusStats s;
  s.total_size = bundle.size();
  s.training_set_size = bundle.train.size();
  std::set<std::string> src_alpha, tgt_alpha;
  std::size_t src_len = 0, tgt_len = 0;
  for (const auto* part : {&bundle.train, &bundle.dev, &bundle.test}) {
    for (const auto& p : *part) {
      auto sg = SplitGraphemes(p.source_token, source_tok);
      auto tg = SplitGraphemes(p.target_token, target_tok);
      src_len += sg.size();
      tgt_len += tg.size();
      src_alpha.insert(sg.begin(), sg.end());
      tgt_alpha.insert(tg.begin(), tg.end());
    }
  }
  if (s.total_size > 0) {
    s.avg_source_length = static_cast<double>(src_len) / s.total_size;
    s.avg_target_length = static_cast<double>(tgt_len) / s.total_size;
  }
  s.source_alphabet_size = src_alpha.size();
  s.target_alphabet_size = tgt_alpha.size();
  return s;
}

inline std::vector<TokenPair> SwapSides(std::vector<TokenPair> pairs) {
  for (auto& p : pairs) std::swap(p.source_token, p.target_token);
  return pairs;
}

inline SplitBundle SwapSides(SplitBundle bundle) {
  bundle.train = SwapSides(std::move(bundle.train));
  bundle.dev = SwapSides(std::move(bundle.dev));
  bundle.test = SwapSides(std::move(bundle.test));
  return bundle;
}

}  // namespace netrans

#endif  // NETRANS_CORPUS_HPP_
