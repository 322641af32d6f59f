// decode.hpp
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
// Training and decoding of complete transliteration models, plus the
// archive container they are stored in.

#ifndef NETRANS_DECODE_HPP_
#define NETRANS_DECODE_HPP_

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "netrans/align.hpp"
#include "netrans/archive.hpp"
#include "netrans/corpus.hpp"
#include "netrans/error.hpp"
#include "netrans/fst.hpp"
#include "netrans/ngram.hpp"
#include "netrans/parallel.hpp"

namespace netrans {

inline constexpr int kModelFormatVersion = 1;

struct TrainConfig {
  AlignmentConfig align;
  int lm_order = 8;
  Smoothing smoothing = Smoothing::kWittenBell;
  std::string source_lang = "src";
  std::string target_lang = "tgt";
};

struct ModelMetadata {
  int format_version = kModelFormatVersion;
  std::string source_lang;
  std::string target_lang;
  std::string corpus_digest;  // SHA-256 of the training pairs as TSV
  std::size_t training_pairs = 0;
  AlignmentConfig align;
  int lm_order = 0;
  Smoothing smoothing = Smoothing::kWittenBell;
};

struct TransliterationModel {
  AlignmentModel alignment;
  NGramModel lm;
  Transducer compiled;
  ModelMetadata metadata;
};

struct Candidate {
  std::string target;
  double cost = 0;
  std::size_t rank = 0;

  bool operator==(const Candidate&) const = default;
};

struct TrainReport {
  EmTrace em;
  std::size_t aligned = 0;
  std::vector<TokenPair> unalignable;
};

inline std::string CorpusDigest(const std::vector<TokenPair>& pairs) {
  std::ostringstream os;
  WriteTokenPairs(os, pairs, true);
  return Sha256Hex(os.str());
}

// EM alignment, Viterbi segmentation of every pair, n-gram estimation over
// the graphone sequences and compilation to a transducer.
inline TransliterationModel TrainModel(const std::vector<TokenPair>& pairs,
                                       const TrainConfig& config,
                                       TrainReport* report = nullptr) {
  if (pairs.empty()) throw TrainingError("training corpus is empty");
  TrainReport local;
  TransliterationModel model;
  model.alignment = EmTrain(pairs, config.align, &local.em);

  std::vector<std::vector<std::string>> sequences(pairs.size());
  std::vector<char> failed(pairs.size(), 0);
  ParallelFor(pairs.size(), [&](std::size_t i) {
    try {
      for (const auto& g : ViterbiAlign(pairs[i], model.alignment))
        sequences[i].push_back(model.alignment.GraphoneText(g));
    } catch (const AlignmentError&) {
      failed[i] = 1;
    }
  });
  std::vector<std::vector<std::string>> kept;
  kept.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (failed[i]) local.unalignable.push_back(pairs[i]);
    else kept.push_back(std::move(sequences[i]));
  }
  local.aligned = kept.size();
  if (2 * local.unalignable.size() > pairs.size())
    throw TrainingError(std::to_string(local.unalignable.size()) + " of " +
                        std::to_string(pairs.size()) +
                        " training pairs are unalignable; check the scripts and "
                        "segment length limits");

  model.lm = Estimate(CountNGrams(kept, config.lm_order), config.smoothing);
  model.compiled = CompileLm(model.lm, model.alignment);

  auto& md = model.metadata;
  md.source_lang = config.source_lang;
  md.target_lang = config.target_lang;
  md.corpus_digest = CorpusDigest(pairs);
  md.training_pairs = pairs.size();
  md.align = config.align;
  md.lm_order = config.lm_order;
  md.smoothing = config.smoothing;
  if (report) *report = std::move(local);
  return model;
}

namespace internal {

inline std::vector<Candidate> DecodeLabels(const TransliterationModel& model,
                                           const std::vector<Label>& input, std::size_t k) {
  Transducer acceptor = MakeInputAcceptor(input);
  Transducer lattice = Trim(Compose(acceptor, model.compiled));
  std::vector<Candidate> out;
  const auto mode = model.alignment.config.target_tokenization;
  for (const auto& path : NShortestUnique(lattice, k))
    out.push_back({path.OutputString(model.alignment.target_symbols, mode), path.total_weight,
                   out.size() + 1});
  return out;
}

// Best k concatenations of two candidate lists by summed cost.
inline std::vector<Candidate> CombineCandidates(const std::vector<Candidate>& a,
                                                const std::vector<Candidate>& b,
                                                std::size_t k, Tokenization mode) {
  std::vector<Candidate> all;
  for (const auto& x : a)
    for (const auto& y : b) {
      std::string joined = x.target;
      if (mode == Tokenization::kWhitespace && !joined.empty() && !y.target.empty())
        joined.push_back(' ');
      joined += y.target;
      all.push_back({std::move(joined), x.cost + y.cost, 0});
    }
  std::stable_sort(all.begin(), all.end(),
                   [](const Candidate& l, const Candidate& r) { return l.cost < r.cost; });
  std::vector<Candidate> out;
  for (auto& c : all) {
    if (std::any_of(out.begin(), out.end(),
                    [&](const Candidate& o) { return o.target == c.target; }))
      continue;
    c.rank = out.size() + 1;
    out.push_back(std::move(c));
    if (out.size() == k) break;
  }
  return out;
}

}  // namespace internal

// Up to k distinct candidates, cheapest first. Input graphemes unknown to
// the model raise UnseenSymbolError; with passthrough they are copied to
// the output and the known stretches around them are decoded separately.
inline std::vector<Candidate> Transliterate(const TransliterationModel& model,
                                            std::string_view word, std::size_t k,
                                            bool passthrough = false) {
  if (k == 0) throw ConfigError("k must be >= 1");
  const auto& cfg = model.alignment.config;
  auto normalized = Normalize(word, ScriptSpec::Any(cfg.source_tokenization));
  if (!normalized.ok()) throw ConfigError("input '" + std::string(word) + "' is empty after normalization");
  const auto graphemes = SplitGraphemes(normalized.value(), cfg.source_tokenization);
  if (cfg.source_tokenization == Tokenization::kChars &&
      std::find(graphemes.begin(), graphemes.end(), " ") != graphemes.end())
    throw ConfigError("input '" + std::string(word) + "' is not a single token");

  std::vector<std::optional<Label>> labels;
  std::vector<std::string> unseen;
  for (const auto& g : graphemes) {
    labels.push_back(model.alignment.source_symbols.Find(g));
    if (!labels.back() || *labels.back() == kEpsilon) {
      labels.back().reset();
      if (std::find(unseen.begin(), unseen.end(), g) == unseen.end()) unseen.push_back(g);
    }
  }
  if (unseen.empty()) {
    std::vector<Label> input;
    for (const auto& l : labels) input.push_back(*l);
    return internal::DecodeLabels(model, input, k);
  }
  if (!passthrough) {
    std::string list;
    for (const auto& g : unseen) list += (list.empty() ? "" : " ") + g;
    throw UnseenSymbolError("input contains graphemes never seen in training: " + list, unseen);
  }

  std::vector<Candidate> result{{"", 0.0, 1}};
  std::vector<Label> segment;
  auto flush = [&] {
    if (segment.empty()) return;
    result = internal::CombineCandidates(result, internal::DecodeLabels(model, segment, k), k,
                                         cfg.target_tokenization);
    segment.clear();
  };
  for (std::size_t i = 0; i < graphemes.size(); ++i) {
    if (labels[i]) {
      segment.push_back(*labels[i]);
      continue;
    }
    flush();
    result = internal::CombineCandidates(result, {{graphemes[i], 0.0, 1}}, k,
                                         cfg.target_tokenization);
  }
  flush();
  return result;
}

struct DecodeFailure {
  std::size_t index;
  std::string word;
  std::string message;
};

struct BatchResult {
  std::vector<std::vector<Candidate>> candidates;  // by input position
  std::vector<DecodeFailure> failures;             // sorted by index
  double seconds = 0;
};

// Words are decoded independently and in parallel; a failing word leaves an
// empty candidate list and a failure row.
inline BatchResult BatchDecode(const TransliterationModel& model,
                               const std::vector<std::string>& words, std::size_t k,
                               bool passthrough = false, std::ostream* progress = nullptr,
                               unsigned threads = ThreadCount()) {
  BatchResult result;
  result.candidates.resize(words.size());
  std::vector<std::optional<std::string>> errors(words.size());
  std::atomic<std::size_t> done{0};
  std::mutex progress_mu;
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  ParallelFor(
      words.size(),
      [&](std::size_t i) {
        try {
          result.candidates[i] = Transliterate(model, words[i], k, passthrough);
        } catch (const Error& e) {
          errors[i] = e.what();
        }
        const std::size_t n = ++done;
        if (progress && n % 5000 == 0) {
          std::lock_guard lock(progress_mu);
          *progress << "decoded " << n << "/" << words.size() << " words ("
                    << static_cast<long long>(n / std::max(elapsed(), 1e-9)) << " words/s)\n";
        }
      },
      threads);
  result.seconds = elapsed();
  for (std::size_t i = 0; i < words.size(); ++i)
    if (errors[i]) result.failures.push_back({i, words[i], *errors[i]});
  if (progress)
    *progress << "decoded " << words.size() << " words in " << result.seconds << " s, "
              << result.failures.size() << " failed\n";
  return result;
}

inline void WriteCandidates(std::ostream& os, const std::vector<std::string>& words,
                            const BatchResult& result) {
  for (std::size_t i = 0; i < words.size(); ++i)
    for (const auto& c : result.candidates[i])
      os << words[i] << '\t' << c.rank << '\t' << c.target << '\t'
         << text::FormatDouble(c.cost) << '\n';
}

namespace internal {

inline std::string Serialize(auto&& write) {
  std::ostringstream os;
  write(os);
  return os.str();
}

inline const std::string& Member(const std::vector<ArchiveMember>& members,
                                 const std::string& name) {
  for (const auto& m : members)
    if (m.name == name) return m.data;
  throw LoadError("model archive lacks member '" + name + "'");
}

}  // namespace internal

inline constexpr const char* kArchivePayload[] = {"align.tsv", "lm.arpa", "fst.txt", "isyms.txt",
                                                  "osyms.txt"};

inline void SaveModel(std::ostream& os, const TransliterationModel& model) {
  using internal::Serialize;
  const auto& md = model.metadata;
  std::vector<ArchiveMember> payload = {
      {"align.tsv", Serialize([&](std::ostream& s) { WriteAlignmentModel(s, model.alignment); })},
      {"lm.arpa", Serialize([&](std::ostream& s) { WriteArpa(s, model.lm); })},
      {"fst.txt", Serialize([&](std::ostream& s) { WriteFstText(s, model.compiled); })},
      {"isyms.txt", Serialize([&](std::ostream& s) { model.alignment.source_symbols.WriteText(s); })},
      {"osyms.txt", Serialize([&](std::ostream& s) { model.alignment.target_symbols.WriteText(s); })},
  };
  std::ostringstream manifest;
  manifest << "format_version=" << md.format_version << '\n'
           << "source_lang=" << md.source_lang << '\n'
           << "target_lang=" << md.target_lang << '\n'
           << "corpus_digest=" << md.corpus_digest << '\n'
           << "training_pairs=" << md.training_pairs << '\n'
           << "max_source_len=" << md.align.max_source_len << '\n'
           << "max_target_len=" << md.align.max_target_len << '\n'
           << "allow_target_deletion=" << md.align.allow_target_deletion << '\n'
           << "allow_source_deletion=" << md.align.allow_source_deletion << '\n'
           << "max_iterations=" << md.align.max_iterations << '\n'
           << "convergence_epsilon=" << text::FormatDouble(md.align.convergence_epsilon) << '\n'
           << "prune_threshold=" << text::FormatDouble(md.align.prune_threshold) << '\n'
           << "source_tokenization=" << ToString(md.align.source_tokenization) << '\n'
           << "target_tokenization=" << ToString(md.align.target_tokenization) << '\n'
           << "lm_order=" << md.lm_order << '\n'
           << "smoothing=" << ToString(md.smoothing) << '\n';
  for (const auto& m : payload) manifest << "sha256." << m.name << '=' << Sha256Hex(m.data) << '\n';
  payload.insert(payload.begin(), {"manifest.txt", manifest.str()});
  WriteArchive(os, payload);
}

inline void SaveModel(const std::string& path, const TransliterationModel& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  SaveModel(os, model);
}

inline TransliterationModel LoadModel(std::istream& is) {
  const auto members = ReadArchive(is);
  std::map<std::string, std::string> manifest;
  {
    std::istringstream ms(internal::Member(members, "manifest.txt"));
    std::string line;
    while (std::getline(ms, line)) {
      if (line.empty()) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos) throw LoadError("malformed manifest line: " + line);
      manifest[line.substr(0, eq)] = line.substr(eq + 1);
    }
  }
  auto field = [&](const std::string& key) -> const std::string& {
    auto it = manifest.find(key);
    if (it == manifest.end()) throw LoadError("manifest lacks '" + key + "'");
    return it->second;
  };
  auto integer = [&](const std::string& key) {
    auto v = text::ParseInt(field(key));
    if (!v) throw LoadError("manifest field '" + key + "' is not an integer");
    return *v;
  };
  const auto version = integer("format_version");
  if (version > kModelFormatVersion)
    throw LoadError("unsupported model format version " + std::to_string(version) +
                    "; this build reads versions up to " + std::to_string(kModelFormatVersion));
  if (version < 1) throw LoadError("invalid model format version");
  for (const char* name : kArchivePayload)
    if (Sha256Hex(internal::Member(members, name)) != field(std::string("sha256.") + name))
      throw LoadError(std::string("digest mismatch for archive member '") + name + "'");

  TransliterationModel model;
  try {
    auto& md = model.metadata;
    md.format_version = static_cast<int>(version);
    md.source_lang = field("source_lang");
    md.target_lang = field("target_lang");
    md.corpus_digest = field("corpus_digest");
    md.training_pairs = static_cast<std::size_t>(integer("training_pairs"));
    md.align.max_source_len = static_cast<int>(integer("max_source_len"));
    md.align.max_target_len = static_cast<int>(integer("max_target_len"));
    md.align.allow_target_deletion = integer("allow_target_deletion") != 0;
    md.align.allow_source_deletion = integer("allow_source_deletion") != 0;
    md.align.max_iterations = static_cast<int>(integer("max_iterations"));
    md.align.convergence_epsilon = text::ParseDouble(field("convergence_epsilon")).value();
    md.align.prune_threshold = text::ParseDouble(field("prune_threshold")).value();
    md.align.source_tokenization = ParseTokenization(field("source_tokenization"));
    md.align.target_tokenization = ParseTokenization(field("target_tokenization"));
    md.lm_order = static_cast<int>(integer("lm_order"));
    md.smoothing = ParseSmoothing(field("smoothing"));

    auto stream = [&](const char* name) { return std::istringstream(internal::Member(members, name)); };
    auto is_syms = stream("isyms.txt");
    auto os_syms = stream("osyms.txt");
    SymbolTable isyms = SymbolTable::ReadText(is_syms);
    SymbolTable osyms = SymbolTable::ReadText(os_syms);
    auto align = stream("align.tsv");
    model.alignment = ReadAlignmentModel(align, isyms, osyms);
    if (!(model.alignment.source_symbols == isyms) || !(model.alignment.target_symbols == osyms))
      throw LoadError("alignment model uses symbols missing from the symbol tables");
    model.alignment.config.max_iterations = md.align.max_iterations;
    model.alignment.config.convergence_epsilon = md.align.convergence_epsilon;
    model.alignment.config.prune_threshold = md.align.prune_threshold;
    auto arpa = stream("lm.arpa");
    model.lm = ReadArpa(arpa);
    auto fst = stream("fst.txt");
    model.compiled = ReadFstText(fst);
    model.compiled.SetSymbols(std::make_shared<SymbolTable>(isyms),
                              std::make_shared<SymbolTable>(osyms));
  } catch (const LoadError&) {
    throw;
  } catch (const std::exception& e) {
    throw LoadError(std::string("corrupt model archive: ") + e.what());
  }
  if (model.compiled.empty()) throw LoadError("model archive holds an empty transducer");
  for (std::size_t s = 0; s < model.compiled.NumStates(); ++s)
    for (const Arc& a : model.compiled.Arcs(static_cast<StateId>(s)))
      if (a.ilabel < 0 || static_cast<std::size_t>(a.ilabel) >= model.alignment.source_symbols.size() ||
          a.olabel < 0 || static_cast<std::size_t>(a.olabel) >= model.alignment.target_symbols.size())
        throw LoadError("transducer label outside the symbol tables");
  return model;
}

inline TransliterationModel LoadModel(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open model '" + path + "'");
  return LoadModel(is);
}

}  // namespace netrans

#endif  // NETRANS_DECODE_HPP_
