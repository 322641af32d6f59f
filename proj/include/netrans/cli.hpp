// cli.hpp
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
// The `netrans` command line. Exit status: 0 success, 1 data error,
// 2 usage error. The resolved configuration is echoed to the error stream
// as `# key=value` lines.

#ifndef NETRANS_CLI_HPP_
#define NETRANS_CLI_HPP_

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "netrans/corpus.hpp"
#include "netrans/decode.hpp"
#include "netrans/eval.hpp"

namespace netrans::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitData = 1;
inline constexpr int kExitUsage = 2;

namespace internal {

struct Options {
  // shared
  std::string source_lang = "en";
  std::string target_lang = "ru";
  std::string source_symbols = "chars";
  std::string target_symbols = "chars";
  std::uint64_t seed = 1;
  std::string dataset;
  int verbosity = 1;

  // training
  int order = 8;
  std::string smoothing = "witten_bell";
  int max_source_len = 2;
  int max_target_len = 2;
  bool target_deletion = true;
  bool source_deletion = false;
  int iterations = 11;

  // paths
  std::string input, output, train, dev, test, model, tokens, rejections, report, errors;
  std::string out_dir = ".";
  std::vector<std::string> words;

  // misc
  std::string ks = "1,2,3";
  std::size_t k = 3;
  std::string sizes = "5000,10000,25000,50000,100000";
  std::string ratios = "0.64,0.16,0.20";
  bool passthrough = false;
  bool all_entities = false;
  bool no_dedup = false;
};

inline std::vector<std::size_t> ParseCounts(const std::string& s, const char* what) {
  std::vector<std::size_t> out;
  for (auto part : text::SplitOn(s, ',')) {
    auto v = text::ParseInt(part);
    if (!v || *v < 1) throw ConfigError(std::string("bad ") + what + " list '" + s + "'");
    out.push_back(static_cast<std::size_t>(*v));
  }
  return out;
}

inline SplitRatios ParseRatios(const std::string& s) {
  auto parts = text::SplitOn(s, ',');
  if (parts.size() != 3) throw ConfigError("--ratios expects three comma-separated values");
  SplitRatios r;
  auto get = [&](std::string_view p) {
    auto v = text::ParseDouble(p);
    if (!v || *v < 0) throw ConfigError("bad ratio '" + std::string(p) + "'");
    return *v;
  };
  r.train = get(parts[0]);
  r.dev = get(parts[1]);
  r.test = get(parts[2]);
  return r;
}

inline TrainConfig MakeTrainConfig(const Options& o) {
  TrainConfig c;
  c.align.max_source_len = o.max_source_len;
  c.align.max_target_len = o.max_target_len;
  c.align.allow_target_deletion = o.target_deletion;
  c.align.allow_source_deletion = o.source_deletion;
  c.align.max_iterations = o.iterations;
  c.align.source_tokenization = ParseTokenization(o.source_symbols);
  c.align.target_tokenization = ParseTokenization(o.target_symbols);
  c.align.Validate();
  c.lm_order = o.order;
  if (c.lm_order < 1) throw ConfigError("--order must be >= 1");
  c.smoothing = ParseSmoothing(o.smoothing);
  c.source_lang = o.source_lang;
  c.target_lang = o.target_lang;
  return c;
}

// Writes to `path`, or to `fallback` when path is empty or "-".
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
    if (!path.empty() && path != "-") {
      file_.open(path, std::ios::binary);
      if (!file_) throw ConfigError("cannot open '" + path + "' for writing");
      os_ = &file_;
    }
  }
  std::ostream& operator*() { return *os_; }

 private:
  std::ofstream file_;
  std::ostream* os_;
};

inline void AddLanguageFlags(CLI::App* sub, Options& o) {
  sub->add_option("--source-lang", o.source_lang, "Source language tag")->capture_default_str();
  sub->add_option("--target-lang", o.target_lang, "Target language tag")->capture_default_str();
}

inline void AddSymbolFlags(CLI::App* sub, Options& o) {
  sub->add_option("--source-symbols", o.source_symbols,
                  "Source grapheme unit: chars (code points) or space (whitespace-separated)")
      ->capture_default_str()
      ->check(CLI::IsMember({"chars", "space"}));
  sub->add_option("--target-symbols", o.target_symbols, "Target grapheme unit: chars or space")
      ->capture_default_str()
      ->check(CLI::IsMember({"chars", "space"}));
}

inline void AddTrainFlags(CLI::App* sub, Options& o) {
  AddLanguageFlags(sub, o);
  AddSymbolFlags(sub, o);
  sub->add_option("--order", o.order, "N-gram order of the graphone model")->capture_default_str();
  sub->add_option("--smoothing", o.smoothing, "witten_bell or mle")
      ->capture_default_str()
      ->check(CLI::IsMember({"witten_bell", "wb", "mle"}));
  sub->add_option("--max-source-len", o.max_source_len, "Longest source segment of a graphone")
      ->capture_default_str();
  sub->add_option("--max-target-len", o.max_target_len, "Longest target segment of a graphone")
      ->capture_default_str();
  sub->add_flag("--target-deletion,!--no-target-deletion", o.target_deletion,
                "Allow graphones with an empty target segment (default on)");
  sub->add_flag("--source-deletion,!--no-source-deletion", o.source_deletion,
                "Allow graphones with an empty source segment (default off)");
  sub->add_option("--iterations", o.iterations, "Maximum EM iterations")->capture_default_str();
}

inline void Echo(std::ostream& err, const Options& o, const std::string& sub,
                 const std::vector<std::pair<std::string, std::string>>& extra) {
  if (o.verbosity < 1) return;
  err << "# subcommand=" << sub << '\n';
  for (const auto& [k, v] : extra) err << "# " << k << '=' << v << '\n';
}

inline std::vector<std::pair<std::string, std::string>> TrainEcho(const TrainConfig& c) {
  return {{"source_lang", c.source_lang},
          {"target_lang", c.target_lang},
          {"source_symbols", std::string(ToString(c.align.source_tokenization))},
          {"target_symbols", std::string(ToString(c.align.target_tokenization))},
          {"order", std::to_string(c.lm_order)},
          {"smoothing", std::string(ToString(c.smoothing))},
          {"max_source_len", std::to_string(c.align.max_source_len)},
          {"max_target_len", std::to_string(c.align.max_target_len)},
          {"target_deletion", c.align.allow_target_deletion ? "1" : "0"},
          {"source_deletion", c.align.allow_source_deletion ? "1" : "0"},
          {"iterations", std::to_string(c.align.max_iterations)},
          {"threads", std::to_string(ThreadCount())}};
}

inline std::vector<std::string> ReadWords(const Options& o) {
  std::vector<std::string> words = o.words;
  if (!o.input.empty()) {
    std::ifstream is(o.input);
    if (!is) throw ConfigError("cannot open " + o.input);
    std::string line;
    while (std::getline(is, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      auto tab = line.find('\t');
      if (tab != std::string::npos) line.resize(tab);
      if (!line.empty()) words.push_back(line);
    }
  }
  return words;
}

inline int DoCurate(const Options& o, std::ostream& out, std::ostream& err) {
  Echo(err, o, "curate",
       {{"input", o.input}, {"source_lang", o.source_lang}, {"target_lang", o.target_lang},
        {"human_only", o.all_entities ? "0" : "1"}});
  std::ifstream is(o.input);
  if (!is) throw ConfigError("cannot open " + o.input);
  IngestReport r = IngestWikidataDump(is, ScriptSpec::ForLanguage(o.source_lang),
                                      ScriptSpec::ForLanguage(o.target_lang), !o.all_entities);
  Sink sink(o.output, out);
  WritePhrasePairs(*sink, r.pairs);
  if (!o.rejections.empty()) {
    Sink rej(o.rejections, out);
    WriteRejections(*rej, r.rejections);
  }
  err << "records=" << r.records << " pairs=" << r.pairs.size() << " rejected=" << r.rejections.size()
      << " missing_label=" << r.missing_label << " not_human=" << r.not_human
      << " malformed=" << r.malformed << '\n';
  return kExitOk;
}

inline int DoTokenize(const Options& o, std::ostream& out, std::ostream& err) {
  Echo(err, o, "tokenize",
       {{"input", o.input}, {"source_lang", o.source_lang}, {"target_lang", o.target_lang}});
  std::ifstream is(o.input);
  if (!is) throw ConfigError("cannot open " + o.input);
  auto phrases = ReadPhrasePairs(is);
  TokenizeReport r = TokenizePhrases(phrases, ScriptSpec::ForLanguage(o.source_lang),
                                     ScriptSpec::ForLanguage(o.target_lang));
  Sink sink(o.output, out);
  WriteTokenPairs(*sink, r.tokens, true);
  if (!o.rejections.empty()) {
    Sink rej(o.rejections, out);
    WriteRejections(*rej, r.rejections);
  }
  err << "phrases=" << phrases.size() << " token_pairs=" << r.tokens.size()
      << " rejected=" << r.rejections.size() << '\n';
  return kExitOk;
}

inline int DoSplit(const Options& o, std::ostream&, std::ostream& err) {
  const SplitRatios ratios = ParseRatios(o.ratios);
  Echo(err, o, "split",
       {{"tokens", o.tokens}, {"seed", std::to_string(o.seed)}, {"ratios", o.ratios},
        {"dedup", o.no_dedup ? "0" : "1"}, {"out_dir", o.out_dir}});
  auto tokens = ReadTokenPairs(o.tokens);
  if (!o.no_dedup) tokens = DedupMostFrequent(tokens);
  SplitBundle b = Split(std::move(tokens), ratios, o.seed);
  std::filesystem::create_directories(o.out_dir);
  for (auto [name, part] : {std::pair{"train.tsv", &b.train}, std::pair{"dev.tsv", &b.dev},
                            std::pair{"test.tsv", &b.test}}) {
    std::ofstream os(std::filesystem::path(o.out_dir) / name, std::ios::binary);
    if (!os) throw ConfigError(std::string("cannot write ") + name);
    WriteTokenPairs(os, *part, true);
  }
  err << "train=" << b.train.size() << " dev=" << b.dev.size() << " test=" << b.test.size() << '\n';
  return kExitOk;
}

inline int DoStats(const Options& o, std::ostream& out, std::ostream& err) {
  Echo(err, o, "stats",
       {{"train", o.train}, {"dev", o.dev}, {"test", o.test},
        {"source_symbols", o.source_symbols}, {"target_symbols", o.target_symbols}});
  SplitBundle b = LoadSplit(o.train, o.dev, o.test);
  CorpusStats s = Stats(b, ParseTokenization(o.source_symbols), ParseTokenization(o.target_symbols));
  auto fixed = [](double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(1) << v;
    return os.str();
  };
  out << "dataset\ttotal\ttrain\tavg_source_len\tavg_target_len\tsource_alphabet\ttarget_alphabet\n"
      << (o.dataset.empty() ? "-" : o.dataset) << '\t' << s.total_size << '\t'
      << s.training_set_size << '\t' << fixed(s.avg_source_length) << '\t'
      << fixed(s.avg_target_length) << '\t' << s.source_alphabet_size << '\t'
      << s.target_alphabet_size << '\n';
  std::vector<TokenPair> all = b.train;
  all.insert(all.end(), b.dev.begin(), b.dev.end());
  all.insert(all.end(), b.test.begin(), b.test.end());
  TokenFrequencyReport f = TokenFrequencyStats(all, ParseTokenization(o.source_symbols));
  out << "\ntokens\tsingleton_fraction\tmean_len_f1\tmean_len_f2plus\tspearman\n"
      << f.tokens << '\t' << text::FormatDouble(f.singleton_fraction) << '\t'
      << text::FormatDouble(f.mean_length_singleton) << '\t'
      << text::FormatDouble(f.mean_length_frequent) << '\t' << text::FormatDouble(f.spearman)
      << '\n';
  return kExitOk;
}

inline int DoTrain(const Options& o, std::ostream&, std::ostream& err) {
  const TrainConfig c = MakeTrainConfig(o);
  auto echo = TrainEcho(c);
  echo.insert(echo.begin(), {{"train", o.train}, {"out", o.output}});
  Echo(err, o, "train", echo);
  auto pairs = ReadTokenPairs(o.train);
  TrainReport report;
  TransliterationModel m = TrainModel(pairs, c, &report);
  SaveModel(o.output, m);
  err << "pairs=" << pairs.size() << " aligned=" << report.aligned
      << " unalignable=" << report.unalignable.size() << " em_iterations=" << report.em.iterations
      << " graphones=" << report.em.final_graphones << " fst_states=" << m.compiled.NumStates()
      << " fst_arcs=" << m.compiled.NumArcs() << '\n';
  return kExitOk;
}

inline int DoDecode(const Options& o, std::ostream& out, std::ostream& err) {
  Echo(err, o, "decode",
       {{"model", o.model}, {"input", o.input}, {"k", std::to_string(o.k)},
        {"passthrough", o.passthrough ? "1" : "0"}, {"threads", std::to_string(ThreadCount())}});
  if (o.k < 1) throw ConfigError("--k must be >= 1");
  TransliterationModel m = LoadModel(o.model);
  auto words = ReadWords(o);
  BatchResult r = BatchDecode(m, words, o.k, o.passthrough, o.verbosity > 1 ? &err : nullptr);
  Sink sink(o.output, out);
  WriteCandidates(*sink, words, r);
  std::ostream* ereport = &err;
  std::optional<Sink> esink;
  if (!o.errors.empty()) {
    esink.emplace(o.errors, err);
    ereport = &**esink;
  }
  for (const auto& f : r.failures) *ereport << f.word << '\t' << f.message << '\n';
  err << "words=" << words.size() << " failed=" << r.failures.size() << " seconds=" << r.seconds
      << '\n';
  return kExitOk;
}

inline void WriteReports(const Options& o, std::ostream& out,
                         const std::vector<ExperimentReport>& reports) {
  if (!o.report.empty()) {
    Sink tsv(o.report, out);
    WriteReportTsv(*tsv, reports);
  } else {
    WriteReportTsv(out, reports);
    out << '\n';
  }
  WriteReportTable(out, reports);
}

inline int DoEval(const Options& o, std::ostream& out, std::ostream& err) {
  Echo(err, o, "eval", {{"model", o.model}, {"test", o.test}, {"k", o.ks}, {"dataset", o.dataset}});
  const auto ks = ParseCounts(o.ks, "k");
  TransliterationModel m = LoadModel(o.model);
  SplitBundle b;
  b.test = ReadTokenPairs(o.test);
  WerReport r = EvaluateSplit(m, b, ks, o.verbosity > 1 ? &err : nullptr);
  WriteReports(o, out,
               {{o.dataset, m.metadata.source_lang + "->" + m.metadata.target_lang, "full", r}});
  return kExitOk;
}

inline int DoSweep(const Options& o, std::ostream& out, std::ostream& err) {
  const TrainConfig c = MakeTrainConfig(o);
  auto echo = TrainEcho(c);
  echo.insert(echo.begin(), {{"train", o.train},
                             {"test", o.test},
                             {"sizes", o.sizes},
                             {"seed", std::to_string(o.seed)}});
  Echo(err, o, "sweep", echo);
  const auto sizes = ParseCounts(o.sizes, "size");
  SplitBundle b;
  b.train = ReadTokenPairs(o.train);
  b.test = ReadTokenPairs(o.test);
  auto points = LearningCurve(b, sizes, o.seed, c, o.verbosity > 0 ? &err : nullptr);
  Sink sink(o.output, out);
  WriteLearningCurveTsv(*sink, points);
  return kExitOk;
}

inline int DoDirection(const Options& o, std::ostream& out, std::ostream& err) {
  const TrainConfig c = MakeTrainConfig(o);
  auto echo = TrainEcho(c);
  echo.insert(echo.begin(), {{"train", o.train}, {"test", o.test}, {"k", o.ks}});
  Echo(err, o, "direction", echo);
  const auto ks = ParseCounts(o.ks, "k");
  SplitBundle b;
  b.train = ReadTokenPairs(o.train);
  b.test = ReadTokenPairs(o.test);
  auto [forward, backward] = DirectionExperiment(b, ks, c, o.dataset);
  WriteReports(o, out, {forward, backward});
  return kExitOk;
}

inline int DoSingleton(const Options& o, std::ostream& out, std::ostream& err) {
  const TrainConfig c = MakeTrainConfig(o);
  const SplitRatios ratios = ParseRatios(o.ratios);
  auto echo = TrainEcho(c);
  echo.insert(echo.begin(), {{"tokens", o.tokens},
                             {"seed", std::to_string(o.seed)},
                             {"ratios", o.ratios},
                             {"k", o.ks}});
  Echo(err, o, "singleton", echo);
  const auto ks = ParseCounts(o.ks, "k");
  auto tokens = ReadTokenPairs(o.tokens);
  WriteReports(o, out, SingletonExperiment(tokens, o.seed, c, ks, o.dataset, ratios));
  return kExitOk;
}

}  // namespace internal

// Runs one subcommand. Output goes to `out` unless redirected by flags;
// diagnostics and the configuration echo go to `err`.
inline int Run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  using internal::Options;
  Options o;
  CLI::App app{"Named-entity transliteration with graphone models and weighted transducers",
               "netrans"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  app.add_option("-v,--verbosity", o.verbosity, "0 quiet, 1 echo config, 2 progress")
      ->capture_default_str();

  auto existing = CLI::ExistingFile;

  auto* curate = app.add_subcommand("curate", "Extract name pairs from a Wikidata JSON dump");
  curate->add_option("--dump", o.input, "Wikidata JSON dump, one entity per line")
      ->required()
      ->check(existing);
  curate->add_option("--out", o.output, "Phrase pair TSV (default stdout)");
  curate->add_option("--rejections", o.rejections, "Rejected rows with reasons");
  curate->add_flag("--all-entities", o.all_entities, "Keep entities that are not humans");
  internal::AddLanguageFlags(curate, o);

  auto* tokenize = app.add_subcommand("tokenize", "Split phrase pairs into aligned token pairs");
  tokenize->add_option("--phrases", o.input, "Phrase pair TSV")->required()->check(existing);
  tokenize->add_option("--out", o.output, "Token pair TSV with frequencies (default stdout)");
  tokenize->add_option("--rejections", o.rejections, "Rejected rows with reasons");
  internal::AddLanguageFlags(tokenize, o);

  auto* split = app.add_subcommand("split", "Deduplicate token pairs and split train/dev/test");
  split->add_option("--tokens", o.tokens, "Token pair TSV")->required()->check(existing);
  split->add_option("--out-dir", o.out_dir, "Directory for train.tsv, dev.tsv, test.tsv")
      ->capture_default_str();
  split->add_option("--seed", o.seed, "Shuffle seed")->capture_default_str();
  split->add_option("--ratios", o.ratios, "train,dev,test fractions")->capture_default_str();
  split->add_flag("--no-dedup", o.no_dedup, "Keep every source token occurrence");

  auto* stats = app.add_subcommand("stats", "Corpus statistics of a split");
  stats->add_option("--train", o.train, "Training TSV")->required()->check(existing);
  stats->add_option("--dev", o.dev, "Development TSV")->required()->check(existing);
  stats->add_option("--test", o.test, "Test TSV")->required()->check(existing);
  stats->add_option("--dataset", o.dataset, "Dataset label for the report");
  internal::AddSymbolFlags(stats, o);

  auto* train = app.add_subcommand("train", "Train a transliteration model");
  train->add_option("--train", o.train, "Training TSV")->required()->check(existing);
  train->add_option("--out", o.output, "Model archive to write")->required();
  internal::AddTrainFlags(train, o);

  auto* decode = app.add_subcommand("decode", "Transliterate words with a trained model");
  decode->add_option("--model", o.model, "Model archive")->required()->check(existing);
  decode->add_option("--input", o.input, "Words, one per line (first TSV column)")->check(existing);
  decode->add_option("words", o.words, "Words given on the command line");
  decode->add_option("--k", o.k, "Candidates per word")->capture_default_str();
  decode->add_flag("--passthrough", o.passthrough, "Copy graphemes unknown to the model verbatim");
  decode->add_option("--out", o.output, "Candidate TSV (default stdout)");
  decode->add_option("--errors", o.errors, "Failure report TSV (default stderr)");

  auto* eval = app.add_subcommand("eval", "k-best WER of a model on a test set");
  eval->add_option("--model", o.model, "Model archive")->required()->check(existing);
  eval->add_option("--test", o.test, "Test TSV")->required()->check(existing);
  eval->add_option("--k", o.ks, "Comma-separated k values")->capture_default_str();
  eval->add_option("--report", o.report, "Write the report TSV here instead of stdout");
  eval->add_option("--dataset", o.dataset, "Dataset label for the report");

  auto* sweep = app.add_subcommand("sweep", "Learning curve over training-set sizes");
  sweep->add_option("--train", o.train, "Training TSV")->required()->check(existing);
  sweep->add_option("--test", o.test, "Test TSV")->required()->check(existing);
  sweep->add_option("--sizes", o.sizes, "Comma-separated training sizes")->capture_default_str();
  sweep->add_option("--seed", o.seed, "Subsampling seed")->capture_default_str();
  sweep->add_option("--out", o.output, "Learning curve TSV (default stdout)");
  internal::AddTrainFlags(sweep, o);

  auto* direction = app.add_subcommand("direction", "Compare both transliteration directions");
  direction->add_option("--train", o.train, "Training TSV")->required()->check(existing);
  direction->add_option("--test", o.test, "Test TSV")->required()->check(existing);
  direction->add_option("--k", o.ks, "Comma-separated k values")->capture_default_str();
  direction->add_option("--report", o.report, "Write the report TSV here instead of stdout");
  direction->add_option("--dataset", o.dataset, "Dataset label for the report");
  internal::AddTrainFlags(direction, o);

  auto* singleton = app.add_subcommand("singleton", "Singleton-token filtering experiment");
  singleton->add_option("--tokens", o.tokens, "Token pair TSV with occurrence frequencies")
      ->required()
      ->check(existing);
  singleton->add_option("--seed", o.seed, "Split seed")->capture_default_str();
  singleton->add_option("--ratios", o.ratios, "train,dev,test fractions")->capture_default_str();
  singleton->add_option("--k", o.ks, "Comma-separated k values")->capture_default_str();
  singleton->add_option("--report", o.report, "Write the report TSV here instead of stdout");
  singleton->add_option("--dataset", o.dataset, "Dataset label for the report");
  internal::AddTrainFlags(singleton, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*curate) return internal::DoCurate(o, out, err);
    if (*tokenize) return internal::DoTokenize(o, out, err);
    if (*split) return internal::DoSplit(o, out, err);
    if (*stats) return internal::DoStats(o, out, err);
    if (*train) return internal::DoTrain(o, out, err);
    if (*decode) return internal::DoDecode(o, out, err);
    if (*eval) return internal::DoEval(o, out, err);
    if (*sweep) return internal::DoSweep(o, out, err);
    if (*direction) return internal::DoDirection(o, out, err);
    if (*singleton) return internal::DoSingleton(o, out, err);
  } catch (const ConfigError& e) {
    err << "netrans: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "netrans: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace netrans::cli

#endif  // NETRANS_CLI_HPP_
