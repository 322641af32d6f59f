// error.hpp
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
// Exception hierarchy shared by all modules.

#ifndef NETRANS_ERROR_HPP_
#define NETRANS_ERROR_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace netrans {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad flags, ratios, orders and similar caller mistakes.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input text. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Overlapping splits, digest mismatches in archives.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

// A pair with no complete alignment path.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

// Decode input contains graphemes the model never saw.
class UnseenSymbolError : public Error {
 public:
  UnseenSymbolError(const std::string& what, std::vector<std::string> symbols)
      : Error(what), symbols_(std::move(symbols)) {}
  const std::vector<std::string>& symbols() const { return symbols_; }

 private:
  std::vector<std::string> symbols_;
};

class LoadError : public Error {
 public:
  using Error::Error;
};

// Evaluation contract violations (gold/prediction mismatch).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace netrans

#endif  // NETRANS_ERROR_HPP_
