// symbol_table.hpp
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

#ifndef NETRANS_SYMBOL_TABLE_HPP_
#define NETRANS_SYMBOL_TABLE_HPP_

#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "netrans/error.hpp"

namespace netrans {

using Label = int;
inline constexpr Label kEpsilon = 0;

// Dense string <-> id bijection. Id 0 is always the epsilon symbol.
class SymbolTable {
 public:
  static constexpr std::string_view kEpsilonSymbol = "<eps>";

  SymbolTable() { Add(std::string(kEpsilonSymbol)); }

  Label Add(const std::string& symbol) {
    auto [it, inserted] =
        index_.emplace(symbol, static_cast<Label>(symbols_.size()));
    if (inserted) symbols_.push_back(symbol);
    return it->second;
  }

  std::optional<Label> Find(const std::string& symbol) const {
    auto it = index_.find(symbol);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& Symbol(Label id) const { return symbols_.at(id); }
  std::size_t size() const { return symbols_.size(); }

  bool operator==(const SymbolTable& other) const {
    return symbols_ == other.symbols_;
  }

  // `symbol<TAB>id` per line, AT&T symbol-table convention.
  void WriteText(std::ostream& os) const {
    for (std::size_t i = 0; i < symbols_.size(); ++i)
      os << symbols_[i] << '\t' << i << '\n';
  }

  static SymbolTable ReadText(std::istream& is) {
    SymbolTable table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto tab = line.rfind('\t');
      if (tab == std::string::npos)
        throw ParseError("symbol table line lacks a tab", lineno);
      std::string sym = line.substr(0, tab);
      Label id = 0;
      try {
        id = std::stoi(line.substr(tab + 1));
      } catch (const std::exception&) {
        throw ParseError("bad symbol id", lineno);
      }
      if (id == 0) {
        if (sym != kEpsilonSymbol)
          throw ParseError("id 0 must be the epsilon symbol", lineno);
        continue;
      }
      if (static_cast<std::size_t>(id) != table.size() ||
          table.Add(sym) != id)
        throw ParseError("symbol ids must be dense and unique", lineno);
    }
    return table;
  }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, Label> index_;
};

}  // namespace netrans

#endif  // NETRANS_SYMBOL_TABLE_HPP_
