// utf8.hpp
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
// UTF-8 helpers: code point decoding, simple case folding and grapheme
// splitting.

#ifndef NETRANS_UTF8_HPP_
#define NETRANS_UTF8_HPP_

#include <locale.h>
#include <wctype.h>

#include <string>
#include <string_view>
#include <vector>

#include "netrans/error.hpp"

namespace netrans::utf8 {

// Decodes `text` into code points. Invalid sequences raise ParseError.
inline std::u32string Decode(std::string_view text) {
  std::u32string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto b0 = static_cast<unsigned char>(text[i]);
    char32_t cp;
    std::size_t len;
    if (b0 < 0x80) {
      cp = b0;
      len = 1;
    } else if ((b0 & 0xE0) == 0xC0) {
      cp = b0 & 0x1F;
      len = 2;
    } else if ((b0 & 0xF0) == 0xE0) {
      cp = b0 & 0x0F;
      len = 3;
    } else if ((b0 & 0xF8) == 0xF0) {
      cp = b0 & 0x07;
      len = 4;
    } else {
      throw ParseError("invalid UTF-8 lead byte");
    }
    if (i + len > text.size()) throw ParseError("truncated UTF-8 sequence");
    for (std::size_t k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(text[i + k]);
      if ((b & 0xC0) != 0x80) throw ParseError("invalid UTF-8 continuation");
      cp = (cp << 6) | (b & 0x3F);
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

inline void Append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline std::string Encode(std::u32string_view cps) {
  std::string out;
  out.reserve(cps.size());
  for (char32_t cp : cps) Append(out, cp);
  return out;
}

inline std::string Encode(char32_t cp) {
  std::string out;
  Append(out, cp);
  return out;
}

// Simple (1:1) Unicode lowercase mapping from the C.UTF-8 locale tables.
inline char32_t ToLower(char32_t cp) {
  static const locale_t kLocale = [] {
    locale_t loc = newlocale(LC_CTYPE_MASK, "C.UTF-8", locale_t{});
    return loc ? loc : newlocale(LC_CTYPE_MASK, "C", locale_t{});
  }();
  if (cp < 0x80) return (cp >= 'A' && cp <= 'Z') ? cp + 32 : cp;
  return static_cast<char32_t>(towlower_l(static_cast<wint_t>(cp), kLocale));
}

inline std::size_t Length(std::string_view text) { return Decode(text).size(); }

}  // namespace netrans::utf8

namespace netrans {

// How a token string breaks into grapheme symbols. Spelling scripts use
// one symbol per code point; phone sets such as ARPAbet use
// whitespace-separated symbols.
enum class Tokenization { kChars, kWhitespace };

inline std::string_view ToString(Tokenization t) {
  return t == Tokenization::kChars ? "chars" : "space";
}

inline Tokenization ParseTokenization(std::string_view s) {
  if (s == "chars") return Tokenization::kChars;
  if (s == "space") return Tokenization::kWhitespace;
  throw ConfigError("unknown tokenization '" + std::string(s) +
                    "' (expected chars or space)");
}

inline std::vector<std::string> SplitGraphemes(std::string_view token,
                                               Tokenization mode) {
  std::vector<std::string> out;
  if (mode == Tokenization::kChars) {
    for (char32_t cp : utf8::Decode(token)) out.push_back(utf8::Encode(cp));
    return out;
  }
  std::size_t i = 0;
  while (i < token.size()) {
    while (i < token.size() && token[i] == ' ') ++i;
    std::size_t j = i;
    while (j < token.size() && token[j] != ' ') ++j;
    if (j > i) out.emplace_back(token.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string JoinGraphemes(const std::vector<std::string>& graphemes,
                                 Tokenization mode) {
  std::string out;
  for (std::size_t i = 0; i < graphemes.size(); ++i) {
    if (mode == Tokenization::kWhitespace && i > 0) out.push_back(' ');
    out += graphemes[i];
  }
  return out;
}

}  // namespace netrans

#endif  // NETRANS_UTF8_HPP_
