// archive.hpp
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
// Minimal POSIX ustar reader/writer and SHA-256 hex digests. Written
// archives carry fixed metadata (mtime 0, uid/gid 0, mode 0644) so equal
// contents give equal bytes.

#ifndef NETRANS_ARCHIVE_HPP_
#define NETRANS_ARCHIVE_HPP_

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cstring>
#include <istream>
#include <iterator>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "netrans/error.hpp"

namespace netrans {

inline std::string Sha256Hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 computation failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 15]);
  }
  return out;
}

struct ArchiveMember {
  std::string name;
  std::string data;
};

namespace internal {

inline constexpr std::size_t kBlock = 512;

// `width` includes the terminating NUL.
inline void PutOctal(char* field, std::size_t width, unsigned long long value) {
  std::string digits(width - 1, '0');
  for (std::size_t i = width - 1; i-- > 0; value >>= 3) digits[i] = static_cast<char>('0' + (value & 7));
  if (value != 0) throw Error("value too large for a ustar header field");
  std::memcpy(field, digits.data(), width - 1);
  field[width - 1] = '\0';
}

inline unsigned long long GetOctal(const char* field, std::size_t width) {
  unsigned long long v = 0;
  std::size_t i = 0;
  while (i < width && (field[i] == ' ' || field[i] == '\0')) ++i;
  for (; i < width && field[i] >= '0' && field[i] <= '7'; ++i) v = v * 8 + (field[i] - '0');
  return v;
}

inline unsigned HeaderChecksum(const std::array<char, kBlock>& h) {
  unsigned sum = 0;
  for (std::size_t i = 0; i < kBlock; ++i)
    sum += (i >= 148 && i < 156) ? ' ' : static_cast<unsigned char>(h[i]);
  return sum;
}

}  // namespace internal

inline void WriteArchive(std::ostream& os, const std::vector<ArchiveMember>& members) {
  using internal::kBlock;
  for (const auto& m : members) {
    if (m.name.empty() || m.name.size() > 99) throw ConfigError("bad archive member name: " + m.name);
    std::array<char, kBlock> h{};
    std::memcpy(h.data(), m.name.data(), m.name.size());
    internal::PutOctal(h.data() + 100, 8, 0644);
    internal::PutOctal(h.data() + 108, 8, 0);
    internal::PutOctal(h.data() + 116, 8, 0);
    internal::PutOctal(h.data() + 124, 12, m.data.size());
    internal::PutOctal(h.data() + 136, 12, 0);
    h[156] = '0';
    std::memcpy(h.data() + 257, "ustar", 6);
    h[263] = '0';
    h[264] = '0';
    internal::PutOctal(h.data() + 148, 7, internal::HeaderChecksum(h));
    h[155] = ' ';
    os.write(h.data(), kBlock);
    os.write(m.data.data(), static_cast<std::streamsize>(m.data.size()));
    const std::size_t pad = (kBlock - m.data.size() % kBlock) % kBlock;
    static const std::array<char, kBlock> zeros{};
    os.write(zeros.data(), static_cast<std::streamsize>(pad));
  }
  static const std::array<char, 2 * kBlock> end{};
  os.write(end.data(), end.size());
  if (!os) throw Error("failed to write archive");
}

inline std::vector<ArchiveMember> ReadArchive(std::istream& is) {
  using internal::kBlock;
  std::string bytes{std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
  std::vector<ArchiveMember> members;
  std::size_t pos = 0;
  while (true) {
    if (pos + kBlock > bytes.size()) throw LoadError("archive is truncated");
    std::array<char, kBlock> h;
    std::memcpy(h.data(), bytes.data() + pos, kBlock);
    if (std::all_of(h.begin(), h.end(), [](char c) { return c == 0; })) break;
    if (internal::GetOctal(h.data() + 148, 8) != internal::HeaderChecksum(h))
      throw LoadError("archive header checksum mismatch");
    if (h[156] != '0' && h[156] != '\0') throw LoadError("unsupported archive entry type");
    ArchiveMember m;
    m.name.assign(h.data(), strnlen(h.data(), 100));
    const std::size_t size = internal::GetOctal(h.data() + 124, 12);
    pos += kBlock;
    if (pos + size > bytes.size()) throw LoadError("archive member '" + m.name + "' is truncated");
    m.data = bytes.substr(pos, size);
    pos += size + (kBlock - size % kBlock) % kBlock;
    members.push_back(std::move(m));
  }
  return members;
}

}  // namespace netrans

#endif  // NETRANS_ARCHIVE_HPP_
