// Copyright 2026 The StrSum Authors.
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

// Binary document shards: "STRSHARD" magic, u32 format version, u64 document
// count, then per document its id, sentences and optional reference. All
// integers are little-endian.

#ifndef STRSUM_CORPUS_SHARD_HPP
#define STRSUM_CORPUS_SHARD_HPP

#include "strsum/corpus/document.hpp"
#include "strsum/errors.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace strsum::corpus {

inline constexpr char kShardMagic[8] = {'S', 'T', 'R', 'S', 'H', 'A', 'R', 'D'};
inline constexpr std::uint32_t kShardVersion = 1;

namespace io {

template <typename T>
void put(std::ostream& out, T v) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) throw InputError("unexpected end of binary file");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return static_cast<T>(v);
}

inline void put_string(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in, std::uint64_t limit = 1ull << 32) {
  const auto len = get<std::uint64_t>(in);
  if (len > limit) throw InputError("string length exceeds limit in binary file");
  std::string s(len, '\0');
  if (len && !in.read(s.data(), static_cast<std::streamsize>(len))) throw InputError("unexpected end of binary file");
  return s;
}

inline void put_ids(std::ostream& out, const std::vector<std::size_t>& ids) {
  put<std::uint64_t>(out, ids.size());
  for (auto id : ids) put<std::uint32_t>(out, static_cast<std::uint32_t>(id));
}

inline std::vector<std::size_t> get_ids(std::istream& in) {
  const auto len = get<std::uint64_t>(in);
  if (len > (1u << 24)) throw InputError("id list too long in binary file");
  std::vector<std::size_t> ids(len);
  for (auto& id : ids) id = get<std::uint32_t>(in);
  return ids;
}

}  // namespace io

inline void write_shard(std::ostream& out, const std::vector<Document>& docs) {
  out.write(kShardMagic, sizeof(kShardMagic));
  io::put<std::uint32_t>(out, kShardVersion);
  io::put<std::uint64_t>(out, docs.size());
  for (const auto& d : docs) {
    io::put_string(out, d.id);
    io::put<std::uint64_t>(out, d.sentences.size());
    for (const auto& s : d.sentences) io::put_ids(out, s);
    io::put<std::uint8_t>(out, d.reference ? 1 : 0);
    if (d.reference) io::put_ids(out, *d.reference);
    io::put<std::uint8_t>(out, d.reference_text ? 1 : 0);
    if (d.reference_text) io::put_string(out, *d.reference_text);
  }
}

inline std::vector<Document> read_shard(std::istream& in) {
  char magic[sizeof(kShardMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kShardMagic, sizeof(magic)) != 0)
    throw InputError("not a document shard (bad magic)");
  const auto version = io::get<std::uint32_t>(in);
  if (version != kShardVersion) throw InputError("unsupported shard version " + std::to_string(version));
  const auto count = io::get<std::uint64_t>(in);
  std::vector<Document> docs;
  for (std::uint64_t i = 0; i < count; ++i) {
    Document d;
    d.id = io::get_string(in);
    const auto n = io::get<std::uint64_t>(in);
    if (n > (1u << 20)) throw InputError("sentence count too large in shard");
    for (std::uint64_t s = 0; s < n; ++s) d.sentences.push_back(io::get_ids(in));
    if (io::get<std::uint8_t>(in)) d.reference = io::get_ids(in);
    if (io::get<std::uint8_t>(in)) d.reference_text = io::get_string(in);
    docs.push_back(std::move(d));
  }
  return docs;
}

inline void save_shard(const std::string& path, const std::vector<Document>& docs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write shard " + path);
  write_shard(out, docs);
}

inline std::vector<Document> load_shard(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open shard " + path);
  return read_shard(in);
}

}  // namespace strsum::corpus

#endif  // STRSUM_CORPUS_SHARD_HPP
