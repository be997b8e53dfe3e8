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


// Checkpoint layout (little-endian):
//   "STRSUMCK" | u32 version | u8 precision (0 = f32, 1 = f64)
//   dims: u64 vocab, embed, enc_hidden, d_e, d_f, dec_hidden | u8 tied
//   u64 vocab hash | u64 completed epochs | u8 has_best | f64 best metric | u64 best epoch
//   string config JSON
//   u64 count, then per parameter: string name | u64 rows | u64 cols | values
//   u8 has_accumulators, then one value block per parameter in the same order
// Values are raw IEEE-754 words of the stored precision.

#ifndef STRSUM_CHECKPOINT_HPP
#define STRSUM_CHECKPOINT_HPP

#include "strsum/config.hpp"
#include "strsum/corpus/shard.hpp"
#include "strsum/errors.hpp"
#include "strsum/model.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace strsum {

inline constexpr char kCheckpointMagic[8] = {'S', 'T', 'R', 'S', 'U', 'M', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::uint64_t vocab_hash = 0;
  std::uint64_t epoch = 0;  // completed epochs
  std::optional<double> best_metric;
  std::uint64_t best_epoch = 0;
  RunConfig config;
};

struct Checkpoint {
  CheckpointMeta meta;
  Model model;
  std::vector<Matrix> accumulators;  // empty when saved without optimizer state
};

namespace detail {

inline void put_values(std::ostream& out, const Matrix& m, Precision p) {
  for (double v : m.data()) {
    if (p == Precision::kFloat32) {
      const float f = static_cast<float>(v);
      if (static_cast<double>(f) != v && std::isfinite(v))
        throw std::logic_error("checkpoint: value not representable in 32-bit storage");
      corpus::io::put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
    } else {
      corpus::io::put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
  }
}

inline void get_values(std::istream& in, Matrix& m, Precision p) {
  for (double& v : m.data()) {
    if (p == Precision::kFloat32) v = std::bit_cast<float>(corpus::io::get<std::uint32_t>(in));
    else v = std::bit_cast<double>(corpus::io::get<std::uint64_t>(in));
  }
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const Model& model, const std::vector<Matrix>* accumulators,
                             const CheckpointMeta& meta) {
  using namespace corpus::io;
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint8_t>(out, model.precision == Precision::kFloat32 ? 0 : 1);
  const ModelDims& d = model.dims;
  for (std::size_t v : {d.vocab, d.embed, d.enc_hidden, d.d_e, d.d_f, d.dec_hidden}) put<std::uint64_t>(out, v);
  put<std::uint8_t>(out, d.tied_output ? 1 : 0);
  put<std::uint64_t>(out, meta.vocab_hash);
  put<std::uint64_t>(out, meta.epoch);
  put<std::uint8_t>(out, meta.best_metric ? 1 : 0);
  put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(meta.best_metric.value_or(0.0)));
  put<std::uint64_t>(out, meta.best_epoch);
  put_string(out, to_json(meta.config).dump());
  put<std::uint64_t>(out, model.params.size());
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    const Matrix& v = model.params.value(i);
    put_string(out, model.params.name(i));
    put<std::uint64_t>(out, v.rows());
    put<std::uint64_t>(out, v.cols());
    detail::put_values(out, v, model.precision);
  }
  put<std::uint8_t>(out, accumulators ? 1 : 0);
  if (accumulators) {
    if (accumulators->size() != model.params.size()) throw std::logic_error("checkpoint: accumulator count");
    for (const auto& a : *accumulators) detail::put_values(out, a, model.precision);
  }
  if (!out) throw InputError("checkpoint: write failed");
}

inline Checkpoint read_checkpoint(std::istream& in) {
  using namespace corpus::io;
  char magic[sizeof(kCheckpointMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw InputError("not a checkpoint (bad magic)");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw InputError("unsupported checkpoint version " + std::to_string(version));
  const auto prec = get<std::uint8_t>(in);
  if (prec > 1) throw InputError("checkpoint: bad precision tag");
  const Precision precision = prec == 0 ? Precision::kFloat32 : Precision::kFloat64;
  ModelDims d;
  for (std::size_t* v : {&d.vocab, &d.embed, &d.enc_hidden, &d.d_e, &d.d_f, &d.dec_hidden})
    *v = static_cast<std::size_t>(get<std::uint64_t>(in));
  d.tied_output = get<std::uint8_t>(in) != 0;
  Checkpoint ck;
  ck.meta.vocab_hash = get<std::uint64_t>(in);
  ck.meta.epoch = get<std::uint64_t>(in);
  const bool has_best = get<std::uint8_t>(in) != 0;
  const double best = std::bit_cast<double>(get<std::uint64_t>(in));
  if (has_best) ck.meta.best_metric = best;
  ck.meta.best_epoch = get<std::uint64_t>(in);
  try {
    ck.meta.config = from_json(nlohmann::json::parse(get_string(in)));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("checkpoint: bad embedded config: ") + e.what());
  }
  try {
    d.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("checkpoint: ") + e.what());
  }
  ck.model = Model::create(d, 0, precision);
  const auto count = get<std::uint64_t>(in);
  if (count != ck.model.params.size()) throw InputError("checkpoint: parameter count does not match dimensions");
  for (std::size_t i = 0; i < count; ++i) {
    const std::string name = get_string(in, 1024);
    const auto rows = get<std::uint64_t>(in);
    const auto cols = get<std::uint64_t>(in);
    Matrix& v = ck.model.params.value(i);
    if (name != ck.model.params.name(i) || rows != v.rows() || cols != v.cols())
      throw InputError("checkpoint: unexpected parameter '" + name + "'");
    detail::get_values(in, v, precision);
  }
  if (get<std::uint8_t>(in)) {
    for (std::size_t i = 0; i < count; ++i) {
      const Matrix& v = ck.model.params.value(i);
      Matrix a(v.rows(), v.cols());
      detail::get_values(in, a, precision);
      ck.accumulators.push_back(std::move(a));
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw InputError("checkpoint: trailing bytes");
  return ck;
}

/// Writes to a temporary sibling and renames, so readers never see a partial file.
inline void save_checkpoint(const std::string& path, const Model& model, const std::vector<Matrix>* accumulators,
                            const CheckpointMeta& meta) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write checkpoint " + tmp);
    write_checkpoint(out, model, accumulators, meta);
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path);
  return read_checkpoint(in);
}

}  // namespace strsum

#endif  // STRSUM_CHECKPOINT_HPP
