// Copyright 2026 The REMI Authors.
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

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "remi/error.h"
#include "remi/model.h"

namespace remi {

namespace {

constexpr std::array<std::array<char, 4>, 4> kTags{{
    {'E', 'M', 'B', 'D'},
    {'P', 'O', 'S', 'E'},
    {'A', 'T', 'W', '1'},
    {'A', 'T', 'W', '2'},
}};

void put_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw DataError("checkpoint: truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

// `m` holds rows as columns (d x rows), so its column-major storage is
// exactly the row-major layout of the declared rows x d block.
void write_transposed_block(std::ostream& out, const std::array<char, 4>& tag, const Matrix& m) {
  out.write(tag.data(), 4);
  put_u64(out, static_cast<std::uint64_t>(m.size()));
  for (Eigen::Index i = 0; i < m.size(); ++i) put_u64(out, std::bit_cast<std::uint64_t>(m.data()[i]));
}

void write_row_major_block(std::ostream& out, const std::array<char, 4>& tag, const Matrix& m) {
  out.write(tag.data(), 4);
  put_u64(out, static_cast<std::uint64_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_u64(out, std::bit_cast<std::uint64_t>(m(r, c)));
  }
}

void expect_tag(std::istream& in, const std::array<char, 4>& tag, std::uint64_t expected_count) {
  std::array<char, 4> got{};
  in.read(got.data(), 4);
  if (!in || got != tag) {
    throw DataError("checkpoint: expected block '" + std::string(tag.data(), 4) + "'");
  }
  if (get_u64(in) != expected_count) {
    throw DataError("checkpoint: block '" + std::string(tag.data(), 4) + "' has wrong length");
  }
}

void read_transposed_block(std::istream& in, const std::array<char, 4>& tag, Matrix& m) {
  expect_tag(in, tag, static_cast<std::uint64_t>(m.size()));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std::bit_cast<double>(get_u64(in));
}

void read_row_major_block(std::istream& in, const std::array<char, 4>& tag, Matrix& m) {
  expect_tag(in, tag, static_cast<std::uint64_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = std::bit_cast<double>(get_u64(in));
  }
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  const auto& d = params.dims;
  out << d.d << ' ' << d.d_a << ' ' << d.K << ' ' << d.n << ' ' << d.num_items << '\n';
  write_transposed_block(out, kTags[0], params.item_emb);
  write_transposed_block(out, kTags[1], params.pos_emb);
  write_row_major_block(out, kTags[2], params.w1);
  write_row_major_block(out, kTags[3], params.w2);
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw DataError("checkpoint: missing header");
  std::istringstream hs(header);
  ModelDims dims;
  if (!(hs >> dims.d >> dims.d_a >> dims.K >> dims.n >> dims.num_items)) {
    throw DataError("checkpoint: malformed header '" + header + "'");
  }
  ModelParams p = ModelParams::zeros(dims);
  read_transposed_block(in, kTags[0], p.item_emb);
  read_transposed_block(in, kTags[1], p.pos_emb);
  read_row_major_block(in, kTags[2], p.w1);
  read_row_major_block(in, kTags[3], p.w2);
  return p;
}

}  // namespace remi
