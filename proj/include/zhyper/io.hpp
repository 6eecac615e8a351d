// Copyright 2026 The Zhyper Authors.
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

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "zhyper/tensor.hpp"

namespace zhyper {

using Bytes = std::vector<std::uint8_t>;

/// Little-endian append-only encoder.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  void raw(std::span<const std::uint8_t> bytes);
  void raw(std::string_view s);

  const Bytes& bytes() const { return buf_; }
  Bytes take() { return std::move(buf_); }
  std::size_t size() const { return buf_.size(); }

 private:
  Bytes buf_;
};

/// Bounds-checked little-endian decoder; short reads throw FormatError
/// naming the offset and what was being read.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8(const char* what);
  std::uint16_t u16(const char* what);
  std::uint32_t u32(const char* what);
  std::uint64_t u64(const char* what);
  float f32(const char* what);
  double f64(const char* what);
  std::string str(std::size_t len, const char* what);
  std::span<const std::uint8_t> raw(std::size_t len, const char* what);
  void expect_magic(std::string_view magic);

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) const;

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

// ZTSR tensor block: "ZTSR", u32 rank, u32 dims[rank], u8 precision flag
// (0 = 64-bit, 1 = 32-bit), then the values.
enum class Precision : std::uint8_t { F64 = 0, F32 = 1 };

void write_ztsr(ByteWriter& out, const Tensor& t, Precision p = Precision::F64);
/// Reads one block; non-finite values are rejected with their flat index.
Tensor read_ztsr(ByteReader& in);

Bytes encode_ztsr(const Tensor& t, Precision p = Precision::F64);
Tensor decode_ztsr(std::span<const std::uint8_t> bytes);
void save_ztsr(const std::filesystem::path& path, const Tensor& t,
               Precision p = Precision::F64);
Tensor load_ztsr(const std::filesystem::path& path);

}  // namespace zhyper
