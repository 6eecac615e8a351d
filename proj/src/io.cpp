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

#include "zhyper/io.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "zhyper/error.hpp"

namespace zhyper {

void ByteWriter::u16(std::uint16_t v) {
  u8(static_cast<std::uint8_t>(v));
  u8(static_cast<std::uint8_t>(v >> 8));
}

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::raw(std::span<const std::uint8_t> bytes) {
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

void ByteWriter::raw(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

void ByteReader::need(std::size_t n, const char* what) const {
  if (bytes_.size() - pos_ < n) {
    throw FormatError("truncated input at byte " + std::to_string(pos_) +
                      " while reading " + what);
  }
}

std::uint8_t ByteReader::u8(const char* what) {
  need(1, what);
  return bytes_[pos_++];
}

std::uint16_t ByteReader::u16(const char* what) {
  need(2, what);
  std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
  pos_ += 2;
  return v;
}

std::uint32_t ByteReader::u32(const char* what) {
  need(4, what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_ + i]} << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64(const char* what) {
  need(8, what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
  pos_ += 8;
  return v;
}

float ByteReader::f32(const char* what) { return std::bit_cast<float>(u32(what)); }
double ByteReader::f64(const char* what) { return std::bit_cast<double>(u64(what)); }

std::string ByteReader::str(std::size_t len, const char* what) {
  auto span = raw(len, what);
  return std::string(span.begin(), span.end());
}

std::span<const std::uint8_t> ByteReader::raw(std::size_t len, const char* what) {
  need(len, what);
  auto out = bytes_.subspan(pos_, len);
  pos_ += len;
  return out;
}

void ByteReader::expect_magic(std::string_view magic) {
  const std::size_t at = pos_;
  auto got = str(magic.size(), "magic");
  if (got != magic) {
    throw FormatError("bad magic at byte " + std::to_string(at) + ": expected \"" +
                      std::string(magic) + "\"");
  }
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
    crc = ::crc32(crc, bytes.data() + off, static_cast<uInt>(n));
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                             text.size()));
}

void write_ztsr(ByteWriter& out, const Tensor& t, Precision p) {
  out.raw(std::string_view("ZTSR"));
  out.u32(static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) out.u32(static_cast<std::uint32_t>(d));
  out.u8(static_cast<std::uint8_t>(p));
  for (double v : t.data()) {
    if (p == Precision::F64) {
      out.f64(v);
    } else {
      out.f32(static_cast<float>(v));
    }
  }
}

Tensor read_ztsr(ByteReader& in) {
  in.expect_magic("ZTSR");
  const std::uint32_t rank = in.u32("tensor rank");
  if (rank > 8) {
    throw FormatError("tensor rank " + std::to_string(rank) + " exceeds limit of 8");
  }
  Shape shape(rank);
  for (auto& d : shape) d = in.u32("tensor dimension");
  const std::size_t at = in.offset();
  const std::uint8_t flag = in.u8("precision flag");
  if (flag > 1) {
    throw FormatError("unknown precision flag " + std::to_string(flag) +
                      " at byte " + std::to_string(at));
  }
  const std::size_t n = shape_numel(shape);
  const std::size_t width = flag == 0 ? 8 : 4;
  if (n > in.remaining() / width) {
    throw FormatError("tensor payload of " + std::to_string(n) +
                      " values exceeds remaining input");
  }
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    values[i] = flag == 0 ? in.f64("tensor value") : in.f32("tensor value");
    if (!std::isfinite(values[i])) {
      throw FormatError("non-finite tensor value at index " + std::to_string(i) +
                        " of " + shape_str(shape));
    }
  }
  return Tensor::from(std::move(shape), std::move(values));
}

Bytes encode_ztsr(const Tensor& t, Precision p) {
  ByteWriter w;
  write_ztsr(w, t, p);
  return w.take();
}

Tensor decode_ztsr(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  Tensor t = read_ztsr(r);
  if (!r.done()) {
    throw FormatError("trailing bytes after tensor at byte " + std::to_string(r.offset()));
  }
  return t;
}

void save_ztsr(const std::filesystem::path& path, const Tensor& t, Precision p) {
  write_file(path, encode_ztsr(t, p));
}

Tensor load_ztsr(const std::filesystem::path& path) {
  try {
    return decode_ztsr(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace zhyper
