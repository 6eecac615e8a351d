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

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "support.hpp"
#include "zhyper/error.hpp"
#include "zhyper/io.hpp"

using namespace zhyper;

namespace {

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const FormatError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("crc32 check value") {
  const std::string s = "123456789";
  CHECK(crc32(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())) ==
        0xCBF43926u);
  CHECK(crc32({}) == 0u);
}

TEST_CASE("ztsr layout is little endian with a precision flag") {
  Tensor t = Tensor::from({2}, {1.0, -2.5});
  Bytes b = encode_ztsr(t);
  REQUIRE(b.size() == 4 + 4 + 4 + 1 + 16);
  CHECK(std::string(b.begin(), b.begin() + 4) == "ZTSR");
  CHECK(b[4] == 1);  // rank
  CHECK(b[8] == 2);  // dim 0
  CHECK(b[12] == 0); // f64
  double v;
  std::memcpy(&v, b.data() + 13, 8);
  CHECK(v == 1.0);

  Bytes f = encode_ztsr(t, Precision::F32);
  CHECK(f.size() == 13 + 8);
  CHECK(f[12] == 1);
}

TEST_CASE("ztsr round trip over ranks and precisions") {
  std::mt19937_64 gen(1);
  for (Shape s : {Shape{}, Shape{5}, Shape{3, 4}, Shape{2, 3, 2}, Shape{0, 3}}) {
    Tensor t = zt::randn(gen, s);
    Tensor back = decode_ztsr(encode_ztsr(t));
    CHECK(back.shape() == t.shape());
    CHECK(zt::to_vec(back) == zt::to_vec(t));

    Tensor lossy = decode_ztsr(encode_ztsr(t, Precision::F32));
    for (std::size_t i = 0; i < t.numel(); ++i) {
      CHECK(lossy[i] == static_cast<double>(static_cast<float>(t[i])));
    }
  }
  auto dir = zt::temp_dir("io");
  Tensor m = zt::randn(gen, {3, 3});
  save_ztsr(dir / "m.ztsr", m);
  CHECK(zt::to_vec(load_ztsr(dir / "m.ztsr")) == zt::to_vec(m));
}

TEST_CASE("ztsr rejects malformed input") {
  Tensor t = Tensor::from({3}, {1, 2, 3});
  Bytes good = encode_ztsr(t);

  Bytes magic = good;
  magic[0] = 'X';
  CHECK(message_of([&] { decode_ztsr(magic); }).find("bad magic") != std::string::npos);

  for (std::size_t cut : {std::size_t{2}, std::size_t{9}, good.size() - 1}) {
    Bytes shortb(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(cut));
    CHECK_THROWS_AS(decode_ztsr(shortb), FormatError);
  }

  Bytes flag = good;
  flag[12] = 7;
  CHECK(message_of([&] { decode_ztsr(flag); }).find("precision flag 7") != std::string::npos);

  Bytes nan = good;
  const double q = std::numeric_limits<double>::quiet_NaN();
  std::memcpy(nan.data() + 13 + 8, &q, 8);
  CHECK(message_of([&] { decode_ztsr(nan); }).find("index 1") != std::string::npos);

  Bytes trailing = good;
  trailing.push_back(0);
  CHECK(message_of([&] { decode_ztsr(trailing); }).find("trailing") != std::string::npos);

  // Claimed size far beyond the payload must fail without allocating it.
  Bytes huge = encode_ztsr(Tensor::zeros({1}));
  huge[8] = 0xff;
  huge[9] = 0xff;
  huge[10] = 0xff;
  CHECK_THROWS_AS(decode_ztsr(huge), FormatError);
}

TEST_CASE("byte reader reports the failing field") {
  Bytes b{1, 2, 3};
  ByteReader r(b);
  CHECK(r.u16("a") == 0x0201);
  const auto msg = message_of([&] { r.u32("layer count"); });
  CHECK(msg.find("byte 2") != std::string::npos);
  CHECK(msg.find("layer count") != std::string::npos);
}

TEST_CASE("missing file is an error") {
  CHECK_THROWS_AS(read_file("/nonexistent/zhyper/file"), Error);
}
