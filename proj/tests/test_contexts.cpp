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

#include <cstring>
#include <limits>

#include "support.hpp"
#include "zhyper/contexts.hpp"
#include "zhyper/error.hpp"

using namespace zhyper;

namespace {

ContextRecord record(const std::string& id, const std::string& ds, std::vector<double> v,
                     const std::string& text = "a description") {
  const std::size_t n = v.size();
  return {id, ds, text, Tensor::from({n}, std::move(v))};
}

std::string format_error(const std::function<void()>& f) {
  try {
    f();
  } catch (const FormatError& e) {
    return e.what();
  }
  return "";
}

DatasetBundle datasets(std::initializer_list<const char*> ids) {
  DatasetBundle b;
  for (const char* id : ids) b.datasets.push_back({id, {{{1, 2, 3}, 1}}, {}});
  return b;
}

}  // namespace

TEST_CASE("empty store round trips") {
  ContextStore s(4);
  Bytes b = encode_zemb(s);
  CHECK(b.size() == 4 + 2 + 4 + 4);
  ContextStore back = decode_zemb(b);
  CHECK(back.size() == 0);
  CHECK(back.d_context() == 4);
}

TEST_CASE("zemb layout and bit-exact round trip") {
  ContextStore s(4);
  s.add(record("a/d0", "a", {0.5, -1.25, 3.0, 1e-3}, "Task a: unicode \xc3\xa9"));
  s.add(record("b/d0", "b", {1, 2, 3, 4}));
  Bytes b = encode_zemb(s);
  CHECK(std::string(b.begin(), b.begin() + 4) == "ZEMB");
  CHECK(b[4] == 1);
  CHECK(b[6] == 4);   // d_c
  CHECK(b[10] == 2);  // count
  CHECK(b[14] == 4);  // id length
  CHECK(std::string(b.begin() + 16, b.begin() + 20) == "a/d0");

  ContextStore back = decode_zemb(b);
  REQUIRE(back.size() == 2);
  CHECK(back.get("a/d0").text == "Task a: unicode \xc3\xa9");
  CHECK(back.get("b/d0").dataset_id == "b");
  // Payload is float32; loading widens without altering the stored value.
  CHECK(back.get("a/d0").embedding[3] == static_cast<double>(1e-3f));
  CHECK(encode_zemb(back) == b);

  auto dir = zt::temp_dir("zemb");
  save_context_store(dir / "s.zemb", back);
  CHECK(read_file(dir / "s.zemb") == b);
  CHECK(encode_zemb(load_context_store(dir / "s.zemb")) == b);
}

TEST_CASE("zemb validation names the record and position") {
  ContextStore s(3);
  s.add(record("x", "a", {1, 2, 3}));
  s.add(record("y", "a", {4, 5, 6}));
  Bytes b = encode_zemb(s);

  Bytes nan = b;
  const float q = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(nan.data() + nan.size() - 8, &q, 4);  // record 1, position 1
  const auto msg = format_error([&] { decode_zemb(nan); });
  CHECK(msg.find("record 1") != std::string::npos);
  CHECK(msg.find("position 1") != std::string::npos);

  Bytes magic = b;
  magic[3] = 'X';
  CHECK_THROWS_AS(decode_zemb(magic), FormatError);
  Bytes version = b;
  version[4] = 9;
  CHECK_THROWS_AS(decode_zemb(version), FormatError);
  Bytes truncated(b.begin(), b.end() - 2);
  CHECK(format_error([&] { decode_zemb(truncated); }).find("record 1") != std::string::npos);
  Bytes trailing = b;
  trailing.push_back(0);
  CHECK_THROWS_AS(decode_zemb(trailing), FormatError);

  // Duplicate ids are rejected on load with the record index.
  ContextStore dup(3);
  dup.add(record("x", "a", {1, 2, 3}));
  dup.add(record("z", "a", {1, 2, 3}));
  Bytes d = encode_zemb(dup);
  const auto pos = static_cast<std::size_t>(std::search(d.begin() + 16, d.end(), "z", "z" + 1) - d.begin());
  d[pos] = 'x';
  const auto dup_msg = format_error([&] { decode_zemb(d); });
  CHECK(dup_msg.find("record 1") != std::string::npos);
  CHECK(dup_msg.find("duplicate") != std::string::npos);
}

TEST_CASE("store rejects bad records") {
  ContextStore s(2);
  CHECK_THROWS_AS(s.add(record("a", "t", {1, 2, 3})), ConfigError);
  CHECK_THROWS_AS(s.add(record("a", "t", {1, std::numeric_limits<double>::infinity()})),
                  ConfigError);
  s.add(record("a", "t", {1, 2}));
  CHECK_THROWS_AS(s.add(record("a", "u", {3, 4})), ConfigError);
  CHECK_THROWS_AS(s.get("missing"), KeyError);
}

TEST_CASE("assign contexts") {
  ContextStore s(2);
  s.add(record("t1/c", "t1", {1, 0}));
  s.add(record("t1/a", "t1", {0, 1}));
  s.add(record("t1/b", "t1", {1, 1}));
  s.add(record("t2/a", "t2", {2, 2}));
  s.add(record("ghost/a", "ghost", {3, 3}));

  auto one = assign_contexts(s, datasets({"t1"}));
  REQUIRE(one.bundle.contexts.size() == 1);
  CHECK(one.bundle.contexts[0].size() == 3);
  CHECK(one.bundle.contexts[0][0].id == "t1/a");
  CHECK(one.bundle.contexts[0][2].id == "t1/c");

  auto two = assign_contexts(s, datasets({"t1", "t2"}));
  CHECK(two.bundle.contexts[1].size() == 1);
  for (const auto& r : two.bundle.contexts[0]) CHECK(r.dataset_id == "t1");
  CHECK(two.orphans == 1);
  REQUIRE(two.warnings.size() == 1);
  CHECK(two.warnings[0].find("ghost") != std::string::npos);
  two.bundle.validate();

  try {
    assign_contexts(s, datasets({"t1", "t3", "t4"}));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("t3") != std::string::npos);
    CHECK(msg.find("t4") != std::string::npos);
  }

  // Loading never alters embeddings.
  auto again = decode_zemb(encode_zemb(s));
  CHECK(zt::to_vec(again.for_dataset("t2")[0].embedding) == std::vector<double>{2, 2});
}

TEST_CASE("external embedder command") {
  ContextStore s(3);
  s.add(record("q", "live", {0.25, 0.5, 0.75}));
  auto dir = zt::temp_dir("embedder");
  save_context_store(dir / "out.zemb", s);

  auto got = run_external_embedder("cat '" + (dir / "out.zemb").string() + "'", {"some text"});
  CHECK(got.size() == 1);
  CHECK(zt::to_vec(got.get("q").embedding) == std::vector<double>{0.25, 0.5, 0.75});

  // The text reaches the command on stdin.
  auto echo = run_external_embedder(
      "grep -q 'hello world' && cat '" + (dir / "out.zemb").string() + "'", {"hello world"});
  CHECK(echo.size() == 1);

  CHECK_THROWS_AS(run_external_embedder("false", {"x"}), Error);
  CHECK_THROWS_AS(run_external_embedder("printf garbage", {"x"}), FormatError);
}
