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
#include <string>
#include <string_view>

namespace zhyper {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view s, std::string_view what);
std::uint64_t parse_u64(std::string_view s, std::string_view what);
bool parse_bool(std::string_view s, std::string_view what);
std::string_view trim(std::string_view s);

}  // namespace zhyper
