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
#include <string_view>

#include "zhyper/tensor.hpp"

namespace zhyper {

/// Counter-based generator: draw i is a fixed mixing function of (key, i),
/// so sequences are reproducible on every platform. split() derives an
/// independent stream without advancing the parent.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();
  double uniform();                          // [0, 1)
  double uniform(double lo, double hi);
  double gaussian();                         // standard normal, Box-Muller
  std::size_t below(std::size_t n);          // uniform integer in [0, n)

  Rng split(std::uint64_t stream) const;
  Rng split(std::string_view label) const;

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// i.i.d. N(mean, std^2) draws. Throws ContractError for std < 0.
Tensor rng_gaussian(Rng& rng, Shape shape, double mean, double std,
                    bool requires_grad = false);

}  // namespace zhyper
