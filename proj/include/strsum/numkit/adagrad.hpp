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

#ifndef STRSUM_NUMKIT_ADAGRAD_HPP
#define STRSUM_NUMKIT_ADAGRAD_HPP

#include "strsum/numkit/matrix.hpp"

#include <cmath>
#include <span>

namespace strsum::numkit {

struct AdagradUpdate {
  double param;
  double acc;
};

/// acc' = acc + grad², param' = param - lr·grad/√acc'
inline AdagradUpdate adagrad_step(double param, double grad, double acc, double lr) {
  const double acc_next = acc + grad * grad;
  return {param - lr * grad / std::sqrt(acc_next), acc_next};
}

struct AdagradConfig {
  double learning_rate = 0.1;
  double initial_accumulator = 0.1;
};

/// Applies adagrad_step element-wise. With `round_to_float` both the parameter
/// and its accumulator are stored at 32-bit precision after the update.
inline void adagrad_apply(std::span<double> params, std::span<const double> grads,
                          std::span<double> accs, double lr, bool round_to_float) {
  if (params.size() != grads.size() || params.size() != accs.size())
    throw ShapeMismatch("adagrad_apply: length mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto [p, a] = adagrad_step(params[i], grads[i], accs[i], lr);
    if (round_to_float) {
      p = static_cast<float>(p);
      a = static_cast<float>(a);
    }
    params[i] = p;
    accs[i] = a;
  }
}

}  // namespace strsum::numkit

#endif  // STRSUM_NUMKIT_ADAGRAD_HPP
