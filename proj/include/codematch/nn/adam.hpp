// Copyright 2026 The codematch Authors.
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

#include <cmath>
#include <cstdint>

#include "codematch/nn/param_store.hpp"
#include "codematch/util/error.hpp"

namespace codematch::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  ParamStore<T> m;
  ParamStore<T> v;
};

template <typename T>
AdamState<T> make_adam(const ParamStore<T>& params, AdamConfig config = {}) {
  return {config, 0, params.zeros_like(), params.zeros_like()};
}

// One bias-corrected Adam update over every parameter.
template <typename T>
void adam_step(ParamStore<T>& params, const ParamStore<T>& grads, AdamState<T>& state) {
  for (const auto& [name, p] : params.all()) {
    if (!grads.contains(name)) throw ValidationError("missing gradient for parameter '" + name + "'");
    if (!grads.at(name).same_shape(p) || !state.m.contains(name) || !state.m.at(name).same_shape(p)) {
      throw ShapeError("optimizer state does not match parameter '" + name + "'");
    }
  }
  ++state.step;
  const AdamConfig& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (auto& [name, p] : params.all()) {
    const Tensor<T>& g = grads.at(name);
    Tensor<T>& m = state.m.at(name);
    Tensor<T>& v = state.v.at(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g.data[i];
      const double mi = c.beta1 * m.data[i] + (1.0 - c.beta1) * gi;
      const double vi = c.beta2 * v.data[i] + (1.0 - c.beta2) * gi * gi;
      m.data[i] = static_cast<T>(mi);
      v.data[i] = static_cast<T>(vi);
      const double update = c.lr * (mi / bc1) / (std::sqrt(vi / bc2) + c.eps);
      p.data[i] = static_cast<T>(p.data[i] - update);
    }
  }
}

}  // namespace codematch::nn
