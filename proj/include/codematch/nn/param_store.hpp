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
#include <map>
#include <string>

#include "codematch/nn/tensor.hpp"
#include "codematch/util/error.hpp"
#include "codematch/util/rng.hpp"

namespace codematch::nn {

// Named trainable parameters. Iteration is in name order, which fixes the
// order of initialization, optimizer updates and checkpoint layout.
template <typename T>
class ParamStore {
 public:
  Tensor<T>& add(const std::string& name, int rows, int cols) {
    auto [it, inserted] = params_.try_emplace(name, rows, cols);
    if (!inserted) throw ValidationError("duplicate parameter '" + name + "'");
    return it->second;
  }

  bool contains(const std::string& name) const { return params_.count(name) > 0; }

  Tensor<T>& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ValidationError("unknown parameter '" + name + "'");
    return it->second;
  }
  const Tensor<T>& at(const std::string& name) const { return const_cast<ParamStore*>(this)->at(name); }

  std::map<std::string, Tensor<T>>& all() { return params_; }
  const std::map<std::string, Tensor<T>>& all() const { return params_; }
  std::size_t size() const { return params_.size(); }

  std::size_t num_values() const {
    std::size_t n = 0;
    for (const auto& [_, t] : params_) n += t.size();
    return n;
  }

  // Same names and shapes, all zeros (gradient accumulators).
  ParamStore zeros_like() const {
    ParamStore out;
    for (const auto& [name, t] : params_) out.add(name, t.rows, t.cols);
    return out;
  }

  void set_zero() {
    for (auto& [_, t] : params_) std::fill(t.data.begin(), t.data.end(), T(0));
  }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& [name, t] : params_) out.add(name, t.rows, t.cols) = t.template cast<U>();
    return out;
  }

  bool operator==(const ParamStore&) const = default;

 private:
  std::map<std::string, Tensor<T>> params_;
};

template <typename T>
void fill_uniform(Tensor<T>& t, Rng& rng, double lo, double hi) {
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(lo, hi));
}

}  // namespace codematch::nn
