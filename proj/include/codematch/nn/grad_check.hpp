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

#include <algorithm>
#include <cmath>
#include <string>

#include "codematch/nn/graph.hpp"
#include "codematch/nn/param_store.hpp"

namespace codematch::nn {

struct GradCheckReport {
  double max_rel_error = 0;
  std::size_t checked = 0;
  // Coordinates whose +/- step crosses a non-smooth point (an argmax or
  // hinge switch), where finite differences do not estimate the gradient.
  std::size_t excluded = 0;
  std::string worst;  // "name[index]" of the largest error
};

// Relative error |a - n| / max(|a|, |n|, floor); the floor keeps round-off
// on near-zero gradients from dominating.
inline constexpr double kGradCheckFloor = 1e-4;

// Compares reverse-mode gradients of the scalar built by `f` against central
// differences over every value in `params`.
template <typename Fn>
GradCheckReport grad_check(ParamStore<double>& params, Fn&& f, double step = 1e-5) {
  ParamStore<double> grads = params.zeros_like();
  std::vector<int> base_sel;
  {
    Graph<double> g(params, &grads, NormGuard::kStrict);
    const Var loss = f(g);
    base_sel = g.selections();
    g.backward(loss);
  }
  auto eval = [&](std::vector<int>* sel) {
    Graph<double> g(params, nullptr, NormGuard::kStrict);
    const double v = g.value(f(g)).item();
    *sel = g.selections();
    return v;
  };
  GradCheckReport report;
  for (auto& [name, t] : params.all()) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double orig = t.data[i];
      std::vector<int> sel_p, sel_m;
      t.data[i] = orig + step;
      const double fp = eval(&sel_p);
      t.data[i] = orig - step;
      const double fm = eval(&sel_m);
      t.data[i] = orig;
      if (sel_p != base_sel || sel_m != base_sel) {
        ++report.excluded;
        continue;
      }
      const double numeric = (fp - fm) / (2 * step);
      const double analytic = grads.at(name).data[i];
      const double rel =
          std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
      ++report.checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return report;
}

}  // namespace codematch::nn
