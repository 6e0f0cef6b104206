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
#include <cstdint>
#include <vector>

#include "codematch/nn/tensor.hpp"
#include "codematch/util/error.hpp"
#include "codematch/util/rng.hpp"

namespace codematch::nn {

struct SkipGramOptions {
  int window = 5;
  int negatives = 5;
  int epochs = 5;
  double lr = 0.025;
};

// Skip-gram with negative sampling over id sequences. Overwrites `table`
// ([V x E]) with the learned input vectors; ids never seen keep the small
// random initialization. Id `skip_id` (the pad id) is ignored.
template <typename T>
void skipgram_pretrain(Tensor<T>& table, const std::vector<std::vector<int>>& seqs, const SkipGramOptions& opt,
                       std::uint64_t seed, int skip_id = 0) {
  const int vocab = table.rows;
  const int dim = table.cols;
  if (opt.window < 1 || opt.negatives < 0 || opt.epochs < 0) throw ValidationError("invalid skip-gram options");
  Rng rng(seed);
  std::vector<double> in(static_cast<std::size_t>(vocab) * dim);
  for (auto& v : in) v = rng.uniform(-0.5, 0.5) / dim;
  std::vector<double> out(in.size(), 0.0);

  std::vector<double> counts(vocab, 0.0);
  std::size_t total = 0;
  for (const auto& s : seqs) {
    for (int id : s) {
      if (id < 0 || id >= vocab) throw ShapeError("skip-gram id out of range");
      if (id != skip_id) {
        counts[id] += 1;
        ++total;
      }
    }
  }
  if (total == 0) {
    for (std::size_t i = 0; i < in.size(); ++i) table.data[i] = static_cast<T>(in[i]);
    return;
  }
  std::vector<double> cdf(vocab);
  double acc = 0;
  for (int v = 0; v < vocab; ++v) {
    acc += std::pow(counts[v], 0.75);
    cdf[v] = acc;
  }
  auto draw = [&] {
    const double u = rng.uniform() * acc;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return static_cast<int>(std::min<std::ptrdiff_t>(it - cdf.begin(), vocab - 1));
  };
  auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };

  const double steps = static_cast<double>(total) * opt.epochs;
  double done = 0;
  std::vector<double> grad_in(dim);
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    for (const auto& s : seqs) {
      const int n = static_cast<int>(s.size());
      for (int c = 0; c < n; ++c) {
        if (s[c] == skip_id) continue;
        const double lr = std::max(opt.lr * (1.0 - done / steps), opt.lr * 1e-4);
        done += 1;
        double* vc = &in[static_cast<std::size_t>(s[c]) * dim];
        for (int j = std::max(0, c - opt.window); j <= std::min(n - 1, c + opt.window); ++j) {
          if (j == c || s[j] == skip_id) continue;
          std::fill(grad_in.begin(), grad_in.end(), 0.0);
          for (int k = 0; k <= opt.negatives; ++k) {
            const int target = k == 0 ? s[j] : draw();
            if (k > 0 && target == s[j]) continue;
            const double label = k == 0 ? 1.0 : 0.0;
            double* vo = &out[static_cast<std::size_t>(target) * dim];
            double dot = 0;
            for (int e = 0; e < dim; ++e) dot += vc[e] * vo[e];
            const double g = lr * (label - sigmoid(dot));
            for (int e = 0; e < dim; ++e) {
              grad_in[e] += g * vo[e];
              vo[e] += g * vc[e];
            }
          }
          for (int e = 0; e < dim; ++e) vc[e] += grad_in[e];
        }
      }
    }
  }
  for (std::size_t i = 0; i < in.size(); ++i) table.data[i] = static_cast<T>(in[i]);
}

}  // namespace codematch::nn
