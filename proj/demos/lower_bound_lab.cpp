// Copyright 2026 The portfolio_lab Authors
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

// Shattering check for the lower-bound family and the empirical gap it
// induces, next to the upper bound for the same kappa.

#include <cmath>
#include <cstdio>
#include <vector>

#include "portfolio_lab/bounds.hpp"

namespace pl = portfolio_lab;

int main() {
  std::printf("kappa  shattered  projection d=1\n");
  for (std::size_t kappa : {2u, 4u, 8u}) {
    const auto fam = pl::lb_construct(kappa);
    std::vector<std::size_t> idx(kappa);
    for (std::size_t i = 0; i < kappa; ++i) idx[i] = i;
    const bool proj = pl::verify_multiclass_shatter(pl::lb_multiclass_projection(fam), idx, 1);
    std::printf("%5zu  %9s  %s\n", kappa, pl::lb_verify_shattering(fam) ? "yes" : "no", proj ? "yes" : "no");
  }

  std::printf("\nkappa      N   mean gap   sqrt(kappa/(2 pi N))   upper bound\n");
  for (std::size_t kappa : {2u, 8u}) {
    for (std::size_t n : {100u, 400u, 1600u}) {
      pl::BoundQuery q;
      q.kappa = kappa;
      q.t = 2;
      q.N = static_cast<double>(n);
      const double pdim = pl::pdim_upper_bound(q);
      std::printf("%5zu %6zu   %.5f    %.5f                %.4f\n", kappa, n, pl::lb_gap_experiment(kappa, n, 2000, 7),
                  std::sqrt(static_cast<double>(kappa) / (2 * M_PI * static_cast<double>(n))),
                  pl::generalization_bound(q, pdim));
    }
  }
  return 0;
}
