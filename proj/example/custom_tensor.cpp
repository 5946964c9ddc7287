// Rank-one matrix with a few large corruptions: recover L and S with the
// weighted tensor RPCA variant and a hand-picked lambda.
#include <cmath>
#include <cstdio>

#include "gloss/gloss.hpp"

int main() {
  using namespace gloss;
  const Shape shape{20, 30};
  DenseTensor truth(shape);
  for (Index j = 0; j < 30; ++j)
    for (Index i = 0; i < 20; ++i) truth(i, j) = std::sin(0.3 * i) * std::cos(0.2 * j);

  DenseTensor y = truth;
  for (Index k = 0; k < 12; ++k) y[(k * 37) % y.size()] += 5.0;

  SolverConfig config = default_hyperparameters(y, SupportSet::full(shape), Variant::whorpca);
  config.psi = {1.0, 1.0};
  config.lambda = 0.5;
  config.max_iters = 2000;
  const DecompositionResult r = solve(y, SupportSet::full(shape), config);

  DenseTensor err = r.low_rank;
  err -= truth;
  std::printf("iterations %d, converged %s\n", r.iterations, r.converged ? "yes" : "no");
  std::printf("relative error of L: %.3e\n", frobenius_norm(err) / frobenius_norm(truth));
  std::printf("nonzeros in S: %lld\n", static_cast<long long>((r.sparse.array().abs() > 1e-6).count()));
}
