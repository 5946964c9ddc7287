// Generates a small synthetic city, runs every variant and prints the AUC of
// the elliptic-envelope and LOF scores on the sparse part.
#include <cstdio>

#include "gloss/gloss.hpp"

int main() {
  using namespace gloss;
  SyntheticSpec spec;
  spec.zones = 12;
  spec.weeks = 16;
  spec.n_events = 60;
  spec.seed = 7;
  const SyntheticInstance inst = generate(spec);
  const DenseTensor observed = project(inst.y, inst.omega);

  std::printf("%-8s %8s %8s %6s\n", "variant", "EE", "LOF", "iters");
  for (Variant v : {Variant::gloss, Variant::loss, Variant::whorpca, Variant::horpca}) {
    SolverConfig config = default_hyperparameters(inst.y, inst.omega, v);
    std::vector<ModeGraph> graphs;
    if (v == Variant::gloss) graphs = build_all_mode_graphs(observed, 10);
    const DecompositionResult r = solve(inst.y, inst.omega, config, graphs);

    const double ee = roc_auc(score_tensor(r.sparse, ScoreMethod::elliptic_envelope), inst.labels).auc;
    const double lof = roc_auc(score_tensor(r.sparse, ScoreMethod::lof), inst.labels).auc;
    std::printf("%-8s %8.4f %8.4f %6d\n", std::string(to_string(v)).c_str(), ee, lof, r.iterations);
  }
}
