#pragma once

#include <string>

#include "mirror_em/dataset.hpp"

namespace mirror_em {

// Seeded synthetic mixture draws for experiments. `separation` is measured in
// units of the component scale: Gaussian components sit `separation` standard
// deviations apart along the first axis; Bernoulli prototypes get coordinate
// probabilities 0.5 +- min(0.45, 0.05 * separation).
struct SyntheticSpec {
  std::string kind = "gmm";  // gmm | gmm_fixed_var | bmm
  Eigen::Index k = 2;
  Eigen::Index dim = 1;
  Eigen::Index n = 200;
  double separation = 3.0;
  std::uint64_t seed = 1;
};

struct SyntheticDraw {
  Dataset data;
  Vec true_weights;
  Mat true_centers;       // k x dim component means / prototype probabilities
  std::vector<int> true_labels;
};

SyntheticDraw generate_synthetic(const SyntheticSpec& spec);

}  // namespace mirror_em
