#include "mirror_em/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "mirror_em/errors.hpp"

namespace mirror_em {

SyntheticDraw generate_synthetic(const SyntheticSpec& spec) {
  if (spec.k < 1) throw ConfigError("generate_synthetic: k must be >= 1");
  if (spec.dim < 1) throw ConfigError("generate_synthetic: dim must be >= 1");
  if (spec.n < 1) throw ConfigError("generate_synthetic: n must be >= 1");
  if (spec.kind != "gmm" && spec.kind != "gmm_fixed_var" && spec.kind != "bmm") {
    throw ConfigError("generate_synthetic: unknown kind '" + spec.kind + "'");
  }
  if (!(spec.separation >= 0.0) || !std::isfinite(spec.separation)) {
    throw ConfigError("generate_synthetic: separation must be finite and >= 0");
  }

  Rng rng(spec.seed);
  SyntheticDraw out;
  out.true_weights = Vec::Constant(spec.k, 1.0 / static_cast<double>(spec.k));
  out.true_centers = Mat::Zero(spec.k, spec.dim);
  out.true_labels.resize(spec.n);

  const bool bernoulli = spec.kind == "bmm";
  if (bernoulli) {
    const double contrast = std::min(0.45, 0.05 * spec.separation);
    for (Eigen::Index j = 0; j < spec.k; ++j)
      for (Eigen::Index d = 0; d < spec.dim; ++d)
        out.true_centers(j, d) = 0.5 + ((d % spec.k == j) ? contrast : -contrast);
  } else {
    for (Eigen::Index j = 0; j < spec.k; ++j)
      out.true_centers(j, 0) = spec.separation * static_cast<double>(j);
  }

  Mat rows(spec.n, spec.dim);
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    const Eigen::Index label = static_cast<Eigen::Index>(rng.below(spec.k));
    out.true_labels[i] = static_cast<int>(label);
    for (Eigen::Index d = 0; d < spec.dim; ++d) {
      if (bernoulli) {
        rows(i, d) = rng.uniform() < out.true_centers(label, d) ? 1.0 : 0.0;
      } else {
        rows(i, d) = out.true_centers(label, d) + rng.normal();
      }
    }
  }
  std::vector<std::string> names;
  for (Eigen::Index d = 0; d < spec.dim; ++d) names.push_back("x" + std::to_string(d));
  out.data = make_dataset(std::move(rows), std::move(names));
  return out;
}

}  // namespace mirror_em
