#pragma once

#include <cstdint>
#include <vector>

#include "muse/graph_io.hpp"

namespace muse::tools {

/// Stochastic block model: `classes` blocks of `per_block` nodes in block order.
/// Edge (i, j) for i < j appears with probability p_in inside a block, p_out
/// across. Feature j of a class-c node is [j mod classes == c] + noise·N(0, 1).
struct SbmOptions {
  int classes = 4;
  std::size_t per_block = 100;
  double p_in = 0.1;
  double p_out = 0.01;
  std::size_t feat_dim = 16;
  double feat_noise = 4.0;
  std::uint64_t seed = 0;
};

/// Throws ConfigError on probabilities outside [0, 1] or empty dimensions.
GraphDataset make_sbm(const SbmOptions& opts);

/// Noiseless S-curve in ℝ³: t = 3π(u − ½), (sin t, width·v, sign(t)(cos t − 1)),
/// u, v uniform. width 0 gives a 1-D curve; width 2 gives the usual S-surface.
/// No edges, a single class. `param` receives t per node.
GraphDataset make_scurve(std::size_t points, std::uint64_t seed, std::vector<double>* param,
                         double width = 0.0);

/// Points evenly spaced on the unit circle (angle 2πi/n); no edges, one class.
GraphDataset make_circle(std::size_t points);

}  // namespace muse::tools
