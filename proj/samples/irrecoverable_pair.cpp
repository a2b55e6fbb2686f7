// Two labelings of the same path: a first-layer mask that removes the rows
// carrying the label difference makes the pair inseparable for any weights.
#include <cstdio>
#include <numeric>

#include "wlticket/expressivity.hpp"
#include "wlticket/pruning.hpp"
#include "wlticket/synthetic.hpp"

using namespace wlticket;

int main() {
  const Graph a = synthetic::sifdg_path(false, 0);
  const Graph b = synthetic::sifdg_path(true, 1);
  std::vector<std::size_t> id(a.node_count());
  std::iota(id.begin(), id.end(), std::size_t{0});

  ModelSpec spec;
  spec.input_dim = 3;
  spec.hidden = 4;
  GnnModel model = GnnModel::init(spec, Rng(1, 0));
  MaskSet masks = model.masks();
  Matrix& first = masks.layers[0][0];
  for (std::size_t c = 0; c < first.cols(); ++c) first(0, c) = first(1, c) = 0.0;
  model = model.with_masks(masks);

  std::printf("1-WL distinguishes the pair: %s\n", wl_distinguishable(a, b, 2) ? "yes" : "no");
  std::printf("mask is irrecoverable: %s\n", is_irrecoverable_first_layer(a, b, id, first) ? "yes" : "no");
  const auto ra = model.forward(a).readout;
  const auto rb = model.forward(b).readout;
  std::printf("readout max |diff| = %.3g\n", max_abs(subtract(ra, rb).values()));
}
