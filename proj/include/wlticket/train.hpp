#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "wlticket/errors.hpp"
#include "wlticket/gnn.hpp"
#include "wlticket/graph.hpp"
#include "wlticket/optim.hpp"
#include "wlticket/tensor.hpp"

namespace wlticket {

struct TrainConfig {
  std::size_t epochs = 250;
  std::size_t batch_size = 32;
  AdamConfig adam{};
};

struct TrainResult {
  std::vector<double> loss_trace;  // mean training loss per epoch
};

/// Called after every epoch with (epoch index, model).
using EpochCallback = std::function<void(std::size_t, const GnnModel&)>;

/// Mean loss and gradients over a batch of graphs.
inline Gradients batch_gradients(const GnnModel& model, const Dataset& data,
                                 std::span<const std::size_t> batch) {
  Gradients total = zero_gradients(model);
  for (std::size_t i : batch) {
    const Graph& g = data.graphs[i];
    const auto fp = model.forward(g);
    total.accumulate(model.backward(fp, static_cast<std::size_t>(g.label())));
  }
  total.scale_by(1.0 / static_cast<double>(batch.size()));
  return total;
}

inline std::vector<ParamSlot> parameter_slots(GnnModel& model, const Gradients& g) {
  std::vector<ParamSlot> slots;
  auto& layers = model.layers_mut();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    for (std::size_t j = 0; j < layers[k].mlp.size(); ++j) {
      auto& layer = layers[k].mlp[j];
      slots.push_back({layer.weights_mut().values(), g.weights[k][j].values(), layer.mask().values()});
    }
    if (layers[k].variant == Variant::gin && layers[k].train_epsilon)
      slots.push_back({std::span<double>(&layers[k].epsilon, 1), std::span<const double>(&g.epsilon[k], 1), {}});
  }
  slots.push_back({model.classifier_mut().values(), g.classifier.values(), {}});
  slots.push_back({model.bias_mut().values(), g.bias.values(), {}});
  return slots;
}

/// Mini-batch Adam. Batches come from a fresh shuffle per epoch drawn from
/// `rng`; masked weights never leave 0.
inline TrainResult train(GnnModel& model, const Dataset& data, const TrainConfig& cfg, Rng& rng,
                         const EpochCallback& on_epoch = {}) {
  if (data.empty()) throw DomainError("train: empty dataset");
  if (cfg.batch_size == 0) throw ConfigError("train: batch_size must be positive");
  TrainResult out;
  AdamState state;
  std::vector<std::size_t> order(data.size());
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, end - start);
      Gradients g = batch_gradients(model, data, batch);
      loss_sum += g.loss * static_cast<double>(batch.size());
      auto slots = parameter_slots(model, g);
      adam_step(slots, state, cfg.adam);
      for (auto& l : model.layers_mut())
        for (auto& m : l.mlp) m.enforce_mask();
    }
    out.loss_trace.push_back(loss_sum / static_cast<double>(data.size()));
    if (on_epoch) on_epoch(e, model);
  }
  return out;
}

/// Fraction of graphs whose argmax prediction equals the label.
inline double evaluate(const GnnModel& model, const Dataset& data) {
  if (data.empty()) throw DomainError("evaluate: empty dataset");
  std::size_t hit = 0;
  for (const auto& g : data.graphs) hit += model.predict(g) == static_cast<std::size_t>(g.label());
  return static_cast<double>(hit) / static_cast<double>(data.size());
}

}  // namespace wlticket
