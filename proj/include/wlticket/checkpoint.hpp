#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wlticket/errors.hpp"
#include "wlticket/gnn.hpp"
#include "wlticket/pruning.hpp"

namespace wlticket {

/// Model checkpoints are JSON:
///   {"format": "wlticket-model", "version": 1, "activation": ..., "layers": [
///     {"variant", "epsilon", "train_epsilon", "mlp": [{"rows", "cols", "weights", "mask"}]}],
///    "classifier": {"rows", "cols", "values"}, "bias": {...}}
/// Weights are 64-bit doubles printed with round-trip precision; "mask" is
/// the bit-packed mask (row-major, LSB first) as lowercase hex.
inline constexpr int kCheckpointVersion = 1;

namespace checkpoint_detail {
using nlohmann::json;

inline std::string to_hex(const std::vector<std::uint8_t>& bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 0xF]);
  }
  return s;
}

inline std::vector<std::uint8_t> from_hex(const std::string& s) {
  if (s.size() % 2 != 0) throw DataError("checkpoint: odd-length hex mask");
  auto nibble = [](char c) -> std::uint8_t {
    if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
    throw DataError("checkpoint: bad hex digit in mask");
  };
  std::vector<std::uint8_t> out(s.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint8_t>((nibble(s[2 * i]) << 4) | nibble(s[2 * i + 1]));
  return out;
}

inline json matrix_json(const Matrix& m) {
  return json{{"rows", m.rows()}, {"cols", m.cols()},
              {"values", std::vector<double>(m.values().begin(), m.values().end())}};
}

inline Matrix matrix_from(const json& j) {
  const auto r = j.at("rows").get<std::size_t>();
  const auto c = j.at("cols").get<std::size_t>();
  auto v = j.at("values").get<std::vector<double>>();
  if (v.size() != r * c) throw DataError("checkpoint: matrix size mismatch");
  return Matrix(r, c, std::move(v));
}
}  // namespace checkpoint_detail

inline nlohmann::json model_to_json(const GnnModel& model) {
  using namespace checkpoint_detail;
  json layers = json::array();
  for (const auto& l : model.layers()) {
    json mlp = json::array();
    for (const auto& w : l.mlp) {
      mlp.push_back({{"rows", w.in()},
                     {"cols", w.out()},
                     {"weights", std::vector<double>(w.weights().values().begin(), w.weights().values().end())},
                     {"mask", to_hex(pack_bits(w.mask()))}});
    }
    layers.push_back({{"variant", std::string(to_string(l.variant))},
                      {"epsilon", l.epsilon},
                      {"train_epsilon", l.train_epsilon},
                      {"mlp", std::move(mlp)}});
  }
  return json{{"format", "wlticket-model"},
              {"version", kCheckpointVersion},
              {"activation", std::string(to_string(model.activation()))},
              {"layers", std::move(layers)},
              {"classifier", matrix_json(model.classifier())},
              {"bias", matrix_json(model.bias())}};
}

inline GnnModel model_from_json(const nlohmann::json& j) {
  using namespace checkpoint_detail;
  try {
    if (j.at("format").get<std::string>() != "wlticket-model") throw DataError("checkpoint: wrong format tag");
    if (j.at("version").get<int>() != kCheckpointVersion) throw DataError("checkpoint: unsupported version");
    std::vector<MpLayer> layers;
    for (const auto& lj : j.at("layers")) {
      MpLayer l;
      l.variant = parse_variant(lj.at("variant").get<std::string>());
      l.epsilon = lj.at("epsilon").get<double>();
      l.train_epsilon = lj.at("train_epsilon").get<bool>();
      for (const auto& mj : lj.at("mlp")) {
        const auto r = mj.at("rows").get<std::size_t>();
        const auto c = mj.at("cols").get<std::size_t>();
        auto w = mj.at("weights").get<std::vector<double>>();
        if (w.size() != r * c) throw DataError("checkpoint: weight size mismatch");
        l.mlp.emplace_back(Matrix(r, c, std::move(w)), unpack_bits(r, c, from_hex(mj.at("mask").get<std::string>())));
      }
      layers.push_back(std::move(l));
    }
    return GnnModel(parse_activation(j.at("activation").get<std::string>()), std::move(layers),
                    matrix_from(j.at("classifier")), matrix_from(j.at("bias")));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  } catch (const DomainError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

inline void save_model(const std::filesystem::path& p, const GnnModel& model) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw DataError("cannot write " + p.string());
  os << model_to_json(model).dump(1) << '\n';
}

inline GnnModel load_model(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw DataError("cannot read " + p.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(p.string() + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace wlticket
