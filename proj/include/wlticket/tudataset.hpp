#pragma once

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "wlticket/errors.hpp"
#include "wlticket/graph.hpp"

namespace wlticket {

namespace tu_detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline long long parse_int(std::string_view tok, const std::filesystem::path& file, std::size_t line) {
  tok = trim(tok);
  long long v = 0;
  const auto* first = tok.data();
  const auto* last = tok.data() + tok.size();
  if (!tok.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (tok.empty() || ec != std::errc() || ptr != last) {
    throw DataError(file.filename().string() + ":" + std::to_string(line) +
                    ": expected integer, got '" + std::string(tok) + "'");
  }
  return v;
}

/// One row of comma-separated integers per non-blank line.
inline std::vector<std::vector<long long>> read_rows(const std::filesystem::path& file,
                                                     std::size_t expected_cols) {
  std::ifstream in(file);
  if (!in) throw DataError("missing file: " + file.string());
  std::vector<std::vector<long long>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = trim(line);
    if (sv.empty()) continue;
    std::vector<long long> row;
    std::size_t start = 0;
    while (true) {
      const auto comma = sv.find(',', start);
      row.push_back(parse_int(sv.substr(start, comma == std::string_view::npos ? sv.npos : comma - start),
                              file, lineno));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (row.size() != expected_cols) {
      throw DataError(file.filename().string() + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(expected_cols) + " value(s), got " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace tu_detail

/// Reads `{name}_A.txt`, `{name}_graph_indicator.txt`, `{name}_graph_labels.txt`
/// and (optionally) `{name}_node_labels.txt` from `root`. Node labels become
/// one-hot features over the sorted set of observed labels; without a node
/// label file, node degree is used as the label. Self-loops and edge
/// attributes are dropped; graph labels are remapped to 0..C-1 in sorted order.
inline Dataset parse_tudataset(const std::filesystem::path& root, const std::string& name) {
  namespace fs = std::filesystem;
  const fs::path a_file = root / (name + "_A.txt");
  const fs::path ind_file = root / (name + "_graph_indicator.txt");
  const fs::path gl_file = root / (name + "_graph_labels.txt");
  const fs::path nl_file = root / (name + "_node_labels.txt");

  const auto indicator = tu_detail::read_rows(ind_file, 1);
  const auto graph_labels = tu_detail::read_rows(gl_file, 1);
  const auto edges = tu_detail::read_rows(a_file, 2);

  const std::size_t num_nodes = indicator.size();
  const std::size_t num_graphs = graph_labels.size();
  if (num_graphs == 0) throw DataError(gl_file.filename().string() + ": no graphs");

  // node (0-based global) -> graph (0-based), local index within graph
  std::vector<std::size_t> graph_of(num_nodes), local_of(num_nodes);
  std::vector<std::size_t> graph_size(num_graphs, 0);
  for (std::size_t i = 0; i < num_nodes; ++i) {
    const long long gid = indicator[i][0];
    if (gid < 1 || static_cast<std::size_t>(gid) > num_graphs) {
      throw DataError(ind_file.filename().string() + ":" + std::to_string(i + 1) + ": graph id " +
                      std::to_string(gid) + " outside 1.." + std::to_string(num_graphs));
    }
    graph_of[i] = static_cast<std::size_t>(gid - 1);
    local_of[i] = graph_size[graph_of[i]]++;
  }
  for (std::size_t g = 0; g < num_graphs; ++g) {
    if (graph_size[g] == 0) throw DataError(name + ": graph " + std::to_string(g + 1) + " has no nodes");
  }

  std::vector<std::vector<Edge>> graph_edges(num_graphs);
  std::vector<std::size_t> degree(num_nodes, 0);
  std::vector<std::set<Edge>> seen(num_graphs);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const long long u = edges[e][0];
    const long long v = edges[e][1];
    for (long long x : {u, v}) {
      if (x < 1 || static_cast<std::size_t>(x) > num_nodes) {
        throw DataError(a_file.filename().string() + ":" + std::to_string(e + 1) + ": node " +
                        std::to_string(x) + " outside 1.." + std::to_string(num_nodes));
      }
    }
    const auto gu = static_cast<std::size_t>(u - 1);
    const auto gv = static_cast<std::size_t>(v - 1);
    if (graph_of[gu] != graph_of[gv]) {
      throw DataError(a_file.filename().string() + ":" + std::to_string(e + 1) +
                      ": edge crosses graphs");
    }
    if (gu == gv) continue;
    const std::size_t g = graph_of[gu];
    Edge key{std::min(local_of[gu], local_of[gv]), std::max(local_of[gu], local_of[gv])};
    if (seen[g].insert(key).second) {
      graph_edges[g].push_back(key);
      ++degree[gu];
      ++degree[gv];
    }
  }

  std::vector<long long> raw_node_label(num_nodes);
  if (fs::exists(nl_file)) {
    const auto nl = tu_detail::read_rows(nl_file, 1);
    if (nl.size() != num_nodes) {
      throw DataError(nl_file.filename().string() + ": " + std::to_string(nl.size()) +
                      " labels for " + std::to_string(num_nodes) + " nodes");
    }
    for (std::size_t i = 0; i < num_nodes; ++i) raw_node_label[i] = nl[i][0];
  } else {
    for (std::size_t i = 0; i < num_nodes; ++i) raw_node_label[i] = static_cast<long long>(degree[i]);
  }

  std::map<long long, std::size_t> node_vocab;
  for (long long l : raw_node_label) node_vocab.emplace(l, 0);
  std::size_t idx = 0;
  for (auto& [l, i] : node_vocab) i = idx++;

  std::map<long long, int> class_vocab;
  for (const auto& r : graph_labels) class_vocab.emplace(r[0], 0);
  int cidx = 0;
  for (auto& [l, i] : class_vocab) i = cidx++;

  Dataset ds{name, {}, class_vocab.size(), node_vocab.size()};
  std::vector<std::vector<std::size_t>> labels(num_graphs);
  for (std::size_t g = 0; g < num_graphs; ++g) labels[g].reserve(graph_size[g]);
  for (std::size_t i = 0; i < num_nodes; ++i) labels[graph_of[i]].push_back(node_vocab.at(raw_node_label[i]));

  ds.graphs.reserve(num_graphs);
  for (std::size_t g = 0; g < num_graphs; ++g) {
    ds.graphs.push_back(Graph::from_labels(graph_size[g], graph_edges[g], labels[g], ds.feature_dim,
                                           class_vocab.at(graph_labels[g][0])));
  }
  ds.validate();
  return ds;
}

/// Writes the dataset in TUDataset format: every undirected edge in both
/// directions, one-hot argmax as the node label, class index as graph label.
inline void write_tudataset(const Dataset& ds, const std::filesystem::path& root, const std::string& name) {
  namespace fs = std::filesystem;
  fs::create_directories(root);
  std::ofstream a(root / (name + "_A.txt"), std::ios::binary);
  std::ofstream ind(root / (name + "_graph_indicator.txt"), std::ios::binary);
  std::ofstream gl(root / (name + "_graph_labels.txt"), std::ios::binary);
  std::ofstream nl(root / (name + "_node_labels.txt"), std::ios::binary);
  if (!a || !ind || !gl || !nl) throw DataError("cannot write dataset files under " + root.string());

  std::size_t offset = 1;
  for (std::size_t g = 0; g < ds.graphs.size(); ++g) {
    const Graph& gr = ds.graphs[g];
    for (std::size_t u = 0; u < gr.node_count(); ++u) {
      for (std::size_t v : gr.neighbors(u)) a << (offset + u) << ", " << (offset + v) << '\n';
    }
    const auto labels = gr.node_labels();
    for (std::size_t v = 0; v < gr.node_count(); ++v) {
      ind << (g + 1) << '\n';
      nl << labels[v] << '\n';
    }
    gl << gr.label() << '\n';
    offset += gr.node_count();
  }
}

}  // namespace wlticket
