#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include "wlticket/graph.hpp"
#include "wlticket/isomorphism.hpp"
#include "wlticket/wl.hpp"

namespace wlticket {

/// Partition of a dataset into (labeled) isomorphism types.
struct IsomorphismTypes {
  std::vector<std::size_t> representatives;  // first graph index of each type
  std::vector<std::size_t> multiplicity;     // graphs per type, parallel to representatives
  std::vector<std::size_t> type_of;          // per graph: index into representatives
  bool approximate = false;                  // some WL class was not split by exact search

  std::size_t type_count() const noexcept { return representatives.size(); }
};

/// Groups graphs by labeled 1-WL color multiset after joint refinement
/// (at most `t` iterations), then splits every WL class whose graphs all have
/// at most `node_cap` nodes by exact labeled isomorphism. Larger classes stay
/// grouped by WL only and set `approximate`.
inline IsomorphismTypes isomorphism_type_representatives(const Dataset& ds, std::size_t t = kUnbounded,
                                                         std::size_t node_cap = kDefaultNodeCap) {
  IsomorphismTypes out;
  out.type_of.assign(ds.size(), 0);
  const auto sig = wl_signatures(ds, t, true);

  std::map<std::vector<std::size_t>, std::vector<std::size_t>> wl_classes;
  std::vector<const std::vector<std::size_t>*> first_seen;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto [it, inserted] = wl_classes.try_emplace(sig[i]);
    if (inserted) first_seen.push_back(&it->first);
    it->second.push_back(i);
  }

  // Deterministic order: WL classes by first member index.
  for (const auto* key : first_seen) {
    const auto& members = wl_classes.at(*key);
    bool exact = true;
    for (std::size_t i : members)
      if (ds.graphs[i].node_count() > node_cap) exact = false;

    if (!exact || members.size() == 1) {
      if (members.size() > 1) out.approximate = true;
      const std::size_t type = out.representatives.size();
      out.representatives.push_back(members.front());
      out.multiplicity.push_back(members.size());
      for (std::size_t i : members) out.type_of[i] = type;
      continue;
    }
    std::vector<std::size_t> local_types;  // indices into out.representatives
    for (std::size_t i : members) {
      bool placed = false;
      for (std::size_t type : local_types) {
        if (isomorphic(ds.graphs[out.representatives[type]], ds.graphs[i], true)) {
          out.type_of[i] = type;
          ++out.multiplicity[type];
          placed = true;
          break;
        }
      }
      if (!placed) {
        const std::size_t type = out.representatives.size();
        out.representatives.push_back(i);
        out.multiplicity.push_back(1);
        out.type_of[i] = type;
        local_types.push_back(type);
      }
    }
  }
  return out;
}

}  // namespace wlticket
