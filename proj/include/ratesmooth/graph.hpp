#pragma once

#include <istream>
#include <string>
#include <utility>
#include <vector>

#include "ratesmooth/types.hpp"

namespace ratesmooth {

/// Undirected area adjacency graph. Edges are stored once with a < b.
struct AdjacencyGraph {
  int n_areas = 0;
  std::vector<std::pair<int, int>> edges;
  std::vector<std::string> labels;
  std::vector<int> degree;     // neighbour count per area
  std::vector<int> component;  // connected-component id per area, 0-based
  int n_components = 0;

  Matrix adjacency() const;  // binary W
  int index_of(const std::string& label) const;  // -1 if unknown
};

/// Parse "labelA labelB" edge lines ('#' starts a comment). Labels must come
/// from `labels`; self-loops and duplicate edges are rejected with the
/// offending line number.
AdjacencyGraph load_adjacency(std::istream& edge_lines,
                              const std::vector<std::string>& labels);

/// Same, collecting labels from the edge list in first-appearance order.
AdjacencyGraph load_adjacency(std::istream& edge_lines);

/// Read an "index,label" CSV (header optional) into a label vector ordered by
/// index, which must be 1..n without gaps.
std::vector<std::string> load_area_labels(std::istream& csv);

}  // namespace ratesmooth
