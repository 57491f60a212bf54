#include "ratesmooth/graph.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace ratesmooth {

Matrix AdjacencyGraph::adjacency() const {
  Matrix w = Matrix::Zero(n_areas, n_areas);
  for (const auto& [a, b] : edges) {
    w(a, b) = 1.0;
    w(b, a) = 1.0;
  }
  return w;
}

int AdjacencyGraph::index_of(const std::string& label) const {
  auto it = std::find(labels.begin(), labels.end(), label);
  return it == labels.end() ? -1 : static_cast<int>(it - labels.begin());
}

namespace {

void strip_comment(std::string& line) {
  auto pos = line.find('#');
  if (pos != std::string::npos) line.erase(pos);
}

void finalize(AdjacencyGraph& g) {
  g.n_areas = static_cast<int>(g.labels.size());
  g.degree.assign(g.n_areas, 0);
  for (const auto& [a, b] : g.edges) {
    ++g.degree[a];
    ++g.degree[b];
  }
  // connected components by BFS
  g.component.assign(g.n_areas, -1);
  std::vector<std::vector<int>> nbrs(g.n_areas);
  for (const auto& [a, b] : g.edges) {
    nbrs[a].push_back(b);
    nbrs[b].push_back(a);
  }
  int comp = 0;
  for (int start = 0; start < g.n_areas; ++start) {
    if (g.component[start] >= 0) continue;
    std::vector<int> stack{start};
    g.component[start] = comp;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int u : nbrs[v]) {
        if (g.component[u] < 0) {
          g.component[u] = comp;
          stack.push_back(u);
        }
      }
    }
    ++comp;
  }
  g.n_components = comp;
}

AdjacencyGraph parse_edges(std::istream& in,
                           const std::vector<std::string>& labels,
                           bool collect_labels) {
  AdjacencyGraph g;
  g.labels = labels;
  std::set<std::pair<int, int>> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_comment(line);
    std::istringstream ls(line);
    std::string la, lb;
    if (!(ls >> la)) continue;  // blank
    if (!(ls >> lb))
      throw DataError("edge list line " + std::to_string(lineno) +
                      ": expected two labels");
    std::string extra;
    if (ls >> extra)
      throw DataError("edge list line " + std::to_string(lineno) +
                      ": trailing tokens");
    auto resolve = [&](const std::string& lab) {
      auto it = std::find(g.labels.begin(), g.labels.end(), lab);
      if (it != g.labels.end()) return static_cast<int>(it - g.labels.begin());
      if (!collect_labels)
        throw DataError("edge list line " + std::to_string(lineno) +
                        ": unknown area label '" + lab + "'");
      g.labels.push_back(lab);
      return static_cast<int>(g.labels.size()) - 1;
    };
    int a = resolve(la);
    int b = resolve(lb);
    if (a == b)
      throw DataError("edge list line " + std::to_string(lineno) +
                      ": self-loop on '" + la + "'");
    auto e = std::minmax(a, b);
    if (!seen.insert({e.first, e.second}).second)
      throw DataError("edge list line " + std::to_string(lineno) +
                      ": duplicate edge " + la + " " + lb);
    g.edges.emplace_back(e.first, e.second);
  }
  finalize(g);
  return g;
}

}  // namespace

AdjacencyGraph load_adjacency(std::istream& edge_lines,
                              const std::vector<std::string>& labels) {
  return parse_edges(edge_lines, labels, false);
}

AdjacencyGraph load_adjacency(std::istream& edge_lines) {
  return parse_edges(edge_lines, {}, true);
}

std::vector<std::string> load_area_labels(std::istream& csv) {
  std::vector<std::pair<int, std::string>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(csv, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto comma = line.find(',');
    if (comma == std::string::npos)
      throw DataError("label table line " + std::to_string(lineno) +
                      ": expected index,label");
    std::string idx = line.substr(0, comma);
    std::string lab = line.substr(comma + 1);
    if (lineno == 1 && idx == "index") continue;  // header
    try {
      rows.emplace_back(std::stoi(idx), lab);
    } catch (const std::exception&) {
      throw DataError("label table line " + std::to_string(lineno) +
                      ": bad index '" + idx + "'");
    }
  }
  std::sort(rows.begin(), rows.end());
  std::vector<std::string> labels;
  labels.reserve(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].first != static_cast<int>(i) + 1)
      throw DataError("label table: indices must run 1.." +
                      std::to_string(rows.size()) + " without gaps");
    labels.push_back(rows[i].second);
  }
  return labels;
}

}  // namespace ratesmooth
