#include "mvcar/areal_graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mvcar/errors.hpp"

namespace mvcar {

ArealGraph::ArealGraph(int n_regions, std::span<const std::pair<int, int>> edges_one_based,
                       std::vector<std::string> region_labels)
    : n_regions_(n_regions), labels_(std::move(region_labels)) {
  if (n_regions < 1) throw ValidationError("graph must have at least one region");
  if (!labels_.empty() && static_cast<int>(labels_.size()) != n_regions)
    throw ValidationError("region label count does not match number of regions");

  edges_.reserve(edges_one_based.size());
  for (auto [i, j] : edges_one_based) {
    if (i < 1 || i > n_regions || j < 1 || j > n_regions)
      throw ValidationError("edge (" + std::to_string(i) + ", " + std::to_string(j) +
                            ") has an endpoint outside [1, " + std::to_string(n_regions) + "]");
    if (i == j) throw ValidationError("self-loop on region " + std::to_string(i));
    edges_.push_back({std::min(i, j) - 1, std::max(i, j) - 1});
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());

  neighbors_.assign(n_regions, {});
  for (const auto& e : edges_) {
    neighbors_[e.a].push_back(e.b);
    neighbors_[e.b].push_back(e.a);
  }
  for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());
}

bool ArealGraph::has_isolated_regions() const {
  return std::any_of(neighbors_.begin(), neighbors_.end(),
                     [](const auto& nb) { return nb.empty(); });
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

bool parse_int(std::string_view token, int& out) {
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

ArealGraph parse_edge_list(std::istream& in) {
  std::string line;
  int line_no = 0;
  int n_regions = -1;
  std::vector<std::pair<int, int>> edges;

  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;

    if (n_regions < 0) {
      constexpr std::string_view key = "regions:";
      if (view.substr(0, key.size()) != key)
        throw ParseError("expected header 'regions: <I>'", line_no);
      int n = 0;
      if (!parse_int(trim(view.substr(key.size())), n) || n < 1)
        throw ParseError("region count must be a positive integer", line_no);
      n_regions = n;
      continue;
    }

    std::istringstream fields{std::string(view)};
    std::string a, b, extra;
    int i = 0, j = 0;
    if (!(fields >> a >> b) || (fields >> extra) || !parse_int(a, i) || !parse_int(b, j))
      throw ParseError("expected 'i j' with two integer region ids", line_no);
    if (i < 1 || j < 1 || i > n_regions || j > n_regions)
      throw ValidationError("line " + std::to_string(line_no) + ": region id out of range [1, " +
                            std::to_string(n_regions) + "]");
    if (i == j)
      throw ValidationError("line " + std::to_string(line_no) + ": self-loop on region " +
                            std::to_string(i));
    edges.emplace_back(i, j);
  }
  if (n_regions < 0) throw ParseError("missing 'regions: <I>' header");
  return ArealGraph(n_regions, edges);
}

ArealGraph load_edge_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open adjacency file " + path.string());
  return parse_edge_list(in);
}

std::vector<int> neighbor_counts(const ArealGraph& g) {
  std::vector<int> counts(g.n_regions());
  for (int i = 0; i < g.n_regions(); ++i) counts[i] = static_cast<int>(g.neighbors()[i].size());
  return counts;
}

SparseSym adjacency_matrix(const ArealGraph& g) {
  std::vector<Triplet> t;
  t.reserve(2 * g.n_edges());
  for (const auto& e : g.edges()) {
    t.emplace_back(e.a, e.b, 1.0);
    t.emplace_back(e.b, e.a, 1.0);
  }
  return SparseSym::from_triplets(g.n_regions(), t);
}

Components connected_components(const ArealGraph& g) {
  Components out;
  out.labels.assign(g.n_regions(), 0);
  std::vector<int> stack;
  for (int start = 0; start < g.n_regions(); ++start) {
    if (out.labels[start] != 0) continue;
    const int label = ++out.count;
    out.labels[start] = label;
    stack.push_back(start);
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int w : g.neighbors()[v]) {
        if (out.labels[w] == 0) {
          out.labels[w] = label;
          stack.push_back(w);
        }
      }
    }
  }
  return out;
}

}  // namespace mvcar
