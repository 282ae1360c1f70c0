#include "gwheat/tree.hpp"

#include <functional>
#include <ostream>
#include <sstream>

#include "gwheat/error.hpp"

namespace gwheat {

VertexId VertexId::parent() const {
  if (path_.empty()) fail(ErrorCode::invalid_input, "the root has no parent");
  return VertexId(std::vector<std::uint32_t>(path_.begin(), path_.end() - 1));
}

VertexId VertexId::child(std::uint32_t index) const {
  auto p = path_;
  p.push_back(index);
  return VertexId(std::move(p));
}

VertexId VertexId::prefix(std::size_t length) const {
  if (length > path_.size()) fail(ErrorCode::invalid_input, "prefix longer than path");
  return VertexId(std::vector<std::uint32_t>(path_.begin(), path_.begin() + length));
}

std::string VertexId::to_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < path_.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(path_[i]);
  }
  return s + "]";
}

std::size_t meet_level(const VertexId& u, const VertexId& v) noexcept {
  const auto a = u.path();
  const auto b = v.path();
  std::size_t n = 0;
  while (n < a.size() && n < b.size() && a[n] == b[n]) ++n;
  return n;
}

LazyTree::LazyTree(OffspringDistribution law, std::uint64_t seed) : seed_(seed) {
  laws_.push_back(std::move(law));
  const std::uint64_t key = root_key(seed);
  nodes_.push_back(Node{key, kNoNode, kNoNode, draw(key, 0), 0, 0, 0});
}

void LazyTree::graft(const VertexId& at, OffspringDistribution law) {
  if (laws_.size() >= 0xffff) fail(ErrorCode::resource_limit, "too many grafted laws");
  const NodeId x = find(at);
  if (expanded(x))
    fail(ErrorCode::invalid_input,
         "graft at " + at.to_string() + " after its subtree was materialized");
  laws_.push_back(std::move(law));
  auto& node = nodes_[static_cast<std::size_t>(x)];
  node.law = static_cast<std::uint16_t>(laws_.size() - 1);
  node.child_count = draw(node.key, node.law);
  for (NodeId y = node.parent; y != kNoNode; y = nodes_[static_cast<std::size_t>(y)].parent)
    nodes_[static_cast<std::size_t>(y)].graft_below = true;
}

void LazyTree::expand(NodeId x) {
  const Node parent = nodes_[static_cast<std::size_t>(x)];
  if (parent.first_child != kNoNode) return;
  const auto first = static_cast<NodeId>(nodes_.size());
  for (std::uint32_t i = 1; i <= parent.child_count; ++i) {
    const std::uint64_t key = child_key(parent.key, i);
    nodes_.push_back(Node{key, x, kNoNode, draw(key, parent.law), parent.depth + 1, i,
                          parent.law});
  }
  nodes_[static_cast<std::size_t>(x)].first_child = first;
}

NodeId LazyTree::child(NodeId x, std::uint32_t index) {
  const auto count = nodes_.at(static_cast<std::size_t>(x)).child_count;
  if (index < 1 || index > count)
    fail(ErrorCode::invalid_input, "child index " + std::to_string(index) +
                                       " out of range 1.." + std::to_string(count));
  expand(x);
  return nodes_[static_cast<std::size_t>(x)].first_child + static_cast<NodeId>(index) - 1;
}

NodeId LazyTree::find(const VertexId& v) {
  NodeId x = root();
  for (const auto i : v.path()) {
    if (i < 1 || i > child_count(x))
      fail(ErrorCode::invalid_input, "invalid vertex " + v.to_string());
    x = child(x, i);
  }
  return x;
}

VertexId LazyTree::path(NodeId x) const {
  std::vector<std::uint32_t> p(depth(x));
  for (NodeId y = x; y != root(); y = parent(y)) p[depth(y) - 1] = index_in_parent(y);
  return VertexId(std::move(p));
}

Cursor LazyTree::cursor(NodeId x) const {
  const Node& n = nodes_.at(static_cast<std::size_t>(x));
  return Cursor{n.key, x, n.law, n.depth};
}

std::uint32_t LazyTree::child_count(const Cursor& c) const noexcept {
  if (c.node != kNoNode) return nodes_[static_cast<std::size_t>(c.node)].child_count;
  return draw(c.key, c.law);
}

Cursor LazyTree::child(const Cursor& c, std::uint32_t index) const noexcept {
  if (c.node != kNoNode) {
    const Node& n = nodes_[static_cast<std::size_t>(c.node)];
    if (n.first_child != kNoNode) return cursor(n.first_child + static_cast<NodeId>(index) - 1);
  }
  return Cursor{child_key(c.key, index), kNoNode, c.law, c.depth + 1};
}

Cursor LazyTree::locate(const VertexId& v) const {
  Cursor c = root_cursor();
  for (const auto i : v.path()) {
    if (i < 1 || i > child_count(c))
      fail(ErrorCode::invalid_input, "invalid vertex " + v.to_string());
    c = child(c, i);
  }
  return c;
}

bool LazyTree::homogeneous_below(const Cursor& c) const noexcept {
  if (c.node != kNoNode && nodes_[static_cast<std::size_t>(c.node)].graft_below) return false;
  return laws_[c.law].degenerate().has_value();
}

std::uint32_t LazyTree::homogeneous_branching(const Cursor& c) const noexcept {
  return homogeneous_below(c) ? *laws_[c.law].degenerate() : 0;
}

std::uint64_t FiniteTree::vertex_count() const noexcept {
  std::uint64_t total = 0;
  for (const auto g : generation_sizes) total += g;
  return total;
}

std::vector<std::uint64_t> FiniteTree::child_offsets(std::size_t level) const {
  const auto& counts = child_counts.at(level);
  std::vector<std::uint64_t> offsets(counts.size() + 1, 0);
  for (std::size_t i = 0; i < counts.size(); ++i) offsets[i + 1] = offsets[i] + counts[i];
  return offsets;
}

FiniteTree truncate(const LazyTree& tree, std::size_t depth, std::uint64_t vertex_cap) {
  FiniteTree ft;
  ft.depth = depth;
  std::vector<Cursor> level{tree.root_cursor()};
  std::uint64_t total = 1;
  for (std::size_t n = 0;; ++n) {
    ft.generation_sizes.push_back(level.size());
    std::vector<std::uint32_t> counts;
    counts.reserve(level.size());
    for (const auto& c : level) counts.push_back(tree.child_count(c));
    ft.child_counts.push_back(std::move(counts));
    if (n == depth) break;
    std::vector<Cursor> next;
    for (const auto& c : level) {
      const auto k = tree.child_count(c);
      total += k;
      if (total > vertex_cap)
        fail(ErrorCode::resource_limit, "truncate: vertex cap " + std::to_string(vertex_cap) +
                                            " exceeded at depth " + std::to_string(n + 1));
      for (std::uint32_t i = 1; i <= k; ++i) next.push_back(tree.child(c, i));
    }
    level = std::move(next);
  }
  return ft;
}

void write_tree_dump(std::ostream& os, const FiniteTree& tree,
                     const std::string& config_hash) {
  os << "{\"config_hash\":\"" << config_hash << "\",\"schema\":\"gwheat.tree/1\",\"depth\":"
     << tree.depth << "}\n";
  std::vector<std::vector<std::uint64_t>> offsets;
  for (std::size_t n = 0; n < tree.depth; ++n) offsets.push_back(tree.child_offsets(n));

  std::vector<std::uint32_t> path;
  std::function<void(std::size_t, std::uint64_t)> visit = [&](std::size_t level,
                                                             std::uint64_t i) {
    const auto k = tree.child_counts[level][i];
    os << "{\"path\":[";
    for (std::size_t j = 0; j < path.size(); ++j) os << (j ? "," : "") << path[j];
    os << "],\"children\":" << k << "}\n";
    if (level == tree.depth) return;
    const auto first = offsets[level][i];
    for (std::uint32_t c = 0; c < k; ++c) {
      path.push_back(c + 1);
      visit(level + 1, first + c);
      path.pop_back();
    }
  };
  visit(0, 0);
}

}  // namespace gwheat
