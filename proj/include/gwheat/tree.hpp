#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "gwheat/hash.hpp"
#include "gwheat/offspring.hpp"

namespace gwheat {

// Address of a vertex: the 1-based child indices along the path from the
// root. The empty path is the root.
class VertexId {
 public:
  VertexId() = default;
  explicit VertexId(std::vector<std::uint32_t> path) : path_(std::move(path)) {}
  VertexId(std::initializer_list<std::uint32_t> path) : path_(path) {}

  static VertexId root() { return {}; }

  std::size_t height() const noexcept { return path_.size(); }
  bool is_root() const noexcept { return path_.empty(); }
  std::span<const std::uint32_t> path() const noexcept { return path_; }

  VertexId parent() const;
  VertexId child(std::uint32_t index) const;
  VertexId prefix(std::size_t length) const;

  std::string to_string() const;  // "[1,2,1]"

  auto operator<=>(const VertexId&) const = default;
  bool operator==(const VertexId&) const = default;

 private:
  std::vector<std::uint32_t> path_;
};

// Length of the longest common prefix of u and v.
std::size_t meet_level(const VertexId& u, const VertexId& v) noexcept;

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

// Lightweight handle used for traversals that should not grow the memo.
// `node` is set while the cursor walks through materialized vertices.
struct Cursor {
  std::uint64_t key = 0;
  NodeId node = kNoNode;
  std::uint16_t law = 0;
  std::uint32_t depth = 0;
};

// Reproducible, lazily expanded Galton-Watson tree.
//
// The child count of a vertex is a pure function of (seed, path) through the
// key stream documented in hash.hpp. Materialized vertices live in an arena
// (the memo); traversals that do not need to remember anything use Cursor
// and recompute keys on the fly, which yields identical counts.
//
// Subtrees may be grafted onto a different offspring law (used to build
// fixtures such as a binary and a ternary branch under one root).
class LazyTree {
 public:
  LazyTree(OffspringDistribution law, std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }
  const OffspringDistribution& law(std::uint16_t id = 0) const { return laws_.at(id); }
  std::size_t law_count() const noexcept { return laws_.size(); }

  // Every vertex in the subtree of `at` (including `at`) draws its child
  // count from `law`. Must be called before anything below `at` is read.
  void graft(const VertexId& at, OffspringDistribution law);

  // Materialized access --------------------------------------------------
  NodeId root() const noexcept { return 0; }
  NodeId child(NodeId x, std::uint32_t index);  // 1-based, expands x
  NodeId find(const VertexId& v);                // materializes the path
  NodeId parent(NodeId x) const { return nodes_.at(x).parent; }
  std::uint32_t child_count(NodeId x) const { return nodes_.at(x).child_count; }
  std::uint32_t depth(NodeId x) const { return nodes_.at(x).depth; }
  std::uint32_t index_in_parent(NodeId x) const { return nodes_.at(x).index; }
  bool expanded(NodeId x) const { return nodes_.at(x).first_child != kNoNode; }
  VertexId path(NodeId x) const;
  std::size_t materialized() const noexcept { return nodes_.size(); }

  // Cursor access (never grows the memo) ----------------------------------
  Cursor cursor(NodeId x) const;
  Cursor root_cursor() const { return cursor(root()); }
  std::uint32_t child_count(const Cursor& c) const noexcept;
  Cursor child(const Cursor& c, std::uint32_t index) const noexcept;
  // Cursor for an arbitrary vertex; throws on an invalid path.
  Cursor locate(const VertexId& v) const;

  // True when every vertex below `c` has the same point-mass offspring law,
  // so all subtrees at equal depth are isomorphic.
  bool homogeneous_below(const Cursor& c) const noexcept;
  // The common child count below `c` when homogeneous_below(c), else 0.
  std::uint32_t homogeneous_branching(const Cursor& c) const noexcept;

 private:
  struct Node {
    std::uint64_t key;
    NodeId parent;
    NodeId first_child;
    std::uint32_t child_count;
    std::uint32_t depth;
    std::uint32_t index;
    std::uint16_t law;
    bool graft_below = false;  // some strict descendant was grafted
  };

  std::uint32_t draw(std::uint64_t key, std::uint16_t law) const noexcept {
    return laws_[law].sample(key_uniform(key));
  }
  void expand(NodeId x);

  std::vector<OffspringDistribution> laws_;
  std::vector<Node> nodes_;
  std::uint64_t seed_;
};

// Tree materialized to a fixed depth, stored level by level.
struct FiniteTree {
  std::size_t depth = 0;
  // child_counts[n][i] = number of children of the i-th vertex of level n,
  // vertices ordered lexicographically by path within the level.
  std::vector<std::vector<std::uint32_t>> child_counts;
  std::vector<std::uint64_t> generation_sizes;  // xi_0 .. xi_depth

  std::uint64_t vertex_count() const noexcept;
  // Offset of the first child of vertex i of level n within level n+1.
  std::vector<std::uint64_t> child_offsets(std::size_t level) const;
};

FiniteTree truncate(const LazyTree& tree, std::size_t depth,
                    std::uint64_t vertex_cap = 20'000'000);

// JSON lines, one {"path":[...],"children":k} per vertex, sorted
// lexicographically by path. The first line is a metadata record.
void write_tree_dump(std::ostream& os, const FiniteTree& tree,
                     const std::string& config_hash);

}  // namespace gwheat
