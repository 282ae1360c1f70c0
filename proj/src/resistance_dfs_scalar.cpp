#include "resistance_dfs.hpp"

namespace gwheat::detail {

namespace {

struct ScalarOps {
  using V = std::array<double, 4>;

  static V zero() { return {0.0, 0.0, 0.0, 0.0}; }
  static V closure(double hi) { return {0.0, 0.0, 0.0, hi}; }
  static V set(double a, double b, double c, double d) { return {a, b, c, d}; }
  static V add_branch(V acc, const V& r, double lambda) {
    for (int l = 0; l < 4; ++l) acc[l] = acc[l] + 1.0 / (1.0 + lambda * r[l]);
    return acc;
  }
  static V reciprocal(const V& acc) {
    return {1.0 / acc[0], 1.0 / acc[1], 1.0 / acc[2], 1.0 / acc[3]};
  }
  static V ground_lanes(V r, unsigned active) {
    if (!(active & 2u)) r[1] = 0.0;
    if (!(active & 4u)) r[2] = 0.0;
    return r;
  }
  static std::array<double, 4> store(const V& v) { return v; }
};

}  // namespace

DfsResult resistance_dfs_scalar(const LazyTree& tree, const Cursor& start, const DfsConfig& cfg) {
  return ResistanceDfs<ScalarOps>(tree, cfg).run(start);
}

}  // namespace gwheat::detail
