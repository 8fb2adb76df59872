#include <cstdint>
#include <algorithm>
#include <vector>

#include "xsslab/oracle.hpp"

namespace xsslab::oracle {
namespace {

// Postorder view of a tree: labels, leftmost-leaf index per node, keyroots.
struct Postorder {
  std::vector<const NodeLabel*> labels;
  std::vector<std::size_t> leftmost;
  std::vector<std::size_t> keyroots;
};

std::size_t visit(const ElementTree& tree, std::size_t idx, Postorder& po) {
  std::size_t first_leaf = SIZE_MAX;
  for (std::size_t child : tree.nodes[idx].children) {
    const std::size_t leaf = visit(tree, child, po);
    if (first_leaf == SIZE_MAX) first_leaf = leaf;
  }
  const std::size_t self = po.labels.size();
  po.labels.push_back(&tree.nodes[idx].label);
  po.leftmost.push_back(first_leaf == SIZE_MAX ? self : first_leaf);
  return po.leftmost.back();
}

Postorder postorder(const ElementTree& tree) {
  Postorder po;
  if (tree.empty()) return po;
  visit(tree, 0, po);
  // Keyroots: nodes with no later node sharing their leftmost leaf.
  std::vector<bool> seen(po.labels.size(), false);
  for (std::size_t i = po.labels.size(); i-- > 0;) {
    if (!seen[po.leftmost[i]]) {
      po.keyroots.push_back(i);
      seen[po.leftmost[i]] = true;
    }
  }
  std::sort(po.keyroots.begin(), po.keyroots.end());
  return po;
}

}  // namespace

std::size_t tree_edit_distance(const ElementTree& a, const ElementTree& b) {
  const Postorder pa = postorder(a);
  const Postorder pb = postorder(b);
  const std::size_t n = pa.labels.size();
  const std::size_t m = pb.labels.size();
  if (n == 0) return m;
  if (m == 0) return n;

  std::vector<std::size_t> treedist(n * m, 0);
  std::vector<std::size_t> forest((n + 1) * (m + 1), 0);
  auto fd = [&](std::size_t i, std::size_t j) -> std::size_t& { return forest[i * (m + 1) + j]; };

  for (std::size_t i : pa.keyroots) {
    for (std::size_t j : pb.keyroots) {
      const std::size_t li = pa.leftmost[i];
      const std::size_t lj = pb.leftmost[j];
      // Forest indices are offset by one: row r stands for nodes li..li+r-1.
      const std::size_t rows = i - li + 1;
      const std::size_t cols = j - lj + 1;
      fd(0, 0) = 0;
      for (std::size_t r = 1; r <= rows; ++r) fd(r, 0) = fd(r - 1, 0) + 1;
      for (std::size_t c = 1; c <= cols; ++c) fd(0, c) = fd(0, c - 1) + 1;
      for (std::size_t r = 1; r <= rows; ++r) {
        for (std::size_t c = 1; c <= cols; ++c) {
          const std::size_t x = li + r - 1;
          const std::size_t y = lj + c - 1;
          const std::size_t del = fd(r - 1, c) + 1;
          const std::size_t ins = fd(r, c - 1) + 1;
          if (pa.leftmost[x] == li && pb.leftmost[y] == lj) {
            const std::size_t relabel = fd(r - 1, c - 1) + (*pa.labels[x] == *pb.labels[y] ? 0 : 1);
            fd(r, c) = std::min({del, ins, relabel});
            treedist[x * m + y] = fd(r, c);
          } else {
            const std::size_t pr = pa.leftmost[x] - li;
            const std::size_t pc = pb.leftmost[y] - lj;
            fd(r, c) = std::min({del, ins, fd(pr, pc) + treedist[x * m + y]});
          }
        }
      }
    }
  }
  return treedist[(n - 1) * m + (m - 1)];
}

}  // namespace xsslab::oracle
