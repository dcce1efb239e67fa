#include "facegeom/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace facegeom {

namespace {
constexpr int kLeafSize = 8;
}

KdTree3::KdTree3(const std::vector<Vec3>& points) : points_(points) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0);
  if (!points_.empty()) root_ = build(0, int(points_.size()), 0);
}

int KdTree3::build(int begin, int end, int depth) {
  Node node;
  if (end - begin <= kLeafSize) {
    node.begin = begin;
    node.end = end;
    nodes_.push_back(node);
    return int(nodes_.size()) - 1;
  }
  // Split on the widest axis of the range's bounding box.
  Vec3 lo = points_[order_[begin]], hi = lo;
  for (int k = begin + 1; k < end; ++k) {
    lo = lo.cwiseMin(points_[order_[k]]);
    hi = hi.cwiseMax(points_[order_[k]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const int mid = (begin + end) / 2;
  // Index tie-break keeps the layout independent of input permutation quirks.
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     const double pa = points_[a][axis], pb = points_[b][axis];
                     return pa < pb || (pa == pb && a < b);
                   });
  node.axis = axis;
  node.split = points_[order_[mid]][axis];
  const int self = int(nodes_.size());
  nodes_.push_back(node);
  const int left = build(begin, mid, depth + 1);
  const int right = build(mid, end, depth + 1);
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

void KdTree3::search(int node_idx, const Vec3& query, double& best_d2,
                     int& best_idx) const {
  const Node& node = nodes_[node_idx];
  if (node.axis < 0) {
    for (int k = node.begin; k < node.end; ++k) {
      const int idx = order_[k];
      const double d2 = (points_[idx] - query).squaredNorm();
      if (d2 < best_d2 || (d2 == best_d2 && idx < best_idx)) {
        best_d2 = d2;
        best_idx = idx;
      }
    }
    return;
  }
  const double diff = query[node.axis] - node.split;
  const int near = diff < 0.0 ? node.left : node.right;
  const int far = diff < 0.0 ? node.right : node.left;
  search(near, query, best_d2, best_idx);
  // <= keeps equal-distance candidates reachable so index ties stay exact.
  if (diff * diff <= best_d2) search(far, query, best_d2, best_idx);
}

int KdTree3::nearest(const Vec3& query) const {
  if (root_ < 0) return -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  int best_idx = -1;
  search(root_, query, best_d2, best_idx);
  return best_idx;
}

}  // namespace facegeom
