// Static 3-d tree for exact nearest-neighbor queries over a fixed point set.
// Distance ties resolve to the smallest point index, independent of build
// order, so matching results are fully deterministic.
#pragma once

#include <vector>

#include "facegeom/mesh.hpp"

namespace facegeom {

class KdTree3 {
 public:
  KdTree3() = default;
  explicit KdTree3(const std::vector<Vec3>& points);

  int size() const { return int(points_.size()); }

  // Index of the nearest point, -1 when the set is empty.
  int nearest(const Vec3& query) const;

 private:
  struct Node {
    int axis = -1;        // -1 marks a leaf
    double split = 0.0;
    int left = -1, right = -1;
    int begin = 0, end = 0;  // leaf range into order_
  };

  int build(int begin, int end, int depth);
  void search(int node, const Vec3& query, double& best_d2, int& best_idx) const;

  std::vector<Vec3> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace facegeom
