#pragma once

#include <vector>

#include <Eigen/Core>

namespace cadsig {

using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Static 3-D k-d tree over a point set. Queries are exact; equal distances are
/// ordered by point index.
class KdTree {
 public:
  explicit KdTree(const Points& points);

  /// Index of the nearest point and its squared distance.
  int nearest(const Eigen::Vector3d& q, double* squared_distance = nullptr) const;

  /// k nearest neighbors ordered by (distance, index). k is clamped to size().
  void knn(const Eigen::Vector3d& q, int k, std::vector<int>& indices,
           std::vector<double>& squared_distances) const;

  int size() const { return static_cast<int>(points_.rows()); }

 private:
  struct Node {
    int begin, end;  // range in order_
    int left = -1, right = -1;
    int axis = -1;  // -1 for leaves
    double split = 0.0;
  };
  int build(int begin, int end);

  Points points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

/// k nearest neighbors of every point (self included as the first entry when
/// distances are unique). Returned row-major, n x k.
std::vector<int> knn_graph(const Points& points, int k);

}  // namespace cadsig
