#include "cadsig/spatial.hpp"

#include <algorithm>
#include <queue>

namespace cadsig {

namespace {
constexpr int kLeafSize = 12;

struct Candidate {
  double d2;
  int index;
  bool operator<(const Candidate& o) const {
    return d2 < o.d2 || (d2 == o.d2 && index < o.index);
  }
};
}  // namespace

KdTree::KdTree(const Points& points) : points_(points), order_(points.rows()) {
  for (int i = 0; i < static_cast<int>(order_.size()); ++i) order_[i] = i;
  nodes_.reserve(2 * order_.size() / kLeafSize + 2);
  if (!order_.empty()) build(0, static_cast<int>(order_.size()));
}

int KdTree::build(int begin, int end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({begin, end});
  if (end - begin <= kLeafSize) return id;
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(1e300);
  Eigen::Vector3d hi = Eigen::Vector3d::Constant(-1e300);
  for (int i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_.row(order_[i]).transpose());
    hi = hi.cwiseMax(points_.row(order_[i]).transpose());
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const int mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) { return points_(a, axis) < points_(b, axis); });
  nodes_[id].axis = axis;
  nodes_[id].split = points_(order_[mid], axis);
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

int KdTree::nearest(const Eigen::Vector3d& q, double* squared_distance) const {
  std::vector<int> idx;
  std::vector<double> d2;
  knn(q, 1, idx, d2);
  if (squared_distance) *squared_distance = d2.empty() ? 0.0 : d2[0];
  return idx.empty() ? -1 : idx[0];
}

void KdTree::knn(const Eigen::Vector3d& q, int k, std::vector<int>& indices,
                 std::vector<double>& squared_distances) const {
  indices.clear();
  squared_distances.clear();
  k = std::min(k, size());
  if (k <= 0) return;
  std::priority_queue<Candidate> heap;  // max-heap of current best k
  auto worst = [&]() { return heap.size() < static_cast<size_t>(k) ? 1e300 : heap.top().d2; };

  // Iterative depth-first search with the near child visited first.
  struct Frame {
    int node;
    double bound;
  };
  std::vector<Frame> stack;
  stack.push_back({0, 0.0});
  while (!stack.empty()) {
    const Frame f = stack.back();
    stack.pop_back();
    if (f.bound > worst()) continue;
    const Node& n = nodes_[f.node];
    if (n.axis < 0) {
      for (int i = n.begin; i < n.end; ++i) {
        const int p = order_[i];
        const double dx = points_(p, 0) - q.x();
        const double dy = points_(p, 1) - q.y();
        const double dz = points_(p, 2) - q.z();
        const Candidate c{dx * dx + dy * dy + dz * dz, p};
        if (heap.size() < static_cast<size_t>(k)) {
          heap.push(c);
        } else if (c < heap.top()) {
          heap.pop();
          heap.push(c);
        }
      }
      continue;
    }
    const double diff = q[n.axis] - n.split;
    const int near = diff < 0 ? n.left : n.right;
    const int far = diff < 0 ? n.right : n.left;
    stack.push_back({far, diff * diff});
    stack.push_back({near, 0.0});
  }
  indices.resize(heap.size());
  squared_distances.resize(heap.size());
  for (int i = static_cast<int>(heap.size()) - 1; i >= 0; --i) {
    indices[i] = heap.top().index;
    squared_distances[i] = heap.top().d2;
    heap.pop();
  }
}

std::vector<int> knn_graph(const Points& points, int k) {
  const int n = static_cast<int>(points.rows());
  k = std::min(k, n);
  KdTree tree(points);
  std::vector<int> out(static_cast<size_t>(n) * k);
  std::vector<int> idx;
  std::vector<double> d2;
  for (int i = 0; i < n; ++i) {
    tree.knn(points.row(i).transpose(), k, idx, d2);
    std::copy(idx.begin(), idx.end(), out.begin() + static_cast<long>(i) * k);
  }
  return out;
}

}  // namespace cadsig
