// kdtree.hpp - k-d tree for exact k-nearest-neighbor queries.
//
// Split dimension is the widest spread within the node, split position is the
// median.  Queries keep a bounded max-heap ordered by (squared distance, row
// index), so ties resolve to the lower row index and results match an
// exhaustive scan exactly.  The tree keeps a pointer to the point matrix; the
// caller must keep that matrix alive while querying.
#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <queue>
#include <span>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "matrix.hpp"

namespace odkit {

class KdTree {
public:
    explicit KdTree(const Matrix& points, std::size_t leaf_size = 16)
        : points_(&points), leaf_size_(std::max<std::size_t>(1, leaf_size)) {
        if (points.rows() == 0) throw DataError("KdTree: empty point set");
        std::vector<std::size_t> idx(points.rows());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        root_ = build(idx.data(), idx.size());
    }

    std::size_t size() const { return points_->rows(); }

    // Indices of the k nearest points to `query`, sorted by (squared
    // distance, row index) ascending.  `exclude` skips one row (pass the
    // query's own index when the query is a member of the point set).
    std::vector<std::size_t> knn(std::span<const double> query, std::size_t k,
                                 std::ptrdiff_t exclude = -1) const {
        if (query.size() != points_->cols())
            throw DataError("KdTree::knn: query has " + std::to_string(query.size()) +
                            " attributes, points have " + std::to_string(points_->cols()));
        const std::size_t available = points_->rows() - (exclude >= 0 ? 1 : 0);
        if (k < 1 || k > available)
            throw DataError("KdTree::knn: k=" + std::to_string(k) + " outside [1, " +
                            std::to_string(available) + "]");

        using Entry = std::pair<double, std::size_t>;  // (squared distance, row)
        std::priority_queue<Entry> heap;               // top = current worst
        search(root_, query, k, exclude, heap);

        std::vector<Entry> entries;
        entries.reserve(heap.size());
        while (!heap.empty()) {
            entries.push_back(heap.top());
            heap.pop();
        }
        std::sort(entries.begin(), entries.end());
        std::vector<std::size_t> out;
        out.reserve(entries.size());
        for (const auto& e : entries) out.push_back(e.second);
        return out;
    }

private:
    struct Node {
        std::size_t split_dim = 0;
        double split_value = 0.0;
        std::ptrdiff_t left = -1, right = -1;
        std::vector<std::size_t> leaf_points;  // nonempty only for leaves

        bool is_leaf() const { return left < 0; }
    };

    std::ptrdiff_t build(std::size_t* idx, std::size_t count) {
        Node node;
        std::size_t dim = 0;
        double spread = -1.0;
        for (std::size_t d = 0; d < points_->cols(); ++d) {
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (std::size_t i = 0; i < count; ++i) {
                const double v = (*points_)(idx[i], d);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            if (hi - lo > spread) {
                spread = hi - lo;
                dim = d;
            }
        }
        if (count <= leaf_size_ || spread <= 0.0) {  // small or all-identical
            node.leaf_points.assign(idx, idx + count);
            nodes_.push_back(std::move(node));
            return static_cast<std::ptrdiff_t>(nodes_.size() - 1);
        }
        std::sort(idx, idx + count, [&](std::size_t a, std::size_t b) {
            const double va = (*points_)(a, dim), vb = (*points_)(b, dim);
            return va != vb ? va < vb : a < b;
        });
        const std::size_t mid = count / 2;
        node.split_dim = dim;
        node.split_value = (*points_)(idx[mid], dim);
        const std::ptrdiff_t self = static_cast<std::ptrdiff_t>(nodes_.size());
        nodes_.push_back(std::move(node));
        const std::ptrdiff_t left = build(idx, mid);
        const std::ptrdiff_t right = build(idx + mid, count - mid);
        nodes_[self].left = left;
        nodes_[self].right = right;
        return self;
    }

    void search(std::ptrdiff_t node_id, std::span<const double> query, std::size_t k,
                std::ptrdiff_t exclude,
                std::priority_queue<std::pair<double, std::size_t>>& heap) const {
        const Node& node = nodes_[static_cast<std::size_t>(node_id)];
        if (node.is_leaf()) {
            for (std::size_t row : node.leaf_points) {
                if (static_cast<std::ptrdiff_t>(row) == exclude) continue;
                const double d2 = squared_distance(query, points_->row(row));
                const std::pair<double, std::size_t> cand{d2, row};
                if (heap.size() < k) {
                    heap.push(cand);
                } else if (cand < heap.top()) {
                    heap.pop();
                    heap.push(cand);
                }
            }
            return;
        }
        const double diff = query[node.split_dim] - node.split_value;
        const std::ptrdiff_t near = diff < 0.0 ? node.left : node.right;
        const std::ptrdiff_t far = diff < 0.0 ? node.right : node.left;
        search(near, query, k, exclude, heap);
        // The far child can only be skipped when the plane distance alone
        // already exceeds the current worst: equal distance must still be
        // visited so index tie-breaks match an exhaustive scan.
        if (heap.size() < k || diff * diff <= heap.top().first) search(far, query, k, exclude, heap);
    }

    const Matrix* points_;
    std::size_t leaf_size_;
    std::vector<Node> nodes_;
    std::ptrdiff_t root_ = -1;
};

}  // namespace odkit
