#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace aslip {

/// Diagonal weighted 2-norm: d(p, q) = sqrt(sum_i w_i (p_i - q_i)^2).
template <std::size_t D>
struct WeightedMetric {
    std::array<double, D> weights;

    explicit WeightedMetric(const std::array<double, D>& w) : weights(w) {
        for (double v : weights)
            if (!(v >= 0.0) || !std::isfinite(v))
                throw std::invalid_argument("metric weights must be finite and nonnegative");
    }

    double squared(const std::array<double, D>& p, const std::array<double, D>& q) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < D; ++i) {
            const double d = p[i] - q[i];
            acc += weights[i] * d * d;
        }
        return acc;
    }

    double operator()(const std::array<double, D>& p, const std::array<double, D>& q) const {
        return std::sqrt(squared(p, q));
    }
};

template <std::size_t D>
struct Neighbor {
    std::array<double, D> point;
    double distance;
    std::size_t index;  // position in the input list
};

/// Exact nearest-neighbor k-d tree under a diagonal weighted metric.
///
/// Points are stored pre-multiplied by sqrt(w_i) so the search is plain
/// Euclidean in the scaled space. Ties in distance resolve to the
/// lexicographically smallest original point. Immutable after construction.
template <std::size_t D>
class WeightedKdTree {
public:
    using Point = std::array<double, D>;

    WeightedKdTree(std::span<const Point> points, const WeightedMetric<D>& metric)
        : metric_(metric), original_(points.begin(), points.end()) {
        if (points.empty()) throw std::invalid_argument("WeightedKdTree: empty point set");
        for (std::size_t i = 0; i < D; ++i) scale_[i] = std::sqrt(metric_.weights[i]);
        scaled_.resize(original_.size());
        for (std::size_t n = 0; n < original_.size(); ++n)
            for (std::size_t i = 0; i < D; ++i) scaled_[n][i] = original_[n][i] * scale_[i];
        order_.resize(original_.size());
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        nodes_.reserve(2 * original_.size() / kLeafSize + 1);
        build(0, order_.size());
    }

    std::size_t size() const { return original_.size(); }
    const WeightedMetric<D>& metric() const { return metric_; }
    const Point& point(std::size_t i) const { return original_[i]; }

    Neighbor<D> nearest(const Point& q) const {
        Point qs;
        for (std::size_t i = 0; i < D; ++i) qs[i] = q[i] * scale_[i];
        Best best;
        search(0, qs, best);
        return {original_[best.index], std::sqrt(best.d2), best.index};
    }

private:
    static constexpr std::size_t kLeafSize = 8;
    static constexpr std::uint32_t kNoChild = std::numeric_limits<std::uint32_t>::max();

    struct Node {
        std::size_t begin, end;  // range in order_
        std::uint32_t left = kNoChild, right = kNoChild;
        std::uint32_t axis = 0;
        double split = 0.0;
    };

    struct Best {
        double d2 = std::numeric_limits<double>::infinity();
        std::size_t index = 0;
    };

    std::uint32_t build(std::size_t begin, std::size_t end) {
        const auto id = static_cast<std::uint32_t>(nodes_.size());
        nodes_.push_back({begin, end});
        if (end - begin <= kLeafSize) return id;

        Point lo, hi;
        lo.fill(std::numeric_limits<double>::infinity());
        hi.fill(-std::numeric_limits<double>::infinity());
        for (std::size_t n = begin; n < end; ++n)
            for (std::size_t i = 0; i < D; ++i) {
                lo[i] = std::min(lo[i], scaled_[order_[n]][i]);
                hi[i] = std::max(hi[i], scaled_[order_[n]][i]);
            }
        std::uint32_t axis = 0;
        for (std::uint32_t i = 1; i < D; ++i)
            if (hi[i] - lo[i] > hi[axis] - lo[axis]) axis = i;
        if (!(hi[axis] > lo[axis])) return id;  // all coincident: keep as leaf

        const std::size_t mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](std::size_t a, std::size_t b) { return scaled_[a][axis] < scaled_[b][axis]; });
        const double split = scaled_[order_[mid]][axis];
        nodes_[id].axis = axis;
        nodes_[id].split = split;
        // Left holds values <= split, right holds values >= split.
        const std::uint32_t l = build(begin, mid);
        const std::uint32_t r = build(mid, end);
        nodes_[id].left = l;
        nodes_[id].right = r;
        return id;
    }

    void consider(std::size_t idx, const Point& qs, Best& best) const {
        double d2 = 0.0;
        for (std::size_t i = 0; i < D; ++i) {
            const double d = scaled_[idx][i] - qs[i];
            d2 += d * d;
        }
        if (d2 < best.d2 ||
            (d2 == best.d2 && std::lexicographical_compare(original_[idx].begin(), original_[idx].end(),
                                                           original_[best.index].begin(),
                                                           original_[best.index].end()))) {
            best.d2 = d2;
            best.index = idx;
        }
    }

    void search(std::uint32_t id, const Point& qs, Best& best) const {
        const Node& node = nodes_[id];
        if (node.left == kNoChild) {
            for (std::size_t n = node.begin; n < node.end; ++n) consider(order_[n], qs, best);
            return;
        }
        const double diff = qs[node.axis] - node.split;
        const std::uint32_t near = diff <= 0.0 ? node.left : node.right;
        const std::uint32_t far = diff <= 0.0 ? node.right : node.left;
        search(near, qs, best);
        // Ties must still be visited for the lexicographic tie-break.
        if (diff * diff <= best.d2) search(far, qs, best);
    }

    WeightedMetric<D> metric_;
    Point scale_{};
    std::vector<Point> original_;
    std::vector<Point> scaled_;
    std::vector<std::size_t> order_;
    std::vector<Node> nodes_;
};

}  // namespace aslip
