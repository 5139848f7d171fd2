#pragma once

// Uniform state-action sampling, validity labeling, and oriented-distance
// (failure margin) labels built from two nearest-neighbor trees.

#include <aslip/dynamics.hpp>
#include <aslip/kdtree.hpp>
#include <aslip/parallel.hpp>
#include <aslip/rng.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace aslip {

/// State-action point (y, xdot, alpha, delta_l).
using SAPoint = std::array<double, 4>;
using Metric = WeightedMetric<4>;
using SATree = WeightedKdTree<4>;

inline ApexState state_of(const SAPoint& p) { return {p[0], p[1]}; }
inline Action action_of(const SAPoint& p) { return {p[2], p[3]}; }
inline SAPoint make_point(const ApexState& s, const Action& a) { return {s.y, s.xdot, a.alpha, a.delta_l}; }

struct Bounds {
    SAPoint lower{0.8, -1.0, -0.6, -0.05};
    SAPoint upper{1.2, 1.0, 0.6, 0.15};

    void validate() const {
        for (std::size_t i = 0; i < 4; ++i)
            if (!(lower[i] < upper[i])) throw std::invalid_argument("bounds: lower must be < upper");
    }
    bool contains(const SAPoint& p, double slack = 0.0) const {
        for (std::size_t i = 0; i < 4; ++i)
            if (p[i] < lower[i] - slack || p[i] > upper[i] + slack) return false;
        return true;
    }
};

inline Metric default_metric() { return Metric({6.25, 0.250, 0.309, 2.50}); }

struct NextRecord {
    double dx, y, xdot;
};

struct StepRecord {
    SAPoint point{};
    StepTag tag = StepTag::Valid;
    std::optional<NextRecord> next;

    bool valid() const { return tag == StepTag::Valid; }
};

struct MarginSample {
    SAPoint point{};
    double margin = 0.0;
};

inline StepRecord label_point(const SAPoint& p, const ModelParams& params) {
    const StepOutcome o = simulate_step(state_of(p), action_of(p), params);
    StepRecord r{p, o.tag, std::nullopt};
    if (o.next) r.next = NextRecord{o.next->dx, o.next->apex.y, o.next->apex.xdot};
    return r;
}

/// i-th uniform point of a sampling stream. Independent of evaluation order.
inline SAPoint uniform_point(const CounterRng& rng, std::uint64_t i, const Bounds& b) {
    SAPoint p;
    for (std::size_t d = 0; d < 4; ++d) p[d] = rng.uniform(i, d, b.lower[d], b.upper[d]);
    return p;
}

// Stream ids keep the tree dataset and margin dataset independent for a seed.
inline constexpr std::uint64_t kDatasetStream = 1;
inline constexpr std::uint64_t kMarginStream = 2;

inline std::vector<StepRecord> sample_dataset(std::size_t n, const Bounds& bounds, const ModelParams& params,
                                              std::uint64_t seed, unsigned threads = default_thread_count()) {
    if (n < 1) throw std::invalid_argument("sample_dataset: n must be >= 1");
    bounds.validate();
    const CounterRng rng(seed, kDatasetStream);
    std::vector<StepRecord> out(n);
    parallel_for(n, [&](std::size_t i) { out[i] = label_point(uniform_point(rng, i, bounds), params); }, threads);
    return out;
}

inline SATree build_tree(std::span<const SAPoint> points, const Metric& metric) { return SATree(points, metric); }

struct ValiditySplit {
    std::vector<SAPoint> valid, invalid;
};

inline ValiditySplit split_by_validity(std::span<const StepRecord> records) {
    ValiditySplit s;
    for (const auto& r : records) (r.valid() ? s.valid : s.invalid).push_back(r.point);
    return s;
}

/// Signed distance to the opposite class, given the simulated label.
/// Positive iff q is valid. Throws if q coincides with an opposite-class point.
inline MarginSample margin_from_label(const SAPoint& q, bool valid, const SATree& valid_tree,
                                      const SATree& invalid_tree) {
    const double d = valid ? invalid_tree.nearest(q).distance : valid_tree.nearest(q).distance;
    if (!(d > 0.0)) throw std::runtime_error("margin_label: point coincides with an opposite-class sample");
    return {q, valid ? d : -d};
}

inline MarginSample margin_label(const SAPoint& q, const SATree& valid_tree, const SATree& invalid_tree,
                                 const ModelParams& params) {
    const bool valid = simulate_step(state_of(q), action_of(q), params).valid();
    return margin_from_label(q, valid, valid_tree, invalid_tree);
}

inline std::vector<MarginSample> generate_margin_dataset(std::size_t m, const Bounds& bounds,
                                                         const SATree& valid_tree, const SATree& invalid_tree,
                                                         const ModelParams& params, std::uint64_t seed,
                                                         unsigned threads = default_thread_count()) {
    if (m < 1) throw std::invalid_argument("generate_margin_dataset: m must be >= 1");
    bounds.validate();
    const CounterRng rng(seed, kMarginStream);
    std::vector<MarginSample> out(m);
    parallel_for(
        m, [&](std::size_t i) { out[i] = margin_label(uniform_point(rng, i, bounds), valid_tree, invalid_tree, params); },
        threads);
    return out;
}

}  // namespace aslip
