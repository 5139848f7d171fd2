#pragma once

// Glue between labeled data and the two surrogate networks.

#include <aslip/mlp.hpp>
#include <aslip/sampling.hpp>

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace aslip {

struct Matrices {
    MatrixXd inputs, targets;
};

/// Valid records as (state, action) -> (dx, y', xdot') columns.
inline Matrices return_map_data(std::span<const StepRecord> records) {
    std::size_t n = 0;
    for (const auto& r : records) n += r.valid();
    Matrices m{MatrixXd(4, static_cast<Eigen::Index>(n)), MatrixXd(3, static_cast<Eigen::Index>(n))};
    Eigen::Index c = 0;
    for (const auto& r : records) {
        if (!r.valid()) continue;
        for (Eigen::Index d = 0; d < 4; ++d) m.inputs(d, c) = r.point[static_cast<std::size_t>(d)];
        m.targets(0, c) = r.next->dx;
        m.targets(1, c) = r.next->y;
        m.targets(2, c) = r.next->xdot;
        ++c;
    }
    return m;
}

inline Matrices margin_data(std::span<const MarginSample> samples) {
    const auto n = static_cast<Eigen::Index>(samples.size());
    Matrices m{MatrixXd(4, n), MatrixXd(1, n)};
    for (Eigen::Index c = 0; c < n; ++c) {
        const auto& s = samples[static_cast<std::size_t>(c)];
        for (Eigen::Index d = 0; d < 4; ++d) m.inputs(d, c) = s.point[static_cast<std::size_t>(d)];
        m.targets(0, c) = s.margin;
    }
    return m;
}

/// Leading columns train, trailing `heldout_fraction` are held out.
inline std::pair<Matrices, Dataset> split_columns(const Matrices& m, double heldout_fraction) {
    if (!(heldout_fraction > 0.0 && heldout_fraction < 1.0))
        throw std::invalid_argument("heldout_fraction must be in (0, 1)");
    const Eigen::Index n = m.inputs.cols();
    const auto n_hold = static_cast<Eigen::Index>(std::floor(static_cast<double>(n) * heldout_fraction));
    const Eigen::Index n_train = n - n_hold;
    if (n_train < 1 || n_hold < 1) throw std::invalid_argument("too few samples to split into train and held-out");
    return {Matrices{m.inputs.leftCols(n_train), m.targets.leftCols(n_train)},
            Dataset{m.inputs.rightCols(n_hold), m.targets.rightCols(n_hold)}};
}

inline std::vector<std::size_t> layer_sizes(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
    std::vector<std::size_t> s{in};
    s.insert(s.end(), hidden.begin(), hidden.end());
    s.push_back(out);
    return s;
}

inline TrainResult train_return_map(std::span<const StepRecord> records, const std::vector<std::size_t>& hidden,
                                    TrainConfig cfg, double heldout_fraction = 0.2) {
    const auto [tr, ho] = split_columns(return_map_data(records), heldout_fraction);
    if (cfg.loss_weights.empty()) cfg.loss_weights = return_map_loss_weights();
    return train(mlp_init(layer_sizes(4, hidden, 3), cfg.seed), tr.inputs, tr.targets, cfg, ho);
}

inline TrainResult train_margin(std::span<const MarginSample> samples, const std::vector<std::size_t>& hidden,
                                TrainConfig cfg, double heldout_fraction = 0.2) {
    const auto [tr, ho] = split_columns(margin_data(samples), heldout_fraction);
    return train(mlp_init(layer_sizes(4, hidden, 1), cfg.seed), tr.inputs, tr.targets, cfg, ho);
}

/// Fraction of samples whose predicted margin has the sign of the label.
inline double sign_agreement(const Mlp& margin_net, std::span<const MarginSample> samples) {
    if (samples.empty()) throw std::invalid_argument("sign_agreement: no samples");
    const Matrices m = margin_data(samples);
    const MatrixXd pred = margin_net.forward_batch(m.inputs);
    std::size_t agree = 0;
    for (Eigen::Index c = 0; c < pred.cols(); ++c) agree += (pred(0, c) > 0.0) == (m.targets(0, c) > 0.0);
    return static_cast<double>(agree) / static_cast<double>(samples.size());
}

}  // namespace aslip
