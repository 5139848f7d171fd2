#pragma once

// Feed-forward ReLU networks used as surrogates of the return map and the
// failure margin: initialization, forward pass, input Jacobian, Adam
// training on a weighted squared error, and a versioned text format.

#include <aslip/rng.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace aslip {

using Eigen::MatrixXd;
using Eigen::VectorXd;

class Mlp {
public:
    Mlp() = default;

    /// Zero-initialized network with the given layer sizes (input first).
    explicit Mlp(std::vector<std::size_t> layer_sizes) : sizes_(std::move(layer_sizes)) {
        if (sizes_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output layers");
        for (auto s : sizes_)
            if (s < 1) throw std::invalid_argument("Mlp: layer sizes must be >= 1");
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
            weights_.push_back(MatrixXd::Zero(static_cast<Eigen::Index>(sizes_[l + 1]),
                                              static_cast<Eigen::Index>(sizes_[l])));
            biases_.push_back(VectorXd::Zero(static_cast<Eigen::Index>(sizes_[l + 1])));
        }
        loss_weights_.assign(sizes_.back(), 1.0);
    }

    const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
    std::size_t num_layers() const { return weights_.size(); }  // affine layers
    std::size_t input_size() const { return sizes_.front(); }
    std::size_t output_size() const { return sizes_.back(); }

    MatrixXd& weight(std::size_t l) { return weights_[l]; }
    const MatrixXd& weight(std::size_t l) const { return weights_[l]; }
    VectorXd& bias(std::size_t l) { return biases_[l]; }
    const VectorXd& bias(std::size_t l) const { return biases_[l]; }

    /// Output weights used at training time; carried in the weights file.
    const std::vector<double>& loss_weights() const { return loss_weights_; }
    void set_loss_weights(std::vector<double> w) {
        if (w.size() != output_size()) throw std::invalid_argument("Mlp: loss weight count mismatch");
        loss_weights_ = std::move(w);
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l < num_layers(); ++l) n += weights_[l].size() + biases_[l].size();
        return n;
    }

    bool all_finite() const {
        for (std::size_t l = 0; l < num_layers(); ++l)
            if (!weights_[l].allFinite() || !biases_[l].allFinite()) return false;
        return true;
    }

    VectorXd forward(const VectorXd& input) const {
        check_input(input.size());
        VectorXd a = input;
        for (std::size_t l = 0; l < num_layers(); ++l) {
            VectorXd z = weights_[l] * a + biases_[l];
            a = (l + 1 < num_layers()) ? VectorXd(z.cwiseMax(0.0)) : z;
        }
        return a;
    }

    /// Columns of `inputs` are samples.
    MatrixXd forward_batch(const MatrixXd& inputs) const {
        check_input(inputs.rows());
        MatrixXd a = inputs;
        for (std::size_t l = 0; l < num_layers(); ++l) {
            MatrixXd z = weights_[l] * a;
            z.colwise() += biases_[l];
            a = (l + 1 < num_layers()) ? MatrixXd(z.cwiseMax(0.0)) : z;
        }
        return a;
    }

    /// d output / d input. A ReLU with pre-activation exactly 0 contributes 0.
    MatrixXd input_jacobian(const VectorXd& input) const {
        VectorXd out;
        MatrixXd jac;
        forward_jacobian(input, out, jac);
        return jac;
    }

    /// Output and input Jacobian from one forward pass; the Jacobian is
    /// accumulated from the output side, which is cheap for narrow outputs.
    void forward_jacobian(const VectorXd& input, VectorXd& out, MatrixXd& jac) const {
        check_input(input.size());
        const std::size_t L = num_layers();
        std::vector<VectorXd> pre(L);
        VectorXd a = input;
        for (std::size_t l = 0; l < L; ++l) {
            pre[l] = weights_[l] * a + biases_[l];
            if (l + 1 < L) a = pre[l].cwiseMax(0.0);
        }
        out = pre[L - 1];
        jac = weights_[L - 1];
        for (std::size_t l = L - 1; l-- > 0;) {
            for (Eigen::Index i = 0; i < pre[l].size(); ++i)
                if (!(pre[l][i] > 0.0)) jac.col(i).setZero();
            jac = jac * weights_[l];
        }
    }

    /// Smallest |pre-activation| over hidden units at `input`; used to stay
    /// clear of kinks when comparing against finite differences.
    double min_abs_preactivation(const VectorXd& input) const {
        check_input(input.size());
        double m = std::numeric_limits<double>::infinity();
        VectorXd a = input;
        for (std::size_t l = 0; l + 1 < num_layers(); ++l) {
            const VectorXd z = weights_[l] * a + biases_[l];
            m = std::min(m, z.cwiseAbs().minCoeff());
            a = z.cwiseMax(0.0);
        }
        return m;
    }

private:
    void check_input(Eigen::Index n) const {
        if (sizes_.empty()) throw std::invalid_argument("Mlp: empty network");
        if (static_cast<std::size_t>(n) != input_size())
            throw std::invalid_argument("Mlp: input has " + std::to_string(n) + " entries, expected " +
                                        std::to_string(input_size()));
    }

    std::vector<std::size_t> sizes_;
    std::vector<MatrixXd> weights_;
    std::vector<VectorXd> biases_;
    std::vector<double> loss_weights_;
};

/// Glorot-uniform weights, zero biases.
inline Mlp mlp_init(const std::vector<std::size_t>& layer_sizes, std::uint64_t seed) {
    Mlp net(layer_sizes);
    SeqRng rng(seed);
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        MatrixXd& w = net.weight(l);
        const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-limit, limit);
    }
    return net;
}

/// sqrt(mean_n sum_j w_j (out_j - target_j)^2). Columns are samples.
inline double evaluate(const Mlp& net, const MatrixXd& inputs, const MatrixXd& targets,
                       const std::vector<double>& loss_weights) {
    if (inputs.cols() != targets.cols()) throw std::invalid_argument("evaluate: sample count mismatch");
    if (targets.rows() != static_cast<Eigen::Index>(net.output_size()) ||
        loss_weights.size() != net.output_size())
        throw std::invalid_argument("evaluate: output dimension mismatch");
    if (inputs.cols() == 0) return 0.0;
    const MatrixXd err = net.forward_batch(inputs) - targets;
    double total = 0.0;
    for (Eigen::Index j = 0; j < err.rows(); ++j) total += loss_weights[j] * err.row(j).squaredNorm();
    return std::sqrt(total / static_cast<double>(inputs.cols()));
}

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t iterations = 100000;
    std::size_t batch_size = 1024;
    std::uint64_t seed = 0;
    std::vector<double> loss_weights;  // empty means all ones
    std::size_t eval_every = 1000;      // held-out check interval
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
};

inline std::vector<double> return_map_loss_weights() { return {0.250, 6.25, 0.250}; }

struct TrainResult {
    Mlp net;                          // best-on-held-out parameters (or final without held-out data)
    std::vector<double> loss_history; // per-iteration mini-batch loss
    std::optional<double> best_heldout_rmse;
    std::size_t best_iteration = 0;
};

struct Dataset {
    MatrixXd inputs;   // features x samples
    MatrixXd targets;  // outputs x samples
};

/// Adam on the mean weighted squared error over shuffled mini-batches.
inline TrainResult train(Mlp net, const MatrixXd& inputs, const MatrixXd& targets, const TrainConfig& cfg,
                         const std::optional<Dataset>& heldout = std::nullopt) {
    if (inputs.cols() != targets.cols() || inputs.cols() == 0)
        throw std::invalid_argument("train: inputs/targets must be non-empty with equal counts");
    if (inputs.rows() != static_cast<Eigen::Index>(net.input_size()) ||
        targets.rows() != static_cast<Eigen::Index>(net.output_size()))
        throw std::invalid_argument("train: dimension mismatch with network");
    if (!inputs.allFinite() || !targets.allFinite()) throw std::invalid_argument("train: non-finite data");
    if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("train: learning_rate must be positive");
    if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");

    std::vector<double> lw = cfg.loss_weights.empty() ? std::vector<double>(net.output_size(), 1.0) : cfg.loss_weights;
    if (lw.size() != net.output_size()) throw std::invalid_argument("train: loss weight count mismatch");
    for (double w : lw)
        if (!(w >= 0.0)) throw std::invalid_argument("train: loss weights must be nonnegative");
    net.set_loss_weights(lw);
    const VectorXd lw_vec = Eigen::Map<const VectorXd>(lw.data(), static_cast<Eigen::Index>(lw.size()));

    const std::size_t layers = net.num_layers();
    std::vector<MatrixXd> mw(layers), vw(layers);
    std::vector<VectorXd> mb(layers), vb(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        mw[l] = vw[l] = MatrixXd::Zero(net.weight(l).rows(), net.weight(l).cols());
        mb[l] = vb[l] = VectorXd::Zero(net.bias(l).size());
    }

    const auto n = static_cast<std::size_t>(inputs.cols());
    const std::size_t batch = std::min(cfg.batch_size, n);
    std::vector<Eigen::Index> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<Eigen::Index>(i);
    std::size_t cursor = n;  // forces a shuffle on the first batch
    SeqRng rng(cfg.seed);

    TrainResult result;
    result.loss_history.reserve(cfg.iterations);
    auto check_heldout = [&](std::size_t iter) {
        if (!heldout) return;
        const double rmse = evaluate(net, heldout->inputs, heldout->targets, lw);
        if (!result.best_heldout_rmse || rmse < *result.best_heldout_rmse) {
            result.best_heldout_rmse = rmse;
            result.best_iteration = iter;
            result.net = net;
        }
    };

    MatrixXd xb(inputs.rows(), static_cast<Eigen::Index>(batch));
    MatrixXd tb(targets.rows(), static_cast<Eigen::Index>(batch));
    std::vector<MatrixXd> acts(layers + 1), pre(layers);
    double b1t = 1.0, b2t = 1.0;

    for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
        for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(batch); ++c) {
            if (cursor == n) {
                for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
                cursor = 0;
            }
            const Eigen::Index src = order[cursor++];
            xb.col(c) = inputs.col(src);
            tb.col(c) = targets.col(src);
        }

        acts[0] = xb;
        for (std::size_t l = 0; l < layers; ++l) {
            pre[l] = net.weight(l) * acts[l];
            pre[l].colwise() += net.bias(l);
            acts[l + 1] = (l + 1 < layers) ? MatrixXd(pre[l].cwiseMax(0.0)) : pre[l];
        }
        const MatrixXd err = acts[layers] - tb;
        const double loss = (lw_vec.transpose() * err.cwiseAbs2()).sum() / static_cast<double>(batch);
        if (!std::isfinite(loss))
            throw std::runtime_error("train: non-finite loss at iteration " + std::to_string(iter));
        result.loss_history.push_back(loss);

        MatrixXd delta = (2.0 / static_cast<double>(batch)) * (lw_vec.asDiagonal() * err);
        b1t *= cfg.beta1;
        b2t *= cfg.beta2;
        const double step = cfg.learning_rate * std::sqrt(1.0 - b2t) / (1.0 - b1t);
        for (std::size_t l = layers; l-- > 0;) {
            const MatrixXd gw = delta * acts[l].transpose();
            const VectorXd gb = delta.rowwise().sum();
            if (l > 0) {
                MatrixXd back = net.weight(l).transpose() * delta;
                delta = back.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
            }
            mw[l] = cfg.beta1 * mw[l] + (1.0 - cfg.beta1) * gw;
            vw[l] = cfg.beta2 * vw[l] + (1.0 - cfg.beta2) * gw.cwiseAbs2();
            mb[l] = cfg.beta1 * mb[l] + (1.0 - cfg.beta1) * gb;
            vb[l] = cfg.beta2 * vb[l] + (1.0 - cfg.beta2) * gb.cwiseAbs2();
            net.weight(l).array() -= step * mw[l].array() / (vw[l].array().sqrt() + cfg.adam_eps);
            net.bias(l).array() -= step * mb[l].array() / (vb[l].array().sqrt() + cfg.adam_eps);
        }

        if (cfg.eval_every > 0 && (iter + 1) % cfg.eval_every == 0) check_heldout(iter + 1);
    }
    check_heldout(cfg.iterations);
    if (!heldout) result.net = std::move(net);
    return result;
}

// ---------------------------------------------------------------------------
// Weights file

inline constexpr int kMlpFormatVersion = 1;

namespace detail {
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
}  // namespace detail

inline void save_mlp(const Mlp& net, std::ostream& os) {
    os << "aslip-mlp " << kMlpFormatVersion << '\n';
    os << "layers";
    for (auto s : net.layer_sizes()) os << ' ' << s;
    os << "\nloss_weights";
    for (double w : net.loss_weights()) os << ' ' << detail::fmt17(w);
    os << '\n';
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        const MatrixXd& w = net.weight(l);
        os << "weight " << l << ' ' << w.rows() << ' ' << w.cols() << '\n';
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) os << (c ? " " : "") << detail::fmt17(w(r, c));
            os << '\n';
        }
        os << "bias " << l << '\n';
        for (Eigen::Index r = 0; r < net.bias(l).size(); ++r) os << (r ? " " : "") << detail::fmt17(net.bias(l)[r]);
        os << '\n';
    }
}

inline Mlp load_mlp(std::istream& is) {
    auto fail = [](const std::string& what) { throw std::runtime_error("weights file: " + what); };
    std::string tag;
    int version = 0;
    if (!(is >> tag >> version) || tag != "aslip-mlp") fail("missing 'aslip-mlp' header");
    if (version != kMlpFormatVersion)
        fail("format version " + std::to_string(version) + " unsupported (expected " +
             std::to_string(kMlpFormatVersion) + ")");
    std::string line;
    std::getline(is, line);
    if (!std::getline(is, line)) fail("missing layers line");
    std::istringstream ls(line);
    if (!(ls >> tag) || tag != "layers") fail("expected 'layers'");
    std::vector<std::size_t> sizes;
    for (std::size_t s; ls >> s;) sizes.push_back(s);
    Mlp net(sizes);
    if (!std::getline(is, line)) fail("missing loss_weights line");
    std::istringstream ws(line);
    if (!(ws >> tag) || tag != "loss_weights") fail("expected 'loss_weights'");
    std::vector<double> lw;
    for (std::string v; ws >> v;) lw.push_back(std::stod(v));
    net.set_loss_weights(lw);
    auto read_double = [&](double& out) {
        std::string v;
        if (!(is >> v)) fail("truncated parameters");
        out = std::strtod(v.c_str(), nullptr);
    };
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        std::size_t idx = 0;
        Eigen::Index rows = 0, cols = 0;
        if (!(is >> tag >> idx >> rows >> cols) || tag != "weight" || idx != l ||
            rows != net.weight(l).rows() || cols != net.weight(l).cols())
            fail("bad weight block header for layer " + std::to_string(l));
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) read_double(net.weight(l)(r, c));
        if (!(is >> tag >> idx) || tag != "bias" || idx != l) fail("bad bias block header for layer " + std::to_string(l));
        for (Eigen::Index r = 0; r < net.bias(l).size(); ++r) read_double(net.bias(l)[r]);
    }
    if (!net.all_finite()) fail("non-finite parameter");
    return net;
}

inline void save_mlp(const Mlp& net, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    save_mlp(net, os);
}

inline Mlp load_mlp(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open weights file '" + path + "'");
    return load_mlp(is);
}

}  // namespace aslip
