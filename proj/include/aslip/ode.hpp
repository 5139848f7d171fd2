#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace aslip {

/// Thrown when the adaptive integrator cannot make progress (step underflow
/// or non-finite state). Never used to report a physical failure.
class IntegrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct OdeTolerances {
    double rtol = 1e-8;
    double atol = 1e-10;
    double h_init = 1e-3;
    double h_max = 1e-2;
    double h_min = 1e-14;
    double event_time_tol = 1e-10;
};

template <std::size_t N>
using OdeVec = std::array<double, N>;

/// Result of one Dormand-Prince 5(4) step.
template <std::size_t N>
struct DoprStep {
    OdeVec<N> y;
    double err_norm = 0.0;  // scaled RMS error, <= 1 means acceptable
};

/// One explicit Dormand-Prince 5(4) step of size h from (t, y).
/// `rhs(t, y)` must return the time derivative.
template <std::size_t N, class Rhs>
DoprStep<N> dopri_step(const Rhs& rhs, double t, const OdeVec<N>& y, double h,
                       const OdeTolerances& tol) {
    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                     a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                     a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                     b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    // 5th minus embedded 4th order weights
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                     e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    auto axpy = [&](std::initializer_list<std::pair<double, const OdeVec<N>*>> terms) {
        OdeVec<N> out = y;
        for (std::size_t i = 0; i < N; ++i) {
            double acc = 0.0;
            for (const auto& [c, k] : terms) acc += c * (*k)[i];
            out[i] += h * acc;
        }
        return out;
    };

    const OdeVec<N> k1 = rhs(t, y);
    const OdeVec<N> k2 = rhs(t + c2 * h, axpy({{a21, &k1}}));
    const OdeVec<N> k3 = rhs(t + c3 * h, axpy({{a31, &k1}, {a32, &k2}}));
    const OdeVec<N> k4 = rhs(t + c4 * h, axpy({{a41, &k1}, {a42, &k2}, {a43, &k3}}));
    const OdeVec<N> k5 =
        rhs(t + c5 * h, axpy({{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
    const OdeVec<N> k6 =
        rhs(t + h, axpy({{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
    DoprStep<N> out;
    out.y = axpy({{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
    const OdeVec<N> k7 = rhs(t + h, out.y);

    double sum = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        const double err =
            h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
        const double scale = tol.atol + tol.rtol * std::max(std::abs(y[i]), std::abs(out.y[i]));
        sum += (err / scale) * (err / scale);
    }
    out.err_norm = std::sqrt(sum / static_cast<double>(N));
    return out;
}

/// Step-size update for a 5th-order method with safety factor and clamps.
inline double next_step_size(double h, double err_norm) {
    constexpr double safety = 0.9, min_factor = 0.2, max_factor = 5.0;
    if (err_norm == 0.0) return h * max_factor;
    const double factor = safety * std::pow(err_norm, -0.2);
    return h * std::clamp(factor, min_factor, max_factor);
}

}  // namespace aslip
