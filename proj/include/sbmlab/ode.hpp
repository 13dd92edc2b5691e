#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "sbmlab/errors.hpp"

namespace sbmlab::ode {

template <std::size_t N>
using State = std::array<double, N>;

struct Options {
    double rtol = 1e-10;
    double atol = 1e-14;
    double initial_step = 1e-3;
    double min_step = 1e-14;
    std::size_t max_steps = 2'000'000;
};

/// Why an integration ended.
enum class Outcome { completed, stopped };

/// Adaptive Dormand–Prince 5(4) integrator with PI-free classic step control.
///
/// The integrator visits every abscissa of a caller-supplied output grid
/// exactly (steps are clipped so they land on the next output point) and
/// calls `stop(x, y)` after every accepted step. A `true` return ends the
/// integration early, which is how the shooting classifiers detect sign
/// changes and blow-up without event root finding.
template <std::size_t N>
class DormandPrince45 {
public:
    explicit DormandPrince45(Options opt = {}) : opt_(opt) {}

    /// Integrates from `x0` through `x_out` (strictly increasing, first entry
    /// >= x0). `out(i, y)` receives the state at x_out[i]. Returns the outcome
    /// and writes the abscissa of the last accepted step to `x_last`.
    template <class Rhs, class Out, class Stop>
    Outcome integrate(Rhs&& rhs, double x0, State<N> y, std::span<const double> x_out, Out&& out,
                      Stop&& stop, double* x_last = nullptr) const {
        double x = x0;
        double h = opt_.initial_step;
        std::size_t next = 0;
        std::size_t steps = 0;
        while (next < x_out.size() && x_out[next] <= x) {
            out(next, y);
            ++next;
        }
        State<N> k1;
        rhs(x, y, k1);
        while (next < x_out.size()) {
            const double target = x_out[next];
            bool hit = false;
            double step = h;
            if (x + step >= target) {
                step = target - x;
                hit = true;
            }
            State<N> y_new, err, k_last;
            attempt(rhs, x, y, k1, step, y_new, err, k_last);
            double err_norm = 0.0;
            for (std::size_t i = 0; i < N; ++i) {
                const double sc = opt_.atol + opt_.rtol * std::max(std::abs(y[i]), std::abs(y_new[i]));
                err_norm = std::max(err_norm, std::abs(err[i]) / sc);
            }
            if (!std::isfinite(err_norm)) err_norm = 1e10;
            if (err_norm <= 1.0) {
                x = hit ? target : x + step;
                y = y_new;
                k1 = k_last;  // FSAL
                if (hit) {
                    out(next, y);
                    ++next;
                }
                if (x_last) *x_last = x;
                if (stop(x, y)) return Outcome::stopped;
                const double fac = err_norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err_norm, -0.2), 0.2, 5.0);
                // a clipped step says nothing about the natural step size
                h = hit ? std::max(h, step * fac) : step * fac;
            } else {
                h = step * std::clamp(0.9 * std::pow(err_norm, -0.25), 0.1, 0.9);
                if (h < opt_.min_step) {
                    throw StiffnessFailure("step size underflow at x=" + std::to_string(x));
                }
            }
            if (++steps > opt_.max_steps) {
                throw StiffnessFailure("step budget exhausted at x=" + std::to_string(x));
            }
        }
        return Outcome::completed;
    }

private:
    template <class Rhs>
    static void attempt(Rhs& rhs, double x, const State<N>& y, const State<N>& k1, double h,
                        State<N>& y_new, State<N>& err, State<N>& k7) {
        static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
        static constexpr double a21 = 1.0 / 5;
        static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
        static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
        static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                                a54 = -212.0 / 729;
        static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                                a64 = 49.0 / 176, a65 = -5103.0 / 18656;
        static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                                b5 = -2187.0 / 6784, b6 = 11.0 / 84;
        static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                                e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
        State<N> k2, k3, k4, k5, k6, t;
        for (std::size_t i = 0; i < N; ++i) t[i] = y[i] + h * a21 * k1[i];
        rhs(x + c2 * h, t, k2);
        for (std::size_t i = 0; i < N; ++i) t[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        rhs(x + c3 * h, t, k3);
        for (std::size_t i = 0; i < N; ++i) t[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        rhs(x + c4 * h, t, k4);
        for (std::size_t i = 0; i < N; ++i)
            t[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        rhs(x + c5 * h, t, k5);
        for (std::size_t i = 0; i < N; ++i)
            t[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        rhs(x + h, t, k6);
        for (std::size_t i = 0; i < N; ++i)
            y_new[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
        rhs(x + h, y_new, k7);
        for (std::size_t i = 0; i < N; ++i)
            err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
    }

    Options opt_;
};

}  // namespace sbmlab::ode
