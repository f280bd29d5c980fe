#pragma once

#include "episurr/common/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace episurr::epi {

struct Tolerances {
    double abs = 1e-8;
    double rel = 1e-6;
    double min_step = 1e-10;
    double max_step = 1.0;
    double initial_step = 0.1;
};

struct IntegrationStats {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t rhs_evaluations = 0;
    /// Entries that fell below -1e-9 and were reset to zero.
    std::size_t clamped = 0;

    IntegrationStats& operator+=(const IntegrationStats& o)
    {
        accepted += o.accepted;
        rejected += o.rejected;
        rhs_evaluations += o.rhs_evaluations;
        clamped += o.clamped;
        return *this;
    }
};

/// Adaptive Dormand-Prince 5(4) stepper with FSAL reuse.
///
/// `System` is callable as system(t, std::span<const double> y, std::span<double> dydt).
/// advance() always ends exactly on the requested time; the proposed step size is
/// carried across calls so that stopping on a fixed grid does not reset the controller.
template <class System>
class DormandPrince {
public:
    DormandPrince(System system, std::size_t dim, Tolerances tol = {})
        : system_(std::move(system)), tol_(tol), h_(tol.initial_step), k_(7, std::vector<double>(dim)), tmp_(dim),
          next_(dim)
    {
    }

    /// Integrates y from t to t_end in place.
    void advance(double& t, std::span<double> y, double t_end, IntegrationStats& stats)
    {
        if (t_end <= t) {
            return;
        }
        const std::size_t n = y.size();
        system_(t, std::span<const double>(y.data(), n), std::span<double>(k_[0]));
        ++stats.rhs_evaluations;
        while (t < t_end) {
            double h = std::min(h_, tol_.max_step);
            bool last = false;
            if (t + h >= t_end || t_end - (t + h) < tol_.min_step) {
                h = t_end - t;
                last = true;
            }
            if (h < tol_.min_step) {
                throw StepSizeUnderflowError("step size underflow at t=" + std::to_string(t));
            }
            const double err = attempt(t, y, h, stats);
            if (err <= 1.0) {
                t = last ? t_end : t + h;
                std::copy(next_.begin(), next_.end(), y.begin());
                std::swap(k_[0], k_[6]);
                ++stats.accepted;
                clamp_negative(t, y, stats);
                const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
                // A truncated final step says nothing about the step the controller wanted.
                if (!last || factor < 1.0) {
                    h_ = h * factor;
                }
            }
            else {
                ++stats.rejected;
                h_ = h * std::max(0.2, 0.9 * std::pow(err, -0.2));
                if (h_ < tol_.min_step) {
                    throw StepSizeUnderflowError("step size underflow at t=" + std::to_string(t));
                }
            }
        }
    }

private:
    // Butcher tableau of Dormand & Prince (1980).
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                            b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;

    double attempt(double t, std::span<const double> y, double h, IntegrationStats& stats)
    {
        const std::size_t n = y.size();
        auto& k1 = k_[0];
        auto& k2 = k_[1];
        auto& k3 = k_[2];
        auto& k4 = k_[3];
        auto& k5 = k_[4];
        auto& k6 = k_[5];
        auto& k7 = k_[6];
        auto eval = [&](double tt, std::vector<double>& out) {
            system_(tt, std::span<const double>(tmp_), std::span<double>(out));
            ++stats.rhs_evaluations;
        };
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + h * a21 * k1[i];
        eval(t + c2 * h, k2);
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        eval(t + c3 * h, k3);
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        eval(t + c4 * h, k4);
        for (std::size_t i = 0; i < n; ++i)
            tmp_[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        eval(t + c5 * h, k5);
        for (std::size_t i = 0; i < n; ++i)
            tmp_[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        eval(t + h, k6);
        for (std::size_t i = 0; i < n; ++i)
            next_[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
        std::copy(next_.begin(), next_.end(), tmp_.begin());
        eval(t + h, k7);

        // Max norm: every component individually meets abs + rel * |y|.
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e =
                h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            const double scale = tol_.abs + tol_.rel * std::max(std::abs(y[i]), std::abs(next_[i]));
            err = std::max(err, std::abs(e) / scale);
        }
        if (!std::isfinite(err)) {
            return 1e10;
        }
        return err;
    }

    void clamp_negative(double t, std::span<double> y, IntegrationStats& stats)
    {
        bool changed = false;
        for (double& v : y) {
            if (v < -1e-9) {
                v = 0.0;
                ++stats.clamped;
                changed = true;
            }
        }
        if (changed) {
            // FSAL derivative no longer matches the state.
            system_(t, std::span<const double>(y.data(), y.size()), std::span<double>(k_[0]));
            ++stats.rhs_evaluations;
        }
    }

    System system_;
    Tolerances tol_;
    double h_;
    std::vector<std::vector<double>> k_;
    std::vector<double> tmp_;
    std::vector<double> next_;
};

} // namespace episurr::epi
