#pragma once

// Test-only reference implementations, deliberately independent of the
// library's integration path: a fixed-step explicit-Euler flight integrator
// and adaptive Simpson quadrature. Slow and unambiguous.

#include <cmath>
#include <functional>

#include "apogee/physics.hpp"

namespace oracles {

/// Brute-force apogee: explicit Euler at a fixed (tiny) step, same
/// derivative function and pad clamp as the real simulator. Returns 0 when
/// the rocket never lifts off.
inline double euler_apogee(const apogee::FlightParams& params, const apogee::RocketConfig& config,
                           const apogee::SimOptions& opts, double dt = 1e-5) {
    double t = 0.0, h = 0.0, v = 0.0;
    bool lifted = false;
    const double liftoff_deadline = config.motor.burn_time + 1.0;
    while (t < opts.max_time) {
        const apogee::Derivatives d = apogee::derivatives(t, h, v, params, config, opts);
        h += dt * d.dh;
        v += dt * d.dv;
        t += dt;
        if (v > 0.0) lifted = true;
        if (lifted && v <= 0.0) return h;
        if (!lifted && t > liftoff_deadline) return 0.0;
    }
    return h;
}

inline double simpson(const std::function<double(double)>& f, double a, double b) {
    return (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b));
}

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b,
                                   double whole, double tol, int depth) {
    const double mid = 0.5 * (a + b);
    const double left = simpson(f, a, mid);
    const double right = simpson(f, mid, b);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson_rec(f, a, mid, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, mid, b, right, 0.5 * tol, depth - 1);
}

/// Adaptive Simpson quadrature of f over [a, b].
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-12) {
    return adaptive_simpson_rec(f, a, b, simpson(f, a, b), tol, 60);
}

} // namespace oracles
