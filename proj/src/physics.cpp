#include "apogee/physics.hpp"

#include <algorithm>
#include <cmath>

#include "apogee/errors.hpp"

namespace apogee {

namespace {

// Dormand-Prince 5(4) coefficients.
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
// 5th-order solution weights (also the a7x row, FSAL).
constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                 b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
// Embedded 4th-order weights.
constexpr double e1 = 5179.0 / 57600.0, e3 = 7571.0 / 16695.0, e4 = 393.0 / 640.0,
                 e5 = -92097.0 / 339200.0, e6 = 187.0 / 2100.0, e7 = 1.0 / 40.0;

constexpr double kEventTimeTol = 1e-6; // s, apogee bisection tolerance
constexpr double kLiftoffGrace = 1.0;  // s past burnout before declaring NoLiftoff

struct State {
    double h;
    double v;
};

struct StepResult {
    State y5;    // 5th-order solution
    State y4;    // embedded 4th-order solution
    Derivatives k7; // derivative at (t + dt, y5), reusable as next k1
};

StepResult dopri_step(double t, const State& y, const Derivatives& k1, double dt,
                      const FlightParams& p, const RocketConfig& cfg, const SimOptions& opts) {
    auto f = [&](double tt, const State& s) { return derivatives(tt, s.h, s.v, p, cfg, opts); };

    const State s2{y.h + dt * a21 * k1.dh, y.v + dt * a21 * k1.dv};
    const Derivatives k2 = f(t + c2 * dt, s2);
    const State s3{y.h + dt * (a31 * k1.dh + a32 * k2.dh), y.v + dt * (a31 * k1.dv + a32 * k2.dv)};
    const Derivatives k3 = f(t + c3 * dt, s3);
    const State s4{y.h + dt * (a41 * k1.dh + a42 * k2.dh + a43 * k3.dh),
                   y.v + dt * (a41 * k1.dv + a42 * k2.dv + a43 * k3.dv)};
    const Derivatives k4 = f(t + c4 * dt, s4);
    const State s5{y.h + dt * (a51 * k1.dh + a52 * k2.dh + a53 * k3.dh + a54 * k4.dh),
                   y.v + dt * (a51 * k1.dv + a52 * k2.dv + a53 * k3.dv + a54 * k4.dv)};
    const Derivatives k5 = f(t + c5 * dt, s5);
    const State s6{y.h + dt * (a61 * k1.dh + a62 * k2.dh + a63 * k3.dh + a64 * k4.dh + a65 * k5.dh),
                   y.v + dt * (a61 * k1.dv + a62 * k2.dv + a63 * k3.dv + a64 * k4.dv + a65 * k5.dv)};
    const Derivatives k6 = f(t + dt, s6);

    StepResult r;
    r.y5 = {y.h + dt * (b1 * k1.dh + b3 * k3.dh + b4 * k4.dh + b5 * k5.dh + b6 * k6.dh),
            y.v + dt * (b1 * k1.dv + b3 * k3.dv + b4 * k4.dv + b5 * k5.dv + b6 * k6.dv)};
    r.k7 = f(t + dt, r.y5);
    r.y4 = {y.h + dt * (e1 * k1.dh + e3 * k3.dh + e4 * k4.dh + e5 * k5.dh + e6 * k6.dh +
                        e7 * r.k7.dh),
            y.v + dt * (e1 * k1.dv + e3 * k3.dv + e4 * k4.dv + e5 * k5.dv + e6 * k6.dv +
                        e7 * r.k7.dv)};
    return r;
}

bool finite(const State& s) { return std::isfinite(s.h) && std::isfinite(s.v); }

} // namespace

double MotorSpec::peak_thrust() const {
    return total_impulse / (burn_time * (1.0 - 0.5 * (ramp_fraction + decay_fraction)));
}

void MotorSpec::validate() const {
    auto fail = [this](const std::string& what) {
        throw ValidationError("motor '" + name + "': " + what);
    };
    if (name.empty()) throw ValidationError("motor with empty name");
    if (!(total_impulse > 0.0)) fail("total_impulse must be > 0");
    if (!(burn_time > 0.0)) fail("burn_time must be > 0");
    if (!(propellant_mass >= 0.0)) fail("propellant_mass must be >= 0");
    if (!(ramp_fraction > 0.0 && ramp_fraction < 1.0)) fail("ramp_fraction must be in (0,1)");
    if (!(decay_fraction > 0.0 && decay_fraction < 1.0)) fail("decay_fraction must be in (0,1)");
    if (!(ramp_fraction + decay_fraction < 1.0))
        fail("ramp_fraction + decay_fraction must be < 1");
}

double air_density(double h, const SimOptions& opts) {
    const double hc = std::max(h, 0.0);
    return opts.sea_level_density * std::exp(-hc / opts.scale_height);
}

double nominal_thrust(double t, const MotorSpec& motor) {
    if (t < 0.0 || t >= motor.burn_time) return 0.0;
    const double ramp_end = motor.ramp_fraction * motor.burn_time;
    const double decay_start = (1.0 - motor.decay_fraction) * motor.burn_time;
    const double peak = motor.peak_thrust();
    if (t < ramp_end) return peak * (t / ramp_end);
    if (t < decay_start) return peak;
    return peak * (motor.burn_time - t) / (motor.burn_time - decay_start);
}

double thrust(double t, const MotorSpec& motor, double alpha) {
    return alpha * nominal_thrust(t, motor);
}

double impulse_delivered(double t, const MotorSpec& motor) {
    if (t <= 0.0) return 0.0;
    if (t >= motor.burn_time) return motor.total_impulse;
    const double ramp_end = motor.ramp_fraction * motor.burn_time;
    const double decay_start = (1.0 - motor.decay_fraction) * motor.burn_time;
    const double decay_len = motor.burn_time - decay_start;
    const double peak = motor.peak_thrust();
    if (t <= ramp_end) return 0.5 * peak * t * t / ramp_end;
    const double ramp_area = 0.5 * peak * ramp_end;
    if (t <= decay_start) return ramp_area + peak * (t - ramp_end);
    const double plateau_area = peak * (decay_start - ramp_end);
    const double u = t - decay_start;
    return ramp_area + plateau_area + peak * (u - 0.5 * u * u / decay_len);
}

double drag_force(double v, double h, double cd, double area, const SimOptions& opts) {
    return 0.5 * air_density(h, opts) * v * std::abs(v) * cd * area;
}

double mass_at(double t, const RocketConfig& config) {
    const MotorSpec& m = config.motor;
    if (t <= 0.0) return config.dry_mass + m.propellant_mass;
    if (t >= m.burn_time) return config.dry_mass;
    const double burned = impulse_delivered(t, m) / m.total_impulse;
    return config.dry_mass + m.propellant_mass * (1.0 - burned);
}

Derivatives derivatives(double t, double h, double v, const FlightParams& params,
                        const RocketConfig& config, const SimOptions& opts) {
    const double m = mass_at(t, config);
    const double T = thrust(t, config.motor, params.alpha);
    const double D = drag_force(v, h, params.cd, config.reference_area, opts);
    const double dv = (T - D - m * opts.gravity) / m;
    if (h <= 0.0 && dv < 0.0) return {0.0, 0.0}; // held by the launch pad
    return {v, dv};
}

SimResult simulate_flight(const FlightParams& params, const RocketConfig& config,
                          const SimOptions& opts) {
    if (!(opts.rel_tol > 0.0) || !(opts.abs_tol > 0.0))
        throw ValidationError("simulate_flight: tolerances must be positive");
    if (!(opts.max_time > config.motor.burn_time))
        throw ValidationError("simulate_flight: max_time must exceed motor burn time");
    if (!(config.dry_mass > 0.0) || !(config.reference_area > 0.0))
        throw ValidationError("simulate_flight: dry_mass and reference_area must be > 0");

    const double liftoff_deadline = config.motor.burn_time + kLiftoffGrace;

    // The thrust profile has corners; land steps exactly on them so every
    // step integrates a smooth right-hand side and the error estimate holds.
    const double breakpoints[] = {config.motor.ramp_fraction * config.motor.burn_time,
                                  (1.0 - config.motor.decay_fraction) * config.motor.burn_time,
                                  config.motor.burn_time};

    SimResult res;
    double t = 0.0;
    State y{0.0, 0.0};
    double dt_prop = std::min(opts.initial_step, opts.max_step);
    bool lifted = false;
    res.trajectory.push_back({t, y.h, y.v, mass_at(t, config)});

    Derivatives k1 = derivatives(t, y.h, y.v, params, config, opts);

    while (t < opts.max_time) {
        double dt = std::min({dt_prop, opts.max_step, opts.max_time - t});
        for (double bp : breakpoints)
            if (t < bp - 1e-12 && t + dt > bp) dt = bp - t;
        const StepResult step = dopri_step(t, y, k1, dt, params, config, opts);
        if (!finite(step.y5)) throw SimulationError("simulate_flight: state became non-finite");

        const double sc_h = opts.abs_tol + opts.rel_tol * std::max(std::abs(y.h), std::abs(step.y5.h));
        const double sc_v = opts.abs_tol + opts.rel_tol * std::max(std::abs(y.v), std::abs(step.y5.v));
        const double eh = (step.y5.h - step.y4.h) / sc_h;
        const double ev = (step.y5.v - step.y4.v) / sc_v;
        const double err = std::sqrt(0.5 * (eh * eh + ev * ev));

        if (err <= 1.0) {
            if (lifted && step.y5.v <= 0.0) {
                // Apogee is inside this step; bisect on the sign of v.
                double lo = 0.0, hi = dt;
                while (hi - lo > kEventTimeTol) {
                    const double mid = 0.5 * (lo + hi);
                    const StepResult probe = dopri_step(t, y, k1, mid, params, config, opts);
                    (probe.y5.v > 0.0 ? lo : hi) = mid;
                }
                const double te = 0.5 * (lo + hi);
                const StepResult ev_step = dopri_step(t, y, k1, te, params, config, opts);
                res.apogee = ev_step.y5.h;
                res.time_to_apogee = t + te;
                res.trajectory.push_back(
                    {t + te, ev_step.y5.h, ev_step.y5.v, mass_at(t + te, config)});
                return res;
            }
            t += dt;
            y = step.y5;
            k1 = step.k7; // FSAL
            res.trajectory.push_back({t, y.h, y.v, mass_at(t, config)});
            if (y.v > 0.0) lifted = true;
            if (!lifted && t > liftoff_deadline) {
                res.status = FlightStatus::NoLiftoff;
                res.apogee = 0.0;
                res.time_to_apogee = 0.0;
                return res;
            }
            const double grow =
                err > 0.0 ? std::min(opts.safety * std::pow(err, -0.2), 5.0) : 5.0;
            dt_prop = dt * std::max(grow, 0.2);
        } else {
            dt_prop = dt * std::clamp(opts.safety * std::pow(err, -0.2), 0.2, 0.9);
        }
        if (dt_prop < 1e-12) throw SimulationError("simulate_flight: step size underflow");
    }

    // max_time reached while still ascending; report the highest point seen.
    double hmax = 0.0, tmax = 0.0;
    for (const auto& p : res.trajectory) {
        if (p.h > hmax) {
            hmax = p.h;
            tmax = p.t;
        }
    }
    res.apogee = hmax;
    res.time_to_apogee = tmax;
    return res;
}

} // namespace apogee
