#pragma once

#include <numbers>
#include <string>
#include <vector>

namespace apogee {

// Physical constants (ISA sea-level standard).
inline constexpr double kStandardGravity = 9.80665;   // m/s^2
inline constexpr double kSeaLevelDensity = 1.225;     // kg/m^3
inline constexpr double kDefaultScaleHeight = 8500.0; // m

/// Cross section of a 66 mm diameter airframe [m^2].
inline constexpr double kDefaultReferenceArea = std::numbers::pi * 0.033 * 0.033;

/// Solid motor described by its certification-sheet totals plus the two
/// shape knobs of the trapezoidal thrust profile.
struct MotorSpec {
    std::string name;
    double total_impulse = 0.0;   // Ns
    double burn_time = 0.0;       // s
    double propellant_mass = 0.0; // kg
    double ramp_fraction = 0.1;   // fraction of burn spent ramping up
    double decay_fraction = 0.3;  // fraction of burn spent tailing off
    int motor_index = 0;          // position in the motor database

    /// Plateau thrust chosen so the trapezoid integrates to total_impulse [N].
    double peak_thrust() const;

    /// Throws ValidationError naming the offending field.
    void validate() const;
};

/// The latent pair being inferred: theta = (C_d, alpha).
struct FlightParams {
    double cd = 0.0;    // drag coefficient
    double alpha = 1.0; // thrust correction factor
};

struct RocketConfig {
    double dry_mass = 0.0; // kg, airframe plus spent motor casing
    double reference_area = kDefaultReferenceArea; // m^2
    MotorSpec motor;
};

struct SimOptions {
    double rel_tol = 1e-6;
    double abs_tol = 1e-8;  // m for position, m/s for velocity
    double max_time = 120.0; // s
    double gravity = kStandardGravity;
    double sea_level_density = kSeaLevelDensity;
    double scale_height = kDefaultScaleHeight;
    double initial_step = 1e-3; // s
    double max_step = 0.1;      // s
    double safety = 0.9;        // step acceptance safety factor
};

struct TrajectoryPoint {
    double t; // s
    double h; // m
    double v; // m/s
    double m; // kg
};

enum class FlightStatus {
    Ok,
    NoLiftoff, // thrust never exceeded weight before burnout + 1 s
};

struct SimResult {
    double apogee = 0.0;         // m
    double time_to_apogee = 0.0; // s
    FlightStatus status = FlightStatus::Ok;
    std::vector<TrajectoryPoint> trajectory; // accepted integrator steps

    bool lifted_off() const { return status == FlightStatus::Ok; }
};

/// Exponential atmosphere rho0 * exp(-h / H). Negative h clamps to 0.
double air_density(double h, const SimOptions& opts);

/// Trapezoidal thrust profile: linear ramp over [0, f_r*t_b], plateau,
/// linear decay over the final f_d*t_b. Zero outside [0, t_b).
double nominal_thrust(double t, const MotorSpec& motor);

/// alpha * nominal_thrust(t).
double thrust(double t, const MotorSpec& motor, double alpha);

/// Integral of nominal_thrust over [0, t], closed form (piecewise quadratic).
double impulse_delivered(double t, const MotorSpec& motor);

/// Signed quadratic drag 0.5 * rho(h) * v * |v| * cd * area; sign follows v.
double drag_force(double v, double h, double cd, double area, const SimOptions& opts);

/// dry mass + unburned propellant; propellant burns in proportion to the
/// nominal impulse delivered so far (independent of alpha).
double mass_at(double t, const RocketConfig& config);

struct Derivatives {
    double dh; // m/s
    double dv; // m/s^2
};

/// Vertical-flight equations of motion. On the pad (h <= 0) a downward net
/// acceleration is clamped to zero: the rocket sits until thrust wins.
Derivatives derivatives(double t, double h, double v, const FlightParams& params,
                        const RocketConfig& config, const SimOptions& opts);

/// Integrates from rest at the pad with embedded Dormand-Prince RK45 until
/// apogee (v crossing zero from above after liftoff, refined by bisection to
/// 1e-6 s) or max_time. Throws SimulationError on non-finite state.
SimResult simulate_flight(const FlightParams& params, const RocketConfig& config,
                          const SimOptions& opts = {});

} // namespace apogee
