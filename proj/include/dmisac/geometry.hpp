#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "dmisac/constants.hpp"
#include "dmisac/errors.hpp"

namespace dmisac {

struct Position2D {
    double x = 0.0;
    double y = 0.0;
};

inline double distance(const Position2D& a, const Position2D& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

/// Uniform linear array: element n sits at n * spacing along the array axis,
/// angles are measured against the boresight normal.
struct ArrayGeometry {
    int num_elements = 1;
    double spacing_m = 0.0;     // inter-element spacing
    double wavelength_m = 0.0;  // carrier wavelength
};

enum class APMode { Transmit, Receive };

struct APNode {
    Position2D position;
    double boresight_rad = 0.0;
    ArrayGeometry array;
    double max_power_w = 0.0;        // per-AP power budget P_t
    double comm_power_fraction = 1;  // rho_t, share of budget for communication
    APMode mode = APMode::Transmit;
};

/// Wraps an angle to [0, 2*pi).
inline double wrap_angle(double a) {
    double w = std::fmod(a, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    return w;
}

/// Azimuth of `target` as seen from `ap`, relative to the AP boresight,
/// in [0, 2*pi). Throws GeometryError for coincident points.
double aod_to_point(const APNode& ap, const Position2D& target);

/// Two-leg propagation delay tx -> scatter -> rx in seconds.
double bistatic_delay(const Position2D& tx, const Position2D& scatter,
                      const Position2D& rx);

/// ULA response a(theta), element n = exp(j * n * (2*pi*d/lambda) * sin(theta)).
Eigen::VectorXcd steering_vector(const ArrayGeometry& array, double theta_rad);

/// d a(theta) / d theta, used by the Fisher-information module.
Eigen::VectorXcd steering_vector_derivative(const ArrayGeometry& array,
                                            double theta_rad);

}  // namespace dmisac
