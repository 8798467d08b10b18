#include "dmisac/geometry.hpp"

namespace dmisac {

double aod_to_point(const APNode& ap, const Position2D& target) {
    const double dx = target.x - ap.position.x;
    const double dy = target.y - ap.position.y;
    if (dx == 0.0 && dy == 0.0) {
        throw GeometryError("aod_to_point: point coincides with AP");
    }
    return wrap_angle(std::atan2(dy, dx) - ap.boresight_rad);
}

double bistatic_delay(const Position2D& tx, const Position2D& scatter,
                      const Position2D& rx) {
    const double d1 = distance(tx, scatter);
    const double d2 = distance(scatter, rx);
    if (d1 == 0.0 || d2 == 0.0) {
        throw GeometryError("bistatic_delay: zero-length propagation leg");
    }
    return (d1 + d2) / kSpeedOfLight;
}

Eigen::VectorXcd steering_vector(const ArrayGeometry& array, double theta_rad) {
    if (array.num_elements < 1) {
        throw GeometryError("steering_vector: array needs at least one element");
    }
    if (array.num_elements > 1 && array.wavelength_m <= 0.0) {
        throw GeometryError("steering_vector: wavelength must be positive");
    }
    Eigen::VectorXcd a(array.num_elements);
    const double k = array.num_elements > 1
                         ? kTwoPi * array.spacing_m / array.wavelength_m
                         : 0.0;
    const double phase_step = k * std::sin(theta_rad);
    for (int n = 0; n < array.num_elements; ++n) {
        const double p = phase_step * n;
        a(n) = std::complex<double>(std::cos(p), std::sin(p));
    }
    return a;
}

Eigen::VectorXcd steering_vector_derivative(const ArrayGeometry& array,
                                            double theta_rad) {
    Eigen::VectorXcd a = steering_vector(array, theta_rad);
    const double k = array.num_elements > 1
                         ? kTwoPi * array.spacing_m / array.wavelength_m
                         : 0.0;
    const double factor = k * std::cos(theta_rad);
    for (int n = 0; n < array.num_elements; ++n) {
        a(n) *= std::complex<double>(0.0, factor * n);
    }
    return a;
}

}  // namespace dmisac
