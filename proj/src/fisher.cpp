#include "dmisac/fisher.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "dmisac/errors.hpp"

namespace dmisac {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::complex<double> unit_polar(double phase) {
    return {std::cos(phase), std::sin(phase)};
}

struct AngleDerivs {
    double angle = 0.0;
    double d_dx = 0.0, d_dy = 0.0;      // of the angle
    double range = 0.0;
    double dr_dx = 0.0, dr_dy = 0.0;    // of the range
};

AngleDerivs angle_derivs(const APNode& ap, const Position2D& p) {
    AngleDerivs out;
    const double dx = p.x - ap.position.x;
    const double dy = p.y - ap.position.y;
    const double d2 = dx * dx + dy * dy;
    out.range = std::sqrt(d2);
    if (out.range < 1e-9) throw GeometryError("fisher: target coincides with AP");
    out.angle = aod_to_point(ap, p);
    out.d_dx = -dy / d2;
    out.d_dy = dx / d2;
    out.dr_dx = dx / out.range;
    out.dr_dy = dy / out.range;
    return out;
}

Eigen::MatrixXd fim_impl(const Scenario& scenario, const TransmitFrame& frame,
                         const Target& target, double noise_power_w,
                         Parameterization param) {
    const std::vector<int> rx_idx = scenario.receive_indices();
    const int mt = frame.num_transmit_aps();
    const int mr = static_cast<int>(rx_idx.size());
    const int len = frame.num_instants;
    const double f = scenario.carrier_hz;
    const bool coherent = param == Parameterization::Coherent;
    const int num_params =
        coherent ? 2 + mt * mr + 1 : 2 + 2 * mt * mr;
    Eigen::MatrixXd fim = Eigen::MatrixXd::Zero(num_params, num_params);
    if (mr == 0 || mt == 0) return fim;
    if (noise_power_w <= 0.0)
        throw ConfigError("fisher: noise power must be positive");

    // per-transmitter illumination and its angle derivative
    std::vector<AngleDerivs> tx_geom(mt);
    Eigen::MatrixXcd s(mt, len), ds(mt, len);
    for (int t = 0; t < mt; ++t) {
        const APNode& tx = scenario.aps[frame.transmit_ap_indices[t]];
        tx_geom[t] = angle_derivs(tx, target.position);
        const Eigen::VectorXcd a = steering_vector(tx.array, tx_geom[t].angle);
        const Eigen::VectorXcd da =
            steering_vector_derivative(tx.array, tx_geom[t].angle);
        s.row(t) = a.transpose() * frame.signals[t];
        ds.row(t) = da.transpose() * frame.signals[t];
    }

    for (int r = 0; r < mr; ++r) {
        const APNode& rx = scenario.aps[rx_idx[r]];
        const int n = rx.array.num_elements;
        const AngleDerivs rg = angle_derivs(rx, target.position);
        const Eigen::VectorXcd u = steering_vector(rx.array, rg.angle);
        const Eigen::VectorXcd du = steering_vector_derivative(rx.array, rg.angle);

        Eigen::MatrixXcd jac = Eigen::MatrixXcd::Zero(n * len, num_params);
        for (int t = 0; t < mt; ++t) {
            const APNode& tx = scenario.aps[frame.transmit_ap_indices[t]];
            const SensingPathParams path =
                sensing_path_params(tx, rx, target, f);
            const std::complex<double> coeff =
                path.gain * unit_polar(path.carrier_phase);
            const double dpsi_dx =
                -(kTwoPi * f / kSpeedOfLight) * (tx_geom[t].dr_dx + rg.dr_dx);
            const double dpsi_dy =
                -(kTwoPi * f / kSpeedOfLight) * (tx_geom[t].dr_dy + rg.dr_dy);

            for (int l = 0; l < len; ++l) {
                for (int i = 0; i < n; ++i) {
                    const int row = i + n * l;
                    const std::complex<double> basis = u(i) * s(t, l);
                    // steering responses move with the hypothesis position
                    std::complex<double> dmu_dx =
                        coeff * (du(i) * rg.d_dx * s(t, l) +
                                 u(i) * ds(t, l) * tx_geom[t].d_dx);
                    std::complex<double> dmu_dy =
                        coeff * (du(i) * rg.d_dy * s(t, l) +
                                 u(i) * ds(t, l) * tx_geom[t].d_dy);
                    if (coherent) {
                        // the carrier phase tracks the bistatic delay
                        const std::complex<double> jmu =
                            std::complex<double>(0.0, 1.0) * coeff * basis;
                        dmu_dx += jmu * dpsi_dx;
                        dmu_dy += jmu * dpsi_dy;
                        jac(row, 2 + r * mt + t) =
                            unit_polar(path.carrier_phase) * basis;
                        jac(row, num_params - 1) += jmu;
                    } else {
                        jac(row, 2 + r * mt + t) = basis;
                        jac(row, 2 + mt * mr + r * mt + t) =
                            std::complex<double>(0.0, 1.0) * basis;
                    }
                    jac(row, 0) += dmu_dx;
                    jac(row, 1) += dmu_dy;
                }
            }
        }
        fim.noalias() +=
            (2.0 / noise_power_w) * (jac.adjoint() * jac).real();
    }
    return fim;
}

/// Effective position information: Schur complement of the 2x2 position block
/// with a spectral pseudo-inverse of the nuisance block.
Eigen::Matrix2d schur_position(const Eigen::MatrixXd& fim) {
    const int p = static_cast<int>(fim.rows());
    const Eigen::Matrix2d a = fim.topLeftCorner<2, 2>();
    if (p == 2) return a;
    const Eigen::MatrixXd b = fim.topRightCorner(2, p - 2);
    const Eigen::MatrixXd d = fim.bottomRightCorner(p - 2, p - 2);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d);
    if (es.info() != Eigen::Success) return Eigen::Matrix2d::Zero();
    const Eigen::VectorXd ev = es.eigenvalues();
    const double tol = 1e-12 * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
    for (int i = 0; i < ev.size(); ++i)
        if (ev(i) > tol) inv(i) = 1.0 / ev(i);
    const Eigen::MatrixXd d_pinv =
        es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
    return a - b * d_pinv * b.transpose();
}

FisherResult finalize(Eigen::MatrixXd fim, Parameterization param) {
    FisherResult out;
    out.parameterization = param;
    out.position_info = schur_position(fim);
    out.fim = std::move(fim);
    const double det = out.position_info.determinant();
    const double tr = out.position_info.trace();
    if (det <= 0.0 || tr <= 0.0 || !std::isfinite(det)) {
        out.singular = true;
        out.peb_m = kInf;
    } else {
        out.peb_m = std::sqrt(tr / det);  // trace of the 2x2 inverse
    }
    return out;
}

}  // namespace

FisherResult fisher_coherent(const Scenario& scenario, const TransmitFrame& frame,
                             const Target& target, double noise_power_w) {
    return finalize(fim_impl(scenario, frame, target, noise_power_w,
                             Parameterization::Coherent),
                    Parameterization::Coherent);
}

FisherResult fisher_ncp(const Scenario& scenario, const TransmitFrame& frame,
                        const Target& target, double noise_power_w) {
    return finalize(fim_impl(scenario, frame, target, noise_power_w,
                             Parameterization::NonCoherent),
                    Parameterization::NonCoherent);
}

FisherResult fisher_information(const Scenario& scenario,
                                const TransmitFrame& frame, const Target& target,
                                double noise_power_w, Parameterization param) {
    return param == Parameterization::Coherent
               ? fisher_coherent(scenario, frame, target, noise_power_w)
               : fisher_ncp(scenario, frame, target, noise_power_w);
}

double CoverageResult::fraction_below(double threshold_m) const {
    if (peb_m.empty()) return 0.0;
    std::size_t count = 0;
    for (double v : peb_m)
        if (v <= threshold_m) ++count;
    return static_cast<double>(count) / static_cast<double>(peb_m.size());
}

double CoverageResult::median_peb() const {
    if (peb_m.empty()) return kInf;
    std::vector<double> sorted = peb_m;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    return n % 2 ? sorted[n / 2]
                 : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

CoverageResult coverage_pebs(const Scenario& scenario, const TransmitFrame& frame,
                             double rcs_sqm, double noise_power_w,
                             const CoverageConfig& cfg, RngStream& rng,
                             bool parallel) {
    if (cfg.samples < 1) throw ConfigError("coverage: need at least one sample");
    CoverageResult out;
    out.points.reserve(cfg.samples);
    for (int i = 0; i < cfg.samples; ++i) {
        const double x = rng.uniform(scenario.region.xmin, scenario.region.xmax);
        const double y = rng.uniform(scenario.region.ymin, scenario.region.ymax);
        out.points.push_back({x, y});
    }
    out.peb_m.assign(out.points.size(), kInf);

    const std::int64_t n = static_cast<std::int64_t>(out.points.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
    for (std::int64_t i = 0; i < n; ++i) {
        Target probe;
        probe.position = out.points[static_cast<std::size_t>(i)];
        probe.rcs_sqm = rcs_sqm;
        probe.reflection_phase_rad = 0.0;
        try {
            out.peb_m[static_cast<std::size_t>(i)] =
                fisher_coherent(scenario, frame, probe, noise_power_w).peb_m;
        } catch (const GeometryError&) {
            // sample sits on an AP: unobservable, leave it at infinity
        }
    }
    (void)parallel;
    return out;
}

void write_coverage(const CoverageResult& coverage, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("write_coverage: cannot open " + path);
    out.precision(17);
    out << "# x y peb_m\n";
    for (std::size_t i = 0; i < coverage.points.size(); ++i)
        out << coverage.points[i].x << " " << coverage.points[i].y << " "
            << coverage.peb_m[i] << "\n";
    if (!out) throw IoError("write_coverage: write failed");
}

}  // namespace dmisac
