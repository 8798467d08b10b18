#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <functional>

#include "doctest.h"
#include "dmisac/fisher.hpp"
#include "support.hpp"

using namespace dmisac;
using testsupport::tiny_config;

namespace {

ScenarioConfig one_pair_config() {
    ScenarioConfig cfg;
    cfg.region = {0.0, 0.0, 400.0, 400.0};
    cfg.num_aps = 2;
    cfg.num_antennas = 2;
    cfg.num_ues = 0;
    cfg.num_targets = 1;
    cfg.comm_power_fraction = 0.0;
    cfg.frame.num_instants = 4;
    cfg.ap_positions = {{0.0, 0.0}, {400.0, 30.0}};
    cfg.ap_boresights_rad = {0.6, 3.5};
    cfg.target_positions = {{150.0, 220.0}};
    cfg.selection.strategy = SelectionConfig::Strategy::Fixed;
    cfg.selection.fixed_receive_indices = {1};
    cfg.selection.num_receive_aps = 1;
    return cfg;
}

ScenarioConfig five_ap_config() {
    ScenarioConfig cfg = tiny_config();
    cfg.num_aps = 5;
    cfg.ap_positions.push_back({200.0, 10.0});
    cfg.ap_boresights_rad.push_back(1.5);
    cfg.selection.fixed_receive_indices = {1, 2, 4};
    cfg.selection.num_receive_aps = 3;
    return cfg;
}

Eigen::MatrixXd fd_fim(
    const std::function<Eigen::VectorXcd(const Eigen::VectorXd&)>& mean,
    const Eigen::VectorXd& eta, const Eigen::VectorXd& steps,
    double noise_power_w) {
    Eigen::MatrixXcd jac(mean(eta).size(), eta.size());
    for (int k = 0; k < eta.size(); ++k) {
        Eigen::VectorXd hi = eta, lo = eta;
        hi(k) += steps(k);
        lo(k) -= steps(k);
        jac.col(k) = (mean(hi) - mean(lo)) / (2.0 * steps(k));
    }
    return (2.0 / noise_power_w) * (jac.adjoint() * jac).real();
}

void check_fim_close(const Eigen::MatrixXd& got, const Eigen::MatrixXd& want,
                     double rel) {
    REQUIRE(got.rows() == want.rows());
    for (int i = 0; i < got.rows(); ++i)
        for (int j = 0; j < got.cols(); ++j) {
            const double scale = std::sqrt(want(i, i) * want(j, j));
            CHECK(std::abs(got(i, j) - want(i, j)) <= rel * scale);
        }
}

struct EvalPoint {
    std::vector<int> rx_idx;
    int mt = 0, mr = 0;
    Eigen::MatrixXd gains;       // (t, r) true amplitudes
    Eigen::MatrixXd phases;      // (t, r) full carrier phases
    double phi_fix = 0.0;
};

EvalPoint eval_point(const Scenario& scenario, const TransmitFrame& frame,
                     const Target& target) {
    EvalPoint ep;
    ep.rx_idx = scenario.receive_indices();
    ep.mt = frame.num_transmit_aps();
    ep.mr = static_cast<int>(ep.rx_idx.size());
    ep.gains.resize(ep.mt, ep.mr);
    ep.phases.resize(ep.mt, ep.mr);
    ep.phi_fix = target.reflection_phase_rad;
    for (int t = 0; t < ep.mt; ++t)
        for (int r = 0; r < ep.mr; ++r) {
            const SensingPathParams path = sensing_path_params(
                scenario.aps[frame.transmit_ap_indices[t]],
                scenario.aps[ep.rx_idx[r]], target, scenario.carrier_hz);
            ep.gains(t, r) = path.gain;
            ep.phases(t, r) = path.carrier_phase;
        }
    return ep;
}

}  // namespace

TEST_CASE("shared-phase information matrix matches finite differences") {
    for (int which = 0; which < 2; ++which) {
        const ScenarioConfig cfg = which == 0 ? one_pair_config() : tiny_config();
        for (std::uint64_t seed : {71u, 72u}) {
            const PipelineState st = build_pipeline(cfg, seed, 0, false);
            const Target& target = st.scenario.targets[0];
            const EvalPoint ep = eval_point(st.scenario, st.frame, target);

            auto mean = [&](const Eigen::VectorXd& eta) {
                std::vector<Eigen::MatrixXd> gains(
                    1, Eigen::MatrixXd(ep.mt, ep.mr));
                for (int r = 0; r < ep.mr; ++r)
                    for (int t = 0; t < ep.mt; ++t)
                        gains[0](t, r) = eta(2 + r * ep.mt + t);
                return testsupport::model_mean(
                    st.scenario, st.frame, ep.rx_idx, {{eta(0), eta(1)}}, gains,
                    {eta(eta.size() - 1)});
            };

            Eigen::VectorXd eta(2 + ep.mt * ep.mr + 1);
            Eigen::VectorXd steps(eta.size());
            eta(0) = target.position.x;
            eta(1) = target.position.y;
            steps(0) = steps(1) = 2e-5;
            for (int r = 0; r < ep.mr; ++r)
                for (int t = 0; t < ep.mt; ++t) {
                    eta(2 + r * ep.mt + t) = ep.gains(t, r);
                    steps(2 + r * ep.mt + t) = 1e-3 * ep.gains(t, r);
                }
            eta(eta.size() - 1) = ep.phi_fix;
            steps(eta.size() - 1) = 1e-4;

            const FisherResult res = fisher_coherent(
                st.scenario, st.frame, target, st.noise_power_w);
            const Eigen::MatrixXd fd = fd_fim(mean, eta, steps, st.noise_power_w);
            check_fim_close(res.fim, fd, 1e-5);
        }
    }
}

TEST_CASE("free-gain information matrix matches finite differences") {
    const PipelineState st = build_pipeline(tiny_config(), 73, 0, false);
    const Target& target = st.scenario.targets[0];
    const EvalPoint ep = eval_point(st.scenario, st.frame, target);
    const int pairs = ep.mt * ep.mr;

    auto mean = [&](const Eigen::VectorXd& eta) {
        const Position2D p{eta(0), eta(1)};
        const int n = st.scenario.aps[0].array.num_elements;
        const int len = st.frame.num_instants;
        Eigen::VectorXcd out =
            Eigen::VectorXcd::Zero(Eigen::Index(ep.mr) * len * n);
        for (int r = 0; r < ep.mr; ++r)
            for (int t = 0; t < ep.mt; ++t) {
                const std::complex<double> gamma{eta(2 + r * ep.mt + t),
                                                 eta(2 + pairs + r * ep.mt + t)};
                out.segment(Eigen::Index(r) * len * n, len * n) +=
                    gamma * testsupport::pair_basis_steering(
                                st.scenario, st.frame, t, ep.rx_idx[r], p);
            }
        return out;
    };

    Eigen::VectorXd eta(2 + 2 * pairs);
    Eigen::VectorXd steps(eta.size());
    eta(0) = target.position.x;
    eta(1) = target.position.y;
    steps(0) = steps(1) = 2e-5;
    for (int r = 0; r < ep.mr; ++r)
        for (int t = 0; t < ep.mt; ++t) {
            const std::complex<double> gamma =
                ep.gains(t, r) * std::polar(1.0, ep.phases(t, r));
            eta(2 + r * ep.mt + t) = gamma.real();
            eta(2 + pairs + r * ep.mt + t) = gamma.imag();
            steps(2 + r * ep.mt + t) = 1e-3 * ep.gains(t, r);
            steps(2 + pairs + r * ep.mt + t) = 1e-3 * ep.gains(t, r);
        }

    const FisherResult res =
        fisher_ncp(st.scenario, st.frame, target, st.noise_power_w);
    const Eigen::MatrixXd fd = fd_fim(mean, eta, steps, st.noise_power_w);
    check_fim_close(res.fim, fd, 1e-5);
}

TEST_CASE("information matrices are positive semidefinite") {
    for (std::uint64_t seed : {74u, 75u, 76u}) {
        const PipelineState st = build_pipeline(tiny_config(), seed, 0, false);
        for (Parameterization param :
             {Parameterization::Coherent, Parameterization::NonCoherent}) {
            const FisherResult res =
                fisher_information(st.scenario, st.frame, st.scenario.targets[0],
                                   st.noise_power_w, param);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(res.fim);
            CHECK(es.eigenvalues().minCoeff() >=
                  -1e-8 * es.eigenvalues().cwiseAbs().maxCoeff());
            CHECK((res.fim - res.fim.transpose()).norm() <
                  1e-9 * (1.0 + res.fim.norm()));
        }
    }
}

TEST_CASE("quadrupling transmit power halves the position bound") {
    const PipelineState st = build_pipeline(tiny_config(), 77, 0, false);
    const Target& target = st.scenario.targets[0];
    TransmitFrame loud = st.frame;
    for (auto& x : loud.signals) x *= 2.0;
    for (Parameterization param :
         {Parameterization::Coherent, Parameterization::NonCoherent}) {
        const double base =
            fisher_information(st.scenario, st.frame, target, st.noise_power_w,
                               param)
                .peb_m;
        const double scaled =
            fisher_information(st.scenario, loud, target, st.noise_power_w, param)
                .peb_m;
        CHECK(scaled == doctest::Approx(0.5 * base).epsilon(1e-6));
    }
}

TEST_CASE("carrier-phase information never hurts: coherent bound is tighter") {
    for (std::uint64_t seed : {78u, 79u, 80u, 81u}) {
        const PipelineState st = build_pipeline(tiny_config(2), seed, 0, false);
        for (const Target& target : st.scenario.targets) {
            const double coh =
                fisher_coherent(st.scenario, st.frame, target, st.noise_power_w)
                    .peb_m;
            const double ncp =
                fisher_ncp(st.scenario, st.frame, target, st.noise_power_w).peb_m;
            CHECK(coh <= ncp * (1.0 + 1e-9));
        }
    }
}

TEST_CASE("no receivers means an unobservable geometry") {
    const PipelineState st = build_pipeline(tiny_config(), 82, 0, false);
    Scenario deaf = st.scenario;
    for (APNode& ap : deaf.aps) ap.mode = APMode::Transmit;
    const FisherResult res =
        fisher_coherent(deaf, st.frame, st.scenario.targets[0], st.noise_power_w);
    CHECK(res.singular);
    CHECK(std::isinf(res.peb_m));
}

TEST_CASE("dropping a receiver never improves the bound") {
    const PipelineState st = build_pipeline(five_ap_config(), 83, 0, false);
    const Target& target = st.scenario.targets[0];
    const double full =
        fisher_coherent(st.scenario, st.frame, target, st.noise_power_w).peb_m;

    Scenario fewer = st.scenario;
    fewer.aps[4].mode = APMode::Transmit;  // frame keeps its transmit set
    const double without4 =
        fisher_coherent(fewer, st.frame, target, st.noise_power_w).peb_m;
    CHECK(without4 >= full * (1.0 - 1e-9));

    fewer.aps[2].mode = APMode::Transmit;
    const double without24 =
        fisher_coherent(fewer, st.frame, target, st.noise_power_w).peb_m;
    CHECK(without24 >= without4 * (1.0 - 1e-9));
}

TEST_CASE("per-pair phase nuisances reduce the coherent model to the free-gain bound") {
    for (int which = 0; which < 2; ++which) {
        const ScenarioConfig cfg = which == 0 ? one_pair_config() : tiny_config();
        const PipelineState st = build_pipeline(cfg, 84 + which, 0, false);
        const Target& target = st.scenario.targets[0];
        const EvalPoint ep = eval_point(st.scenario, st.frame, target);
        const int pairs = ep.mt * ep.mr;
        const Position2D p = target.position;
        const int n = st.scenario.aps[0].array.num_elements;
        const int len = st.frame.num_instants;
        const Eigen::Index rows = Eigen::Index(ep.mr) * len * n;

        // Position columns assembled from exact delay derivatives plus a
        // steering part differentiated numerically (well conditioned: the
        // carrier rotation is handled analytically, not by differencing).
        Eigen::MatrixXcd jac = Eigen::MatrixXcd::Zero(rows, 2 + 2 * pairs);
        const double h = 1e-5;
        for (int r = 0; r < ep.mr; ++r) {
            const APNode& rx = st.scenario.aps[ep.rx_idx[r]];
            const APNode* txs[2] = {nullptr, nullptr};
            for (int t = 0; t < ep.mt; ++t) {
                const APNode& tx =
                    st.scenario.aps[st.frame.transmit_ap_indices[t]];
                const std::complex<double> coeff =
                    ep.gains(t, r) * std::polar(1.0, ep.phases(t, r));
                const Eigen::VectorXcd b0 = testsupport::pair_basis_steering(
                    st.scenario, st.frame, t, ep.rx_idx[r], p);
                auto seg = [&](Eigen::MatrixXcd& m, int col) {
                    return m.col(col).segment(Eigen::Index(r) * len * n, len * n);
                };
                // nuisance columns: d/d alpha and d/d phi of alpha e^{j phi} b
                seg(jac, 2 + r * ep.mt + t) =
                    std::polar(1.0, ep.phases(t, r)) * b0;
                seg(jac, 2 + pairs + r * ep.mt + t) =
                    std::complex<double>(0.0, 1.0) * coeff * b0;

                const double d1 = distance(p, tx.position);
                const double d2 = distance(p, rx.position);
                const double dtau_dx =
                    ((p.x - tx.position.x) / d1 + (p.x - rx.position.x) / d2) /
                    kSpeedOfLight;
                const double dtau_dy =
                    ((p.y - tx.position.y) / d1 + (p.y - rx.position.y) / d2) /
                    kSpeedOfLight;
                const std::complex<double> jw{0.0,
                                              -kTwoPi * st.scenario.carrier_hz};
                auto steer = [&](double dx, double dy) {
                    return testsupport::pair_basis_steering(
                        st.scenario, st.frame, t, ep.rx_idx[r],
                        {p.x + dx, p.y + dy});
                };
                seg(jac, 0) += coeff * ((steer(h, 0) - steer(-h, 0)) / (2.0 * h) +
                                        jw * dtau_dx * b0);
                seg(jac, 1) += coeff * ((steer(0, h) - steer(0, -h)) / (2.0 * h) +
                                        jw * dtau_dy * b0);
                (void)txs;
            }
        }

        const Eigen::MatrixXd fim =
            (2.0 / st.noise_power_w) * (jac.adjoint() * jac).real();
        const Eigen::Matrix2d a = fim.topLeftCorner<2, 2>();
        const Eigen::MatrixXd b = fim.topRightCorner(2, 2 * pairs);
        const Eigen::MatrixXd d = fim.bottomRightCorner(2 * pairs, 2 * pairs);
        const Eigen::Matrix2d marginal =
            a - b * d.ldlt().solve(b.transpose());

        const FisherResult ncp =
            fisher_ncp(st.scenario, st.frame, target, st.noise_power_w);
        CHECK((marginal - ncp.position_info).norm() <
              1e-4 * ncp.position_info.norm());
    }
}

TEST_CASE("coverage sampling is deterministic and consistent across threads") {
    const PipelineState st = build_pipeline(tiny_config(), 85, 0, false);
    CoverageConfig cfg;
    cfg.samples = 40;

    RngStream r1(85, 1, StreamTag::CoverageSampling);
    const CoverageResult a = coverage_pebs(st.scenario, st.frame, 1.0,
                                           st.noise_power_w, cfg, r1, true);
    RngStream r2(85, 1, StreamTag::CoverageSampling);
    const CoverageResult b = coverage_pebs(st.scenario, st.frame, 1.0,
                                           st.noise_power_w, cfg, r2, false);
    REQUIRE(a.peb_m.size() == 40);
    REQUIRE(b.peb_m.size() == 40);
    for (std::size_t i = 0; i < a.peb_m.size(); ++i) {
        CHECK(a.points[i].x == b.points[i].x);
        CHECK(a.peb_m[i] == b.peb_m[i]);
        CHECK(a.peb_m[i] > 0.0);
    }

    CHECK(a.fraction_below(0.0) == 0.0);
    CHECK(a.fraction_below(1e30) == 1.0);
    double lo = 1e300, hi = 0.0;
    for (double v : a.peb_m) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(a.median_peb() >= lo);
    CHECK(a.median_peb() <= hi);
    CHECK(a.fraction_below(a.median_peb()) >= 0.5);

    const std::string path = "coverage_test.txt";
    write_coverage(a, path);
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    std::getline(in, line);
    CHECK(line.rfind("#", 0) == 0);
    int rows = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 40);
    in.close();
    std::remove(path.c_str());
}
