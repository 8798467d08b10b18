#include "dmisac/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include <boost/math/special_functions/beta.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dmisac {

namespace {

constexpr double kDegenerateDistance = 1e-9;

std::complex<double> unit_polar(double phase) {
    return {std::cos(phase), std::sin(phase)};
}

bool hypothesis_degenerate(const SensingContext& ctx, const Position2D& p) {
    for (const APNode* ap : ctx.tx)
        if (distance(ap->position, p) < kDegenerateDistance) return true;
    for (const APNode* ap : ctx.rx)
        if (distance(ap->position, p) < kDegenerateDistance) return true;
    return false;
}

}  // namespace

double EchoSet::total_energy() const {
    double e = 0.0;
    for (const auto& y : samples) e += y.squaredNorm();
    return e;
}

EchoSet synthesize_echoes(const Scenario& scenario, const TransmitFrame& frame,
                          RngStream& noise_rng, double noise_power_w) {
    EchoSet echoes;
    echoes.receive_ap_indices = scenario.receive_indices();
    echoes.noise_power_w = noise_power_w;
    echoes.carrier_hz = scenario.carrier_hz;
    if (echoes.receive_ap_indices.empty())
        throw ConfigError("synthesize_echoes: no receive AP in scenario");

    const int mt = frame.num_transmit_aps();
    const int len = frame.num_instants;
    echoes.samples.reserve(echoes.receive_ap_indices.size());
    for (int r_idx : echoes.receive_ap_indices) {
        const APNode& rx = scenario.aps[r_idx];
        const int n = rx.array.num_elements;
        Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, len);
        for (const Target& target : scenario.targets) {
            for (int t = 0; t < mt; ++t) {
                const APNode& tx = scenario.aps[frame.transmit_ap_indices[t]];
                const SensingPathParams p =
                    sensing_path_params(tx, rx, target, scenario.carrier_hz);
                const Eigen::VectorXcd a_rx = steering_vector(rx.array, p.aoa_rad);
                const Eigen::VectorXcd a_tx = steering_vector(tx.array, p.aod_rad);
                const std::complex<double> coeff =
                    p.gain * unit_polar(p.carrier_phase);
                // rank-one channel: a_rx (a_tx^T x_t[l]) per instant
                const Eigen::RowVectorXcd illum =
                    a_tx.transpose() * frame.signals[t];
                y.noalias() += coeff * a_rx * illum;
            }
        }
        if (noise_power_w > 0.0) {
            for (int l = 0; l < len; ++l)
                for (int i = 0; i < n; ++i)
                    y(i, l) += noise_rng.complex_gaussian(noise_power_w);
        }
        echoes.samples.push_back(std::move(y));
    }
    return echoes;
}

SensingContext make_context(const Scenario& scenario, const TransmitFrame& frame,
                            const EchoSet& echoes) {
    SensingContext ctx;
    ctx.scenario = &scenario;
    ctx.frame = &frame;
    ctx.echoes = &echoes;
    for (int t : frame.transmit_ap_indices) ctx.tx.push_back(&scenario.aps[t]);
    for (int r : echoes.receive_ap_indices) ctx.rx.push_back(&scenario.aps[r]);
    if (ctx.tx.empty() || ctx.rx.empty())
        throw ConfigError("make_context: need at least one AP on each side");
    if (echoes.num_instants() != frame.num_instants)
        throw ConfigError("make_context: echo/frame length mismatch");
    for (const auto& y : echoes.samples)
        if (y.rows() != ctx.rx[0]->array.num_elements)
            throw ConfigError("make_context: echo antenna count mismatch");
    ctx.echo_energy = echoes.total_energy();
    return ctx;
}

// ---------------------------------------------------------------------------
// Non-coherent (free complex gain) cost
// ---------------------------------------------------------------------------

double ncp_score(const SensingContext& ctx, const Position2D& p) {
    if (hypothesis_degenerate(ctx, p)) return 0.0;
    const int mt = static_cast<int>(ctx.tx.size());
    const int mr = static_cast<int>(ctx.rx.size());
    const int len = ctx.frame->num_instants;
    const int n = ctx.rx[0]->array.num_elements;

    // Per-transmitter illumination of the hypothesis: s_t[l] = a(aod_t)^T x_t[l].
    Eigen::MatrixXcd s(mt, len);
    for (int t = 0; t < mt; ++t) {
        const Eigen::VectorXcd a =
            steering_vector(ctx.tx[t]->array, aod_to_point(*ctx.tx[t], p));
        s.row(t) = a.transpose() * ctx.frame->signals[t];
    }

    // Joint least squares over the per-(t, r) complex gains. The per-receiver
    // Gram matrix N * sum_l s s^H is shared by all receivers.
    Eigen::MatrixXcd gram = double(n) * (s.conjugate() * s.transpose());
    const double ridge = 1e-12 * gram.diagonal().real().maxCoeff();
    if (!(ridge > 0.0)) return 0.0;
    gram.diagonal().array() += ridge;
    Eigen::LLT<Eigen::MatrixXcd> llt(gram);
    if (llt.info() != Eigen::Success) return 0.0;

    double explained = 0.0;
    for (int r = 0; r < mr; ++r) {
        const Eigen::VectorXcd u =
            steering_vector(ctx.rx[r]->array, aod_to_point(*ctx.rx[r], p));
        const Eigen::RowVectorXcd w = u.adjoint() * ctx.echoes->samples[r];
        const Eigen::VectorXcd c = s.conjugate() * w.transpose();
        explained += c.dot(llt.solve(c)).real();
    }
    return std::max(explained, 0.0);
}

double ncp_cost(const SensingContext& ctx, const Position2D& p) {
    return std::max(ctx.echo_energy - ncp_score(ctx, p), 0.0);
}

// ---------------------------------------------------------------------------
// Coherent cost: exact profile over real amplitudes and shared phase offsets
// ---------------------------------------------------------------------------

namespace {

struct CoherentPrecomp {
    int mt = 0, mr = 0, num_targets = 0, dim = 0;  // dim = mt * num_targets
    bool degenerate = false;
    std::vector<Eigen::MatrixXcd> gram;  // per receiver, phase-folded, dim x dim
    std::vector<Eigen::VectorXcd> corr;  // per receiver, phase-folded, dim
};

/// Builds the per-receiver compressed quantities at the hypothesis positions.
/// Flat index i = s * mt + t.
CoherentPrecomp coherent_precompute(const SensingContext& ctx,
                                    const std::vector<Position2D>& positions) {
    CoherentPrecomp pre;
    pre.mt = static_cast<int>(ctx.tx.size());
    pre.mr = static_cast<int>(ctx.rx.size());
    pre.num_targets = static_cast<int>(positions.size());
    pre.dim = pre.mt * pre.num_targets;
    for (const Position2D& p : positions)
        if (hypothesis_degenerate(ctx, p)) pre.degenerate = true;
    if (pre.degenerate || pre.dim == 0) return pre;

    const int len = ctx.frame->num_instants;
    const double f = ctx.carrier();

    Eigen::MatrixXcd illum(pre.dim, len);       // g_{t,s}[l]
    Eigen::MatrixXd psi(pre.dim, pre.mr);       // delay phases -2 pi f tau
    std::vector<Eigen::VectorXcd> u(pre.mr * pre.num_targets);  // arrival steering
    for (int s = 0; s < pre.num_targets; ++s) {
        for (int t = 0; t < pre.mt; ++t) {
            const Eigen::VectorXcd a = steering_vector(
                ctx.tx[t]->array, aod_to_point(*ctx.tx[t], positions[s]));
            illum.row(s * pre.mt + t) = a.transpose() * ctx.frame->signals[t];
        }
        for (int r = 0; r < pre.mr; ++r) {
            u[r * pre.num_targets + s] = steering_vector(
                ctx.rx[r]->array, aod_to_point(*ctx.rx[r], positions[s]));
            for (int t = 0; t < pre.mt; ++t) {
                const double tau =
                    bistatic_delay(ctx.tx[t]->position, positions[s],
                                   ctx.rx[r]->position);
                psi(s * pre.mt + t, r) = -kTwoPi * f * tau;
            }
        }
    }

    const Eigen::MatrixXcd cross = illum.conjugate() * illum.transpose();

    pre.gram.resize(pre.mr);
    pre.corr.resize(pre.mr);
    for (int r = 0; r < pre.mr; ++r) {
        Eigen::MatrixXcd m(pre.dim, pre.dim);
        for (int i = 0; i < pre.dim; ++i) {
            const int si = i / pre.mt;
            for (int k = 0; k < pre.dim; ++k) {
                const int sk = k / pre.mt;
                const std::complex<double> align =
                    u[r * pre.num_targets + si].dot(u[r * pre.num_targets + sk]);
                m(i, k) = unit_polar(psi(k, r) - psi(i, r)) * align * cross(i, k);
            }
        }
        pre.gram[r] = std::move(m);

        Eigen::VectorXcd h(pre.dim);
        for (int s = 0; s < pre.num_targets; ++s) {
            const Eigen::RowVectorXcd w =
                u[r * pre.num_targets + s].adjoint() * ctx.echoes->samples[r];
            const Eigen::VectorXcd c =
                illum.middleRows(s * pre.mt, pre.mt).conjugate() * w.transpose();
            for (int t = 0; t < pre.mt; ++t) {
                const int i = s * pre.mt + t;
                h(i) = unit_polar(-psi(i, r)) * c(t);
            }
        }
        pre.corr[r] = std::move(h);
    }
    return pre;
}

/// Explained energy for fixed per-target phase offsets: the real-amplitude
/// least squares is solved exactly per receiver.
double coherent_explained(const CoherentPrecomp& pre,
                          const Eigen::VectorXd& phases,
                          std::vector<Eigen::VectorXd>* amplitudes_out = nullptr) {
    Eigen::VectorXcd rot(pre.dim);
    for (int i = 0; i < pre.dim; ++i) rot(i) = unit_polar(phases(i / pre.mt));

    double explained = 0.0;
    if (amplitudes_out) amplitudes_out->assign(pre.mr, Eigen::VectorXd());
    for (int r = 0; r < pre.mr; ++r) {
        Eigen::MatrixXd g(pre.dim, pre.dim);
        Eigen::VectorXd v(pre.dim);
        for (int i = 0; i < pre.dim; ++i) {
            v(i) = (std::conj(rot(i)) * pre.corr[r](i)).real();
            for (int k = 0; k < pre.dim; ++k)
                g(i, k) = (std::conj(rot(i)) * pre.gram[r](i, k) * rot(k)).real();
        }
        const double ridge = 1e-12 * g.diagonal().maxCoeff();
        if (!(ridge > 0.0)) {
            if (amplitudes_out)
                (*amplitudes_out)[r] = Eigen::VectorXd::Zero(pre.dim);
            continue;
        }
        g.diagonal().array() += ridge;
        Eigen::LLT<Eigen::MatrixXd> llt(g);
        if (llt.info() != Eigen::Success) {
            if (amplitudes_out)
                (*amplitudes_out)[r] = Eigen::VectorXd::Zero(pre.dim);
            continue;
        }
        const Eigen::VectorXd x = llt.solve(v);
        explained += v.dot(x);
        if (amplitudes_out) (*amplitudes_out)[r] = x;
    }
    return std::max(explained, 0.0);
}

/// Single-target case in closed form: the explained energy is a quadratic
/// form in (cos phi, sin phi), so the optimum is the top eigenpair of a
/// 2 x 2 accumulated matrix.
double coherent_single_target(const CoherentPrecomp& pre, double* phase_out) {
    double q11 = 0.0, q12 = 0.0, q22 = 0.0;
    for (int r = 0; r < pre.mr; ++r) {
        Eigen::MatrixXd g = pre.gram[r].real();
        const double ridge = 1e-12 * g.diagonal().maxCoeff();
        if (!(ridge > 0.0)) continue;
        g.diagonal().array() += ridge;
        Eigen::LLT<Eigen::MatrixXd> llt(g);
        if (llt.info() != Eigen::Success) continue;
        const Eigen::VectorXd a = pre.corr[r].real();
        const Eigen::VectorXd b = pre.corr[r].imag();
        const Eigen::VectorXd ga = llt.solve(a);
        const Eigen::VectorXd gb = llt.solve(b);
        q11 += a.dot(ga);
        q12 += a.dot(gb);
        q22 += b.dot(gb);
    }
    const double mean = 0.5 * (q11 + q22);
    const double diff = 0.5 * (q11 - q22);
    const double radius = std::sqrt(diff * diff + q12 * q12);
    const double lambda_max = mean + radius;
    if (phase_out) {
        double vx = q12, vy = lambda_max - q11;
        if (std::abs(vx) + std::abs(vy) < 1e-300) {
            vx = lambda_max - q22;
            vy = q12;
        }
        if (std::abs(vx) + std::abs(vy) < 1e-300) vx = 1.0;
        *phase_out = std::atan2(vy, vx);
    }
    return std::max(lambda_max, 0.0);
}

double golden_section_phase(const CoherentPrecomp& pre, Eigen::VectorXd& phases,
                            int coord, double lo, double hi) {
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    auto eval = [&](double v) {
        phases(coord) = v;
        return coherent_explained(pre, phases);
    };
    double a = lo, b = hi;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = eval(x1), f2 = eval(x2);
    for (int it = 0; it < 40 && (b - a) > 1e-10; ++it) {
        if (f1 < f2) {  // maximize explained energy
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = eval(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = eval(x1);
        }
    }
    const double best = f1 > f2 ? x1 : x2;
    phases(coord) = best;
    return eval(best);
}

/// Maximizes the explained energy over the per-target phase offsets
/// (pi-periodic). Coordinate sweeps with an optional coarse first pass.
double optimize_phases(const CoherentPrecomp& pre, Eigen::VectorXd& phases,
                       bool coarse_first) {
    const int s_count = pre.num_targets;
    double best = coherent_explained(pre, phases);
    for (int sweep = 0; sweep < 24; ++sweep) {
        const double before = best;
        for (int s = 0; s < s_count; ++s) {
            if (coarse_first && sweep == 0) {
                double best_v = phases(s), best_q = best;
                for (int g = 0; g < 16; ++g) {
                    phases(s) = g * kPi / 16.0;
                    const double q = coherent_explained(pre, phases);
                    if (q > best_q) {
                        best_q = q;
                        best_v = phases(s);
                    }
                }
                phases(s) = best_v;
                best = best_q;
            }
            best = golden_section_phase(pre, phases, s, phases(s) - kPi / 8.0,
                                        phases(s) + kPi / 8.0);
            // widen once if the boundary was hit
        }
        if (best - before <= 1e-12 * std::max(best, 1e-300)) break;
    }
    return best;
}

}  // namespace

CoherentProfile coherent_profile(const SensingContext& ctx,
                                 const std::vector<Position2D>& positions,
                                 const std::vector<double>* warm_phases) {
    CoherentProfile out;
    const int s_count = static_cast<int>(positions.size());
    out.phase_offsets.assign(s_count, 0.0);
    const CoherentPrecomp pre = coherent_precompute(ctx, positions);
    if (pre.degenerate || pre.dim == 0) {
        out.cost = ctx.echo_energy;
        out.amplitudes.assign(
            s_count, Eigen::MatrixXd::Zero(static_cast<int>(ctx.tx.size()),
                                           static_cast<int>(ctx.rx.size())));
        return out;
    }

    Eigen::VectorXd phases(s_count);
    double explained = 0.0;
    if (s_count == 1) {
        double phi = 0.0;
        explained = coherent_single_target(pre, &phi);
        phases(0) = phi;
    } else {
        bool coarse = true;
        if (warm_phases && static_cast<int>(warm_phases->size()) == s_count) {
            for (int s = 0; s < s_count; ++s) phases(s) = (*warm_phases)[s];
            coarse = false;
        } else {
            // decoupled per-target closed form as the starting point
            for (int s = 0; s < s_count; ++s) {
                CoherentPrecomp sub;
                sub.mt = pre.mt;
                sub.mr = pre.mr;
                sub.num_targets = 1;
                sub.dim = pre.mt;
                sub.gram.resize(pre.mr);
                sub.corr.resize(pre.mr);
                for (int r = 0; r < pre.mr; ++r) {
                    sub.gram[r] =
                        pre.gram[r].block(s * pre.mt, s * pre.mt, pre.mt, pre.mt);
                    sub.corr[r] = pre.corr[r].segment(s * pre.mt, pre.mt);
                }
                double phi = 0.0;
                coherent_single_target(sub, &phi);
                phases(s) = phi;
            }
        }
        explained = optimize_phases(pre, phases, coarse);
    }

    std::vector<Eigen::VectorXd> amp_by_r;
    explained = std::max(explained, coherent_explained(pre, phases, &amp_by_r));
    out.cost = std::max(ctx.echo_energy - explained, 0.0);

    out.amplitudes.assign(s_count, Eigen::MatrixXd::Zero(pre.mt, pre.mr));
    for (int s = 0; s < s_count; ++s) {
        double phi = wrap_angle(phases(s));
        double sign = 1.0;
        if (phi >= kPi) {  // report the phase modulo pi, fold the sign into alpha
            phi -= kPi;
            sign = -1.0;
        }
        out.phase_offsets[s] = phi;
        for (int r = 0; r < pre.mr; ++r)
            for (int t = 0; t < pre.mt; ++t)
                out.amplitudes[s](t, r) = sign * amp_by_r[r](s * pre.mt + t);
    }
    return out;
}

double coherent_cost(const SensingContext& ctx,
                     const std::vector<Position2D>& positions) {
    if (positions.empty()) return ctx.echo_energy;
    if (positions.size() == 1) {
        const CoherentPrecomp pre = coherent_precompute(ctx, positions);
        if (pre.degenerate) return ctx.echo_energy;
        const double explained = coherent_single_target(pre, nullptr);
        return std::max(ctx.echo_energy - explained, 0.0);
    }
    return coherent_profile(ctx, positions).cost;
}

// ---------------------------------------------------------------------------
// Grid scan and CFAR detection
// ---------------------------------------------------------------------------

namespace {

CostMap scan_impl(const SensingContext& ctx, const GridSpec& grid, bool parallel) {
    if (grid.spacing_m <= 0.0) throw ConfigError("scan: spacing must be positive");
    const Region& reg = ctx.scenario->region;
    CostMap map;
    map.x0 = reg.xmin + grid.margin_m;
    map.y0 = reg.ymin + grid.margin_m;
    map.spacing = grid.spacing_m;
    map.nx = static_cast<int>(
                 std::floor((reg.width() - 2.0 * grid.margin_m) / grid.spacing_m)) +
             1;
    map.ny = static_cast<int>(
                 std::floor((reg.height() - 2.0 * grid.margin_m) / grid.spacing_m)) +
             1;
    if (map.nx < 1 || map.ny < 1) throw ConfigError("scan: empty grid");
    map.echo_energy = ctx.echo_energy;
    map.cost.assign(static_cast<size_t>(map.nx) * map.ny, 0.0);

    const std::int64_t cells = static_cast<std::int64_t>(map.nx) * map.ny;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
    for (std::int64_t idx = 0; idx < cells; ++idx) {
        const int iy = static_cast<int>(idx / map.nx);
        const int ix = static_cast<int>(idx % map.nx);
        map.cost[idx] = ncp_cost(ctx, map.node(ix, iy));
    }
    (void)parallel;
    return map;
}

}  // namespace

CostMap scan_cost_map(const SensingContext& ctx, const GridSpec& grid) {
    return scan_impl(ctx, grid, true);
}

CostMap scan_cost_map_serial(const SensingContext& ctx, const GridSpec& grid) {
    return scan_impl(ctx, grid, false);
}

double cfar_threshold_factor(double pfa, int shape, int num_training) {
    if (pfa <= 0.0 || pfa >= 1.0)
        throw ConfigError("cfar_threshold_factor: pfa must lie in (0, 1)");
    if (shape < 1 || num_training < 1)
        throw ConfigError("cfar_threshold_factor: shape and training must be >= 1");
    // The cell statistic is Gamma(shape); the trained mean over n cells is
    // Gamma(n * shape) / n, so the exceedance ratio follows a beta law.
    const double a = static_cast<double>(shape);
    const double b = static_cast<double>(num_training) * a;
    const double x = boost::math::ibeta_inv(a, b, 1.0 - pfa);
    return num_training * x / (1.0 - x);
}

namespace {

/// Training ring: cells at Chebyshev radius guard + 1, evenly subsampled down
/// to the configured count, enumerated in a deterministic walk.
std::vector<std::pair<int, int>> training_offsets(const CfarConfig& cfar) {
    const int d = cfar.guard_cells + 1;
    // walk the square ring counterclockwise from (d, 0)
    std::vector<std::pair<int, int>> ordered;
    for (int x = d, y = 0; ordered.size() < static_cast<size_t>(8 * d);) {
        ordered.emplace_back(x, y);
        if (x == d && y < d) ++y;
        else if (y == d && x > -d) --x;
        else if (x == -d && y > -d) --y;
        else ++x;
    }
    const int want = std::min<int>(cfar.training_cells, 8 * d);
    std::vector<std::pair<int, int>> out;
    for (int i = 0; i < want; ++i)
        out.push_back(ordered[static_cast<size_t>(i) * ordered.size() / want]);
    return out;
}

}  // namespace

void cfar_detect(CostMap& map, const CfarConfig& cfar, int num_gain_dofs) {
    map.detections.clear();
    map.threshold_crossings = 0;
    map.tested_cells = 0;
    const double factor =
        cfar_threshold_factor(cfar.pfa, num_gain_dofs,
                              std::min(cfar.training_cells,
                                       8 * (cfar.guard_cells + 1)));
    const auto ring = training_offsets(cfar);
    const int d = cfar.guard_cells + 1;

    auto score = [&](int ix, int iy) { return map.echo_energy - map.at(ix, iy); };

    std::vector<char> crossed(map.cost.size(), 0);
    std::vector<double> thresholds(map.cost.size(), 0.0);
    for (int iy = d; iy < map.ny - d; ++iy) {
        for (int ix = d; ix < map.nx - d; ++ix) {
            double level = 0.0;
            for (const auto& [ox, oy] : ring) level += score(ix + ox, iy + oy);
            level /= static_cast<double>(ring.size());
            const double threshold = factor * level;
            ++map.tested_cells;
            if (!(score(ix, iy) > threshold)) continue;
            ++map.threshold_crossings;
            const std::size_t idx =
                static_cast<std::size_t>(iy) * map.nx + ix;
            crossed[idx] = 1;
            thresholds[idx] = threshold;
        }
    }

    // One detection per 8-connected blob of crossings, at its lowest-cost
    // cell (lexicographic row/column tie rule). Extended detections such as
    // ridge fragments therefore collapse to a single report instead of a
    // string of neighbouring hits.
    std::vector<char> visited(map.cost.size(), 0);
    std::vector<std::pair<int, int>> stack;
    for (int iy = 0; iy < map.ny; ++iy) {
        for (int ix = 0; ix < map.nx; ++ix) {
            const std::size_t idx =
                static_cast<std::size_t>(iy) * map.nx + ix;
            if (!crossed[idx] || visited[idx]) continue;
            visited[idx] = 1;
            stack.assign(1, {ix, iy});
            int bx = ix, by = iy;
            while (!stack.empty()) {
                const auto [cx, cy] = stack.back();
                stack.pop_back();
                const double c = map.at(cx, cy);
                const double b = map.at(bx, by);
                if (c < b || (c == b && (cy < by || (cy == by && cx < bx)))) {
                    bx = cx;
                    by = cy;
                }
                for (int oy = -1; oy <= 1; ++oy) {
                    for (int ox = -1; ox <= 1; ++ox) {
                        const int jx = cx + ox, jy = cy + oy;
                        if (jx < 0 || jy < 0 || jx >= map.nx || jy >= map.ny)
                            continue;
                        const std::size_t j =
                            static_cast<std::size_t>(jy) * map.nx + jx;
                        if (!crossed[j] || visited[j]) continue;
                        visited[j] = 1;
                        stack.emplace_back(jx, jy);
                    }
                }
            }
            Detection det;
            det.position = map.node(bx, by);
            det.cost = map.at(bx, by);
            det.score = score(bx, by);
            det.threshold =
                thresholds[static_cast<std::size_t>(by) * map.nx + bx];
            det.ix = bx;
            det.iy = by;
            map.detections.push_back(det);
        }
    }
    std::stable_sort(map.detections.begin(), map.detections.end(),
                     [](const Detection& a, const Detection& b) {
                         return a.score > b.score;
                     });
}

CostMap scan_and_detect(const SensingContext& ctx, const GridSpec& grid,
                        const CfarConfig& cfar, bool parallel) {
    CostMap map = scan_impl(ctx, grid, parallel);
    const int dofs =
        static_cast<int>(ctx.tx.size()) * static_cast<int>(ctx.rx.size());
    cfar_detect(map, cfar, dofs);
    return map;
}

// ---------------------------------------------------------------------------
// Local refinement
// ---------------------------------------------------------------------------

namespace {

struct BfgsOutcome {
    Eigen::VectorXd x;
    double f = 0.0;
    bool converged = false;
};

/// Quasi-Newton descent with central-difference gradients and a backtracking
/// line search, constrained to a box around the starting point.
template <typename F>
BfgsOutcome bfgs_minimize(F&& fn, Eigen::VectorXd x0, double grad_step,
                          double init_step, double x_tol, int max_iter,
                          const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    const int n = static_cast<int>(x0.size());
    auto clamp = [&](Eigen::VectorXd v) {
        for (int i = 0; i < n; ++i) v(i) = std::min(hi(i), std::max(lo(i), v(i)));
        return v;
    };
    auto gradient = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd g(n);
        for (int i = 0; i < n; ++i) {
            Eigen::VectorXd xp = x, xm = x;
            xp(i) += grad_step;
            xm(i) -= grad_step;
            g(i) = (fn(xp) - fn(xm)) / (2.0 * grad_step);
        }
        return g;
    };

    BfgsOutcome out;
    out.x = clamp(std::move(x0));
    out.f = fn(out.x);
    Eigen::VectorXd g = gradient(out.x);
    Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);
    double gnorm = g.norm();
    if (gnorm > 0.0) h_inv *= init_step / gnorm;
    bool first = true;

    for (int iter = 0; iter < max_iter; ++iter) {
        Eigen::VectorXd dir = -(h_inv * g);
        if (dir.dot(g) >= 0.0) {  // reset on a non-descent direction
            h_inv = Eigen::MatrixXd::Identity(n, n);
            if (g.norm() > 0.0) h_inv *= init_step / g.norm();
            dir = -(h_inv * g);
        }
        double step = 1.0;
        const double slope = g.dot(dir);
        Eigen::VectorXd x_new;
        double f_new = out.f;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            x_new = clamp(out.x + step * dir);
            f_new = fn(x_new);
            if (f_new <= out.f + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted || !(f_new < out.f)) {
            out.converged = true;  // no further descent possible at this scale
            break;
        }
        const Eigen::VectorXd s = x_new - out.x;
        const Eigen::VectorXd g_new = gradient(x_new);
        const Eigen::VectorXd y = g_new - g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            if (first) {
                h_inv = Eigen::MatrixXd::Identity(n, n) * (sy / y.dot(y));
                first = false;
            }
            const Eigen::VectorXd hy = h_inv * y;
            const double yhy = y.dot(hy);
            h_inv += ((sy + yhy) / (sy * sy)) * (s * s.transpose()) -
                     (hy * s.transpose() + s * hy.transpose()) / sy;
        }
        out.x = x_new;
        out.f = f_new;
        g = g_new;
        if (s.norm() < x_tol) {
            out.converged = true;
            break;
        }
    }
    return out;
}

Eigen::VectorXd to_vec(const Position2D& p) {
    Eigen::VectorXd v(2);
    v << p.x, p.y;
    return v;
}

}  // namespace

EstimationReport refine_coherent(const SensingContext& ctx,
                                 const std::vector<Position2D>& coarse,
                                 const OptimizerConfig& opt,
                                 double coarse_cell_m) {
    EstimationReport report;
    report.coarse = coarse;
    report.initial_cost = coherent_cost(ctx, coarse);
    if (coarse.empty()) {
        report.final_cost = report.initial_cost;
        report.converged = true;
        return report;
    }
    const double lambda = ctx.lambda();
    const int s_count = static_cast<int>(coarse.size());
    bool all_converged = true;

    // Stage 1: descend the smooth free-gain cost to sub-cell accuracy.
    for (const Position2D& start : coarse) {
        auto f = [&](const Eigen::VectorXd& x) {
            return ncp_cost(ctx, {x(0), x(1)});
        };
        Eigen::VectorXd lo = to_vec(start).array() - 1.25 * coarse_cell_m;
        Eigen::VectorXd hi = to_vec(start).array() + 1.25 * coarse_cell_m;
        const BfgsOutcome r =
            bfgs_minimize(f, to_vec(start), 1e-3, 0.25 * coarse_cell_m,
                          1e-4, opt.max_iterations, lo, hi);
        report.ncp_refined.push_back({r.x(0), r.x(1)});
        all_converged = all_converged && r.converged;
    }

    // Stage 2: multi-start coherent descent seeded around both the detection
    // node and the free-gain fix; the wavelength-scale offsets probe the
    // neighbouring phase basins.
    for (int s = 0; s < s_count; ++s) {
        auto f = [&](const Eigen::VectorXd& x) {
            return coherent_cost(ctx, {Position2D{x(0), x(1)}});
        };
        const Eigen::VectorXd a = to_vec(report.ncp_refined[s]);
        const Eigen::VectorXd b = to_vec(coarse[s]);
        Eigen::VectorXd lo = a.cwiseMin(b).array() - coarse_cell_m;
        Eigen::VectorXd hi = a.cwiseMax(b).array() + coarse_cell_m;
        BfgsOutcome best;
        best.f = std::numeric_limits<double>::infinity();
        const int radius = opt.multistart_radius;
        for (const Eigen::VectorXd& center : {a, b}) {
            for (int oy = -radius; oy <= radius; ++oy) {
                for (int ox = -radius; ox <= radius; ++ox) {
                    Eigen::VectorXd x0 = center;
                    x0(0) += 0.25 * lambda * ox;
                    x0(1) += 0.25 * lambda * oy;
                    const BfgsOutcome r = bfgs_minimize(
                        f, x0, opt.gradient_step_m, lambda / 16.0,
                        opt.position_tolerance_m, opt.max_iterations, lo, hi);
                    if (r.f < best.f) best = r;
                }
            }
            if ((a - b).norm() < lambda / 16.0) break;
        }
        report.refined.push_back({best.x(0), best.x(1)});
        all_converged = all_converged && best.converged;
    }

    // Stage 3: joint polish over all targets with warm-started phases.
    if (s_count > 1) {
        std::vector<double> warm;
        auto joint = [&](const Eigen::VectorXd& x) {
            std::vector<Position2D> pos(s_count);
            for (int s = 0; s < s_count; ++s) pos[s] = {x(2 * s), x(2 * s + 1)};
            const CoherentProfile prof =
                coherent_profile(ctx, pos, warm.empty() ? nullptr : &warm);
            warm = prof.phase_offsets;
            return prof.cost;
        };
        Eigen::VectorXd x0(2 * s_count), lo(2 * s_count), hi(2 * s_count);
        for (int s = 0; s < s_count; ++s) {
            x0(2 * s) = report.refined[s].x;
            x0(2 * s + 1) = report.refined[s].y;
        }
        lo = x0.array() - 2.0 * lambda;
        hi = x0.array() + 2.0 * lambda;
        const BfgsOutcome r =
            bfgs_minimize(joint, x0, opt.gradient_step_m, lambda / 32.0,
                          opt.position_tolerance_m, opt.max_iterations, lo, hi);
        std::vector<Position2D> polished(s_count);
        for (int s = 0; s < s_count; ++s)
            polished[s] = {r.x(2 * s), r.x(2 * s + 1)};
        if (coherent_cost(ctx, polished) < coherent_cost(ctx, report.refined)) {
            report.refined = polished;
            all_converged = all_converged && r.converged;
        }
    }

    // Keep the best candidate set seen by any stage.
    const std::vector<Position2D>* winner = &report.refined;
    double winner_cost = coherent_cost(ctx, report.refined);
    for (const auto* cand : {&report.ncp_refined, &report.coarse}) {
        const double c = coherent_cost(ctx, *cand);
        if (c < winner_cost) {
            winner_cost = c;
            winner = cand;
        }
    }
    if (winner != &report.refined) report.refined = *winner;

    const CoherentProfile prof = coherent_profile(ctx, report.refined);
    report.final_cost = prof.cost;
    report.phase_offsets = prof.phase_offsets;
    report.amplitudes = prof.amplitudes;
    report.converged =
        all_converged && report.final_cost <= report.initial_cost + 1e-9 * ctx.echo_energy;
    return report;
}

std::vector<double> match_errors(const std::vector<Position2D>& estimates,
                                 const std::vector<Position2D>& truths) {
    const int m = static_cast<int>(estimates.size());
    const int n = static_cast<int>(truths.size());
    std::vector<double> best(n, std::numeric_limits<double>::infinity());
    if (n == 0) return best;
    if (m == 0) return best;
    if (std::max(m, n) > 8)
        throw ConfigError("match_errors: too many targets for exact matching");

    const int big = std::max(m, n);
    std::vector<int> perm(big);
    std::iota(perm.begin(), perm.end(), 0);
    double best_sum = std::numeric_limits<double>::infinity();
    do {
        // entry perm[i] pairs estimate slot with truth slot i (padded indices
        // beyond the real count mean "unmatched")
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            if (perm[i] < m) sum += distance(estimates[perm[i]], truths[i]);
        }
        if (sum < best_sum) {
            best_sum = sum;
            for (int i = 0; i < n; ++i)
                best[i] = perm[i] < m
                              ? distance(estimates[perm[i]], truths[i])
                              : std::numeric_limits<double>::infinity();
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

namespace {

constexpr char kEchoMagic[8] = {'D', 'M', 'I', 'S', 'A', 'C', 'E', '1'};

template <typename T>
void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError("echo file: truncated");
    return v;
}

}  // namespace

void write_echoes(const EchoSet& echoes, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_echoes: cannot open " + path);
    out.write(kEchoMagic, sizeof(kEchoMagic));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(echoes.num_receivers()));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(echoes.num_instants()));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(echoes.num_antennas()));
    write_pod<double>(out, echoes.noise_power_w);
    write_pod<double>(out, echoes.carrier_hz);
    for (int idx : echoes.receive_ap_indices)
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(idx));
    for (const auto& y : echoes.samples) {
        for (int l = 0; l < y.cols(); ++l) {
            for (int i = 0; i < y.rows(); ++i) {
                write_pod<double>(out, y(i, l).real());
                write_pod<double>(out, y(i, l).imag());
            }
        }
    }
    if (!out) throw IoError("write_echoes: write failed");
}

EchoSet read_echoes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_echoes: cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kEchoMagic, sizeof(magic)) != 0)
        throw IoError("read_echoes: bad magic");
    EchoSet echoes;
    const auto mr = read_pod<std::uint32_t>(in);
    const auto len = read_pod<std::uint32_t>(in);
    const auto n = read_pod<std::uint32_t>(in);
    echoes.noise_power_w = read_pod<double>(in);
    echoes.carrier_hz = read_pod<double>(in);
    if (mr == 0 || len == 0 || n == 0) throw IoError("read_echoes: empty dims");
    echoes.receive_ap_indices.resize(mr);
    for (auto& idx : echoes.receive_ap_indices)
        idx = static_cast<int>(read_pod<std::uint32_t>(in));
    echoes.samples.resize(mr);
    for (auto& y : echoes.samples) {
        y.resize(n, len);
        for (std::uint32_t l = 0; l < len; ++l) {
            for (std::uint32_t i = 0; i < n; ++i) {
                const double re = read_pod<double>(in);
                const double im = read_pod<double>(in);
                y(i, l) = {re, im};
            }
        }
    }
    return echoes;
}

void write_cost_map(const CostMap& map, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("write_cost_map: cannot open " + path);
    out.precision(17);
    out << "# x0 y0 spacing nx ny echo_energy\n";
    out << map.x0 << " " << map.y0 << " " << map.spacing << " " << map.nx << " "
        << map.ny << " " << map.echo_energy << "\n";
    for (int iy = 0; iy < map.ny; ++iy) {
        for (int ix = 0; ix < map.nx; ++ix) {
            out << map.at(ix, iy);
            out << (ix + 1 == map.nx ? '\n' : ' ');
        }
    }
    if (!out) throw IoError("write_cost_map: write failed");
}

}  // namespace dmisac
