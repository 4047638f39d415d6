#include <ascflow/flow.hpp>

#include <ascflow/errors.hpp>
#include <ascflow/rescaling.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace ascflow {

namespace {

void check_state(const SupportState& state, const AnisotropyDescriptor& psi) {
    if (!state.grid) throw ConfigError("state has no grid");
    if (state.values.size() != state.grid->num_nodes())
        throw ConfigError("state values do not match the grid");
    validate(psi);
    if (psi.center.size() != state.grid->ambient_dim())
        throw ConfigError("weight ambient dimension does not match the grid");
}

/// -F on the current support samples; substage tags convexity failures.
Eigen::VectorXd gauss_rhs(const std::shared_ptr<const SphereGrid>& grid,
                          const Eigen::VectorXd& values, const AnisotropyDescriptor& psi,
                          int substage) {
    CurvatureBundle bundle;
    try {
        bundle = curvature_from_support(ScalarField(grid, values), -1.0);
    } catch (const ConvexityError& e) {
        throw ConvexityError(e.what(), e.node(), e.min_eigenvalue(), substage);
    }
    Eigen::VectorXd F = eval_psi_values(psi, bundle.positions);
    for (int k = 0; k < F.size(); ++k) F[k] = -F[k] * std::sqrt(bundle.R[k]);
    return F;
}

/// dr/dt = -(F/r) sqrt(r^2 + r_theta^2) for the radial graph, with principal
/// curvatures from the meridian profile.
Eigen::VectorXd radial_rhs(const std::shared_ptr<const SphereGrid>& grid,
                           const Eigen::VectorXd& r, const AnisotropyDescriptor& psi,
                           int substage) {
    const int N = grid->num_nodes();
    const int n = grid->n;
    int kmin = 0;
    double rmin = r.minCoeff(&kmin);
    if (!(rmin > 0.0))
        throw ConvexityError("radial graph lost star-shapedness", kmin, rmin, substage);

    FieldJet jet = covariant_derivatives(ScalarField(grid, r), -1.0);
    Eigen::MatrixXd X(N, n + 1);
    Eigen::VectorXd lam_m(N), lam_t(N), u(N);
    for (int k = 0; k < N; ++k) {
        double rk = r[k];
        double rt = jet.grad(k, 0);
        double h_m = jet.hess(k, FieldJet::packed_index(0, 0, n));
        double h_t = jet.hess(k, FieldJet::packed_index(1, 1, n));
        double uk = std::sqrt(rk * rk + rt * rt);
        double lm = (rk * rk + 2.0 * rt * rt - rk * h_m) / (uk * uk * uk);
        double lt = (rk * rk - rk * h_t) / (rk * rk * uk);
        if (!(lm > 0.0) || !(lt > 0.0))
            throw ConvexityError("radial graph lost convexity", k, std::min(lm, lt), substage);
        lam_m[k] = lm;
        lam_t[k] = lt;
        u[k] = uk;
        X.row(k) = rk * grid->nodes.row(k);
    }
    Eigen::VectorXd out = eval_psi_values(psi, X);
    for (int k = 0; k < N; ++k) {
        double R = 2.0 * (n - 1) * lam_m[k] * lam_t[k] + double(n - 1) * (n - 2) * lam_t[k] * lam_t[k];
        out[k] = -out[k] * std::sqrt(R) * u[k] / r[k];
    }
    return out;
}

using RhsFn = Eigen::VectorXd (*)(const std::shared_ptr<const SphereGrid>&,
                                  const Eigen::VectorXd&, const AnisotropyDescriptor&, int);

SupportState rk4_step(const SupportState& state, const AnisotropyDescriptor& psi, double dt,
                      RhsFn rhs) {
    const auto& g = state.grid;
    Eigen::VectorXd k1 = rhs(g, state.values, psi, 0);
    Eigen::VectorXd k2 = rhs(g, state.values + (0.5 * dt) * k1, psi, 1);
    Eigen::VectorXd k3 = rhs(g, state.values + (0.5 * dt) * k2, psi, 2);
    Eigen::VectorXd k4 = rhs(g, state.values + dt * k3, psi, 3);
    SupportState next = state;
    next.values = state.values + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    next.t = state.t + dt;
    return next;
}

} // namespace

SupportState step_gauss(const SupportState& state, const AnisotropyDescriptor& psi, double dt) {
    check_state(state, psi);
    if (state.gauge != Gauge::gauss_support)
        throw ConfigError("step_gauss requires a gauss_support state");
    SupportState next = rk4_step(state, psi, dt, &gauss_rhs);
    if (state.grid->mode == GridMode::full2d) {
        // Truncation dealiasing: the speed is a nonlinear function of the
        // field, so each stage scatters energy above the band limit; project
        // the update back onto the resolved band so that aliased energy can
        // never accumulate across steps.  On band-limited fields the
        // round trip is exact to machine precision.
        next.values = sh_synthesis(*state.grid,
                                   sh_analysis(ScalarField(state.grid, next.values)));
    }
    return next;
}

SupportState step_radial_axisym(const SupportState& state, const AnisotropyDescriptor& psi,
                                double dt) {
    check_state(state, psi);
    if (state.gauge != Gauge::radial_axisym)
        throw ConfigError("step_radial_axisym requires a radial_axisym state");
    if (state.grid->mode != GridMode::axisym)
        throw ConfigError("radial gauge requires an axisym grid");
    return rk4_step(state, psi, dt, &radial_rhs);
}

SupportState step(const SupportState& state, const AnisotropyDescriptor& psi, double dt) {
    return state.gauge == Gauge::gauss_support ? step_gauss(state, psi, dt)
                                               : step_radial_axisym(state, psi, dt);
}

namespace {

double grid_gamma(const SphereGrid& grid) {
    if (grid.mode == GridMode::full2d) {
        double L = grid.band_limit;
        return 2.0 / (L * (L + 1.0));
    }
    return grid.dtheta * grid.dtheta;
}

double stability_from_bundle(const CurvatureBundle& bundle, const AnisotropyDescriptor& psi,
                             double cfl) {
    double psi_max = eval_psi_values(psi, bundle.positions).maxCoeff();
    int n = bundle.n();
    double rho = bundle.min_rho;
    return cfl * rho * rho / (psi_max * std::sqrt(double(n) * (n - 1))) *
           grid_gamma(*bundle.grid);
}

} // namespace

double stability_dt(const SupportState& state, const AnisotropyDescriptor& psi, double cfl) {
    check_state(state, psi);
    if (!(cfl > 0.0)) throw ConfigError("cfl must be positive");
    return stability_from_bundle(state_curvature(state), psi, cfl);
}

Eigen::VectorXd support_from_radial(const SupportState& state) {
    if (state.gauge != Gauge::radial_axisym)
        throw ConfigError("support_from_radial requires a radial_axisym state");
    const SphereGrid& grid = *state.grid;
    if (grid.mode != GridMode::axisym)
        throw ConfigError("support_from_radial requires an axisym grid");
    const Eigen::VectorXd& r = state.values;
    const int N = grid.num_nodes();
    const double h = grid.dtheta;

    // Meridian samples of theta and r, extended by even reflection across
    // both poles so interpolation windows near the poles stay uniform.
    auto sample = [&](int j) -> std::pair<double, double> {
        if (j < 0) return {-grid.theta[-j], r[-j]};
        if (j >= N) return {2.0 * M_PI - grid.theta[2 * (N - 1) - j], r[2 * (N - 1) - j]};
        return {grid.theta[j], r[j]};
    };

    Eigen::VectorXd S(N);
    for (int i = 0; i < N; ++i) {
        const double alpha = grid.theta[i];
        // Discrete maximum of X . z = r(theta) cos(theta - alpha).
        int jstar = 0;
        double best = -std::numeric_limits<double>::max();
        for (int j = 0; j < N; ++j) {
            double g = r[j] * std::cos(grid.theta[j] - alpha);
            if (g > best) {
                best = g;
                jstar = j;
            }
        }
        // Quartic interpolation of the objective through five meridian
        // samples around the maximizer, then Newton on its derivative.
        double v[5];
        for (int m = -2; m <= 2; ++m) {
            auto [th, rr] = sample(jstar + m);
            v[m + 2] = rr * std::cos(th - alpha);
        }
        Eigen::Matrix<double, 5, 5> V;
        Eigen::Matrix<double, 5, 1> b;
        for (int m = 0; m < 5; ++m) {
            double x = (m - 2) * h;
            double p = 1.0;
            for (int q = 0; q < 5; ++q) {
                V(m, q) = p;
                p *= x;
            }
            b[m] = v[m];
        }
        Eigen::Matrix<double, 5, 1> c = V.fullPivLu().solve(b);
        // Start from the parabola vertex of the inner three samples.
        double denom = v[1] - 2.0 * v[2] + v[3];
        double x = denom < -1e-300 ? 0.5 * h * (v[1] - v[3]) / denom : 0.0;
        x = std::clamp(x, -2.0 * h, 2.0 * h);
        for (int it = 0; it < 6; ++it) {
            double d1 = c[1] + x * (2.0 * c[2] + x * (3.0 * c[3] + x * 4.0 * c[4]));
            double d2 = 2.0 * c[2] + x * (6.0 * c[3] + x * 12.0 * c[4]);
            if (!(d2 < 0.0)) break;
            x = std::clamp(x - d1 / d2, -2.0 * h, 2.0 * h);
        }
        S[i] = c[0] + x * (c[1] + x * (c[2] + x * (c[3] + x * c[4])));
    }
    return S;
}

CurvatureBundle state_curvature(const SupportState& state, double aliasing_tolerance) {
    if (!state.grid) throw ConfigError("state has no grid");
    if (state.gauge == Gauge::gauss_support)
        return curvature_from_support(ScalarField(state.grid, state.values), aliasing_tolerance);
    SupportState conv = state;
    return curvature_from_support(ScalarField(state.grid, support_from_radial(conv)),
                                  aliasing_tolerance);
}

namespace {

/// Cheap lower proxy for the inradius: exact node minimum of the support
/// gap at the Steiner point (gauss) or the node minimum of r (radial).
/// Both sit at or below the reported inradius, so a threshold trigger with
/// a 1.2 margin cannot miss an extinction crossing.
double inradius_proxy(const SupportState& state) {
    if (state.gauge == Gauge::radial_axisym) return state.values.minCoeff();
    Eigen::VectorXd steiner = steiner_point(ScalarField(state.grid, state.values));
    double best = std::numeric_limits<double>::max();
    for (int k = 0; k < state.grid->num_nodes(); ++k)
        best = std::min(best, state.values[k] - steiner.dot(state.grid->nodes.row(k).transpose()));
    return best;
}

RecordEntry build_record(const SupportState& state, const CurvatureBundle& bundle,
                         const AnisotropyDescriptor& psi, const EngineControls& controls) {
    RecordEntry entry;
    entry.t = state.t;
    entry.values = state.values;
    entry.diagnostics = make_record(bundle, psi, controls.pinch, controls.sigma_norms, state.t,
                                    volume(state));
    return entry;
}

} // namespace

Trajectory run(const SupportState& initial, const AnisotropyDescriptor& psi,
               const EngineControls& controls) {
    check_state(initial, psi);
    if (initial.gauge == Gauge::radial_axisym && initial.grid->mode != GridMode::axisym)
        throw ConfigError("radial gauge requires an axisym grid");
    if (!(controls.cfl > 0.0)) throw ConfigError("cfl must be positive");
    if (!(controls.r_stop_fraction > 0.0 && controls.r_stop_fraction < 1.0))
        throw ConfigError("r_stop_fraction must lie in (0, 1)");
    if (controls.record_dt < 0.0) throw ConfigError("record_dt must be >= 0");
    if (controls.record_dt == 0.0 && controls.records_target < 1)
        throw ConfigError("records_target must be >= 1");
    if (controls.max_halvings < 0) throw ConfigError("max_halvings must be >= 0");
    if (controls.step_limit < 1) throw ConfigError("step_limit must be >= 1");

    SupportState state = initial;
    CurvatureBundle bundle = state_curvature(state, controls.aliasing_tolerance);
    ExtentReport extents0 = geometry_extents(bundle);
    const double r_stop = controls.r_stop_fraction * extents0.r_in;
    const double t0 = state.t;

    // A-priori extinction bound from the circumball: the radius obeys
    // d(r^2)/dt >= -2 sqrt(n(n-1)) inf psi while the body stays inside.
    const int n = state.grid->n;
    double inf_psi = psi_region_stats(psi, extents0.circumcenter, extents0.r_out).inf_psi;
    if (!(inf_psi > 0.0)) throw ConfigError("weight must be positive on the initial body");
    const double t_plus =
        extents0.r_out * extents0.r_out / (2.0 * std::sqrt(double(n) * (n - 1)) * inf_psi);
    const double record_dt =
        controls.record_dt > 0.0 ? controls.record_dt : t_plus / controls.records_target;

    Trajectory traj;
    traj.gauge = state.gauge;
    traj.grid = state.grid;
    traj.t_plus = t_plus;
    traj.records.push_back(build_record(state, bundle, psi, controls));

    long steps = 0;
    int halvings = 0;
    int next_k = 1;
    TerminationReason reason = TerminationReason::step_limit;

    while (true) {
        if (steps >= controls.step_limit) {
            reason = TerminationReason::step_limit;
            break;
        }
        double dt = stability_from_bundle(bundle, psi, controls.cfl);
        const double t_record = t0 + double(next_k) * record_dt;
        bool hit_record = false;
        if (state.t + dt >= t_record - 1e-12 * record_dt) {
            dt = t_record - state.t;
            hit_record = true;
        }

        SupportState cand;
        CurvatureBundle cand_bundle;
        bool accepted = false;
        for (int attempt = 0;; ++attempt) {
            try {
                cand = step(state, psi, dt);
                cand_bundle = state_curvature(cand, controls.aliasing_tolerance);
                accepted = true;
                break;
            } catch (const ConvexityError&) {
            } catch (const ResolutionError&) {
            }
            if (attempt >= controls.max_halvings) break;
            dt *= 0.5;
            ++halvings;
            hit_record = false;
        }
        if (!accepted) {
            reason = TerminationReason::convexity_loss;
            break;
        }
        if (hit_record) cand.t = t_record; // exact record-time assignment
        state = std::move(cand);
        bundle = std::move(cand_bundle);
        ++steps;

        bool stop = false;
        if (hit_record || inradius_proxy(state) < 1.2 * r_stop) {
            if (geometry_extents(bundle).r_in < r_stop) {
                reason = TerminationReason::extinction_threshold;
                stop = true;
            }
        }
        if (hit_record && !stop) {
            traj.records.push_back(build_record(state, bundle, psi, controls));
            ++next_k;
        }
        if (stop) break;
    }

    if (traj.records.empty() || traj.records.back().t != state.t)
        traj.records.push_back(build_record(state, bundle, psi, controls));

    traj.termination = reason;
    traj.steps_taken = steps;
    traj.total_halvings = halvings;
    if (reason == TerminationReason::extinction_threshold &&
        traj.records.size() >= 10)
        traj.extinction = estimate_extinction(traj);
    return traj;
}

ExtinctionEstimate estimate_extinction(const Trajectory& traj) {
    if (traj.termination != TerminationReason::extinction_threshold)
        throw AnalysisError("extinction fit needs a run that reached the stop threshold");
    const int K = static_cast<int>(traj.records.size());
    if (K < 10) throw AnalysisError("extinction fit needs at least 10 records");
    int m = std::max(10, static_cast<int>(std::ceil(0.3 * K)));
    m = std::min(m, K);

    double t_mean = 0.0, y_mean = 0.0;
    for (int i = K - m; i < K; ++i) {
        double rin = traj.records[i].diagnostics.r_in;
        t_mean += traj.records[i].t;
        y_mean += rin * rin;
    }
    t_mean /= m;
    y_mean /= m;
    double sxx = 0.0, sxy = 0.0;
    for (int i = K - m; i < K; ++i) {
        double rin = traj.records[i].diagnostics.r_in;
        double dt = traj.records[i].t - t_mean;
        sxx += dt * dt;
        sxy += dt * (rin * rin - y_mean);
    }
    if (!(sxx > 0.0)) throw AnalysisError("extinction fit needs spread record times");

    ExtinctionEstimate est;
    est.alpha = -sxy / sxx; // y = b - alpha t
    if (!(est.alpha > 0.0)) throw AnalysisError("extinction fit found no shrinking trend");
    double b = y_mean + est.alpha * t_mean;
    est.T = b / est.alpha;
    double ss_res = 0.0, ss_tot = 0.0;
    for (int i = K - m; i < K; ++i) {
        double rin = traj.records[i].diagnostics.r_in;
        double y = rin * rin;
        double fit = b - est.alpha * traj.records[i].t;
        ss_res += (y - fit) * (y - fit);
        ss_tot += y * y;
    }
    est.fit_residual = std::sqrt(ss_res / (ss_tot + 1e-300));
    est.records_used = m;

    const RecordEntry& last = traj.records.back();
    if (traj.gauge == Gauge::gauss_support) {
        est.x0 = steiner_point(ScalarField(traj.grid, last.values));
    } else {
        SupportState s;
        s.gauge = Gauge::radial_axisym;
        s.grid = traj.grid;
        s.values = last.values;
        s.t = last.t;
        est.x0 = steiner_point(ScalarField(traj.grid, support_from_radial(s)));
    }
    return est;
}

} // namespace ascflow
