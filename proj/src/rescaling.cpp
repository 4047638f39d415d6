#include <ascflow/rescaling.hpp>

#include <ascflow/errors.hpp>

#include <cmath>

namespace ascflow {

namespace {

/// Support samples of a record in either gauge.
Eigen::VectorXd record_support(const Trajectory& traj, const RecordEntry& rec) {
    if (traj.gauge == Gauge::gauss_support) return rec.values;
    SupportState s;
    s.gauge = Gauge::radial_axisym;
    s.grid = traj.grid;
    s.values = rec.values;
    s.t = rec.t;
    return support_from_radial(s);
}

} // namespace

double volume(const SupportState& state) {
    if (!state.grid) throw ConfigError("state has no grid");
    const int n = state.grid->n;
    if (state.gauge == Gauge::radial_axisym) {
        // Cone formula over radial rays (half of the Euclidean volume).
        double acc = 0.0;
        for (int k = 0; k < state.grid->num_nodes(); ++k)
            acc += state.grid->weights[k] * std::pow(state.values[k], n + 1);
        return acc / (2.0 * (n + 1));
    }
    // Support-gauge form: V = 1/(n+1) integral of S * (prod rho) / 2.
    CurvatureBundle bundle = state_curvature(state, -1.0);
    double acc = 0.0;
    for (int k = 0; k < state.grid->num_nodes(); ++k) {
        double jac = 1.0;
        for (int i = 0; i < n; ++i) jac *= bundle.rho(k, i);
        acc += state.grid->weights[k] * bundle.S[k] * jac;
    }
    return acc / (2.0 * (n + 1));
}

std::vector<RescaledFrame> parabolic_rescale(const Trajectory& traj, double T,
                                             const Eigen::VectorXd& x0) {
    if (!traj.grid) throw ConfigError("trajectory has no grid");
    if (x0.size() != traj.grid->ambient_dim())
        throw ConfigError("x0 must have the grid's ambient dimension");
    if (!(T > 0.0)) throw ConfigError("extinction time T must be positive");

    std::vector<RescaledFrame> frames;
    frames.reserve(traj.records.size());
    for (const RecordEntry& rec : traj.records) {
        if (rec.t >= T)
            throw ConfigError("parabolic rescaling needs every record strictly before T");
        Eigen::VectorXd S = record_support(traj, rec);
        double scale = 1.0 / std::sqrt(2.0 * (T - rec.t));
        RescaledFrame frame;
        frame.kind = RescaleKind::parabolic;
        frame.tau = -0.5 * std::log((T - rec.t) / T);
        frame.source_t = rec.t;
        frame.grid = traj.grid;
        frame.T = T;
        frame.x0 = x0;
        frame.values.resize(S.size());
        for (int k = 0; k < S.size(); ++k) {
            double shift = x0.dot(traj.grid->nodes.row(k).transpose());
            frame.values[k] = (S[k] - shift) * scale;
        }
        frame.source_values = std::move(S);
        frames.push_back(std::move(frame));
    }
    return frames;
}

std::vector<RescaledFrame> volume_preserving_rescale(const Trajectory& traj) {
    if (!traj.grid) throw ConfigError("trajectory has no grid");
    if (traj.grid->n != 2)
        throw ConfigError("volume-preserving rescaling is implemented for n = 2");
    if (traj.records.empty()) throw ConfigError("trajectory has no records");

    std::vector<RescaledFrame> frames;
    frames.reserve(traj.records.size());
    double v0 = 0.0, v_prev = 0.0;
    for (std::size_t i = 0; i < traj.records.size(); ++i) {
        const RecordEntry& rec = traj.records[i];
        SupportState s;
        s.gauge = traj.gauge;
        s.grid = traj.grid;
        s.values = rec.values;
        s.t = rec.t;
        double V = volume(s);
        if (!(V > 0.0)) throw AnalysisError("record volume must be positive");
        if (i == 0)
            v0 = V;
        else if (!(V < v_prev))
            throw AnalysisError("record volumes must decrease strictly");
        v_prev = V;

        Eigen::VectorXd S = record_support(traj, rec);
        RescaledFrame frame;
        frame.kind = RescaleKind::volume_preserving;
        frame.tau = -std::log(V / v0);
        frame.source_t = rec.t;
        frame.grid = traj.grid;
        frame.source_volume = V;
        frame.values = S / std::cbrt(V);
        frame.source_values = std::move(S);

        SupportState hat;
        hat.gauge = Gauge::gauss_support;
        hat.grid = traj.grid;
        hat.values = frame.values;
        hat.t = rec.t;
        double v_hat = volume(hat);
        if (std::abs(v_hat - 1.0) > 1e-8)
            throw AnalysisError("rescaled volume failed to normalize to 1");
        frames.push_back(std::move(frame));
    }
    return frames;
}

double monotone_I(const RescaledFrame& frame, const AnisotropyDescriptor& psi) {
    if (frame.kind != RescaleKind::volume_preserving)
        throw ConfigError("the monotone quantity is defined on volume-preserving frames");
    if (!frame.grid) throw ConfigError("frame has no grid");
    validate(psi);
    if (psi.center.size() != frame.grid->ambient_dim())
        throw ConfigError("weight ambient dimension does not match the grid");

    const SphereGrid& grid = *frame.grid;
    // Recenter at the Steiner point so the support stays positive on shapes
    // far from the origin.
    Eigen::VectorXd steiner = steiner_point(ScalarField(frame.grid, frame.values));
    Eigen::VectorXd S_c(grid.num_nodes());
    for (int k = 0; k < grid.num_nodes(); ++k) {
        S_c[k] = frame.values[k] - steiner.dot(grid.nodes.row(k).transpose());
        if (!(S_c[k] > 0.0))
            throw AnalysisError("recentered rescaled support must be positive");
    }
    // The weight is evaluated at the unrescaled surface positions.
    CurvatureBundle src =
        curvature_from_support(ScalarField(frame.grid, frame.source_values), -1.0);
    Eigen::VectorXd psi_hat = eval_psi_values(psi, src.positions);
    double acc = 0.0;
    for (int k = 0; k < grid.num_nodes(); ++k)
        acc += grid.weights[k] * psi_hat[k] * psi_hat[k] / S_c[k];
    if (!(acc > 0.0)) throw AnalysisError("monotone quantity integral must be positive");
    return 1.0 / acc;
}

std::vector<double> monotone_I_rate(const std::vector<RescaledFrame>& frames,
                                    const AnisotropyDescriptor& psi) {
    if (frames.size() < 2) throw ConfigError("rate estimation needs at least two frames");
    const int m = static_cast<int>(frames.size());
    std::vector<double> I(m);
    for (int j = 0; j < m; ++j) I[j] = monotone_I(frames[j], psi);
    std::vector<double> rate(m);
    for (int j = 0; j < m; ++j) {
        int lo = std::max(0, j - 1), hi = std::min(m - 1, j + 1);
        double dtau = frames[hi].tau - frames[lo].tau;
        if (!(dtau > 0.0)) throw AnalysisError("frames must have increasing tau");
        rate[j] = (I[hi] - I[lo]) / dtau;
    }
    return rate;
}

SolitonFit soliton_residual(const RescaledFrame& frame, const AnisotropyDescriptor& psi) {
    if (frame.kind != RescaleKind::volume_preserving)
        throw ConfigError("the soliton fit is defined on volume-preserving frames");
    if (!frame.grid) throw ConfigError("frame has no grid");
    validate(psi);
    if (psi.center.size() != frame.grid->ambient_dim())
        throw ConfigError("weight ambient dimension does not match the grid");

    const SphereGrid& grid = *frame.grid;
    CurvatureBundle hat = curvature_from_support(ScalarField(frame.grid, frame.values), -1.0);
    CurvatureBundle src =
        curvature_from_support(ScalarField(frame.grid, frame.source_values), -1.0);

    SolitonFit fit;
    fit.S_hat = frame.values;
    fit.psi_hat = eval_psi_values(psi, src.positions);
    fit.K_hat = hat.K;

    double num = 0.0, den = 0.0, s_norm = 0.0;
    Eigen::VectorXd target(grid.num_nodes());
    for (int k = 0; k < grid.num_nodes(); ++k) {
        target[k] = fit.psi_hat[k] * std::sqrt(2.0 * hat.K[k]);
        num += grid.weights[k] * frame.values[k] * target[k];
        den += grid.weights[k] * target[k] * target[k];
        s_norm += grid.weights[k] * frame.values[k] * frame.values[k];
    }
    if (!(den > 0.0)) throw AnalysisError("soliton fit target vanished");
    fit.C_star = num / den;
    double res = 0.0;
    for (int k = 0; k < grid.num_nodes(); ++k) {
        double d = frame.values[k] - fit.C_star * target[k];
        res += grid.weights[k] * d * d;
    }
    fit.residual = std::sqrt(res / (s_norm + 1e-300));
    return fit;
}

} // namespace ascflow
