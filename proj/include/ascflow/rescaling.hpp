#pragma once

#include <ascflow/anisotropy.hpp>
#include <ascflow/flow.hpp>

#include <Eigen/Dense>

#include <vector>

namespace ascflow {

enum class RescaleKind {
    parabolic,
    volume_preserving,
};

/// One rescaled snapshot.  values holds S-tilde (parabolic) or S-hat
/// (volume-preserving) support samples on the trajectory grid.
struct RescaledFrame {
    RescaleKind kind = RescaleKind::parabolic;
    double tau = 0.0;
    double source_t = 0.0; ///< unrescaled time of the source record
    std::shared_ptr<const SphereGrid> grid;
    Eigen::VectorXd values;
    /// Parabolic frames: extinction data used for the rescaling.
    double T = 0.0;
    Eigen::VectorXd x0;
    /// Volume-preserving frames: V(t) of the source record and the original
    /// support samples (the weight is evaluated at unrescaled positions).
    double source_volume = 0.0;
    Eigen::VectorXd source_values;
};

/// Enclosed (half) volume V = 1/(n+1) * integral of S/(2K) dsigma for the
/// support gauge, and the radial-graph form 1/2 * integral of
/// r^(n+1)/(n+1) dsigma for radial states.  Half of the Euclidean volume,
/// by convention.
double volume(const SupportState& state);

/// S-tilde(z) = (S(z) - z . x0) / sqrt(2 (T - t)) per record, with
/// tau = -1/2 log((T - t)/T).  Records at t >= T are rejected.
std::vector<RescaledFrame> parabolic_rescale(const Trajectory& traj, double T,
                                             const Eigen::VectorXd& x0);

/// S-hat = S / V^(1/3) per record (n = 2 only), tau = -log(V(t)/V(0)).
/// The rescaled volume equals 1 by construction; it is recomputed and
/// enforced to 1e-8.  V must be strictly decreasing along the records.
std::vector<RescaledFrame> volume_preserving_rescale(const Trajectory& traj);

/// I-hat = (integral of psi-hat^2 / S-hat dsigma)^(-1) on a
/// volume-preserving frame.  psi-hat is the weight at the unrescaled
/// position X(z, t).  S-hat must be positive everywhere (the frame is
/// recentered at its Steiner point first; failure throws AnalysisError).
double monotone_I(const RescaledFrame& frame, const AnisotropyDescriptor& psi);

/// Discrete dI/dtau by centered differences over adjacent frames.
/// Entry j corresponds to frames[j]; one-sided at the ends.
std::vector<double> monotone_I_rate(const std::vector<RescaledFrame>& frames,
                                    const AnisotropyDescriptor& psi);

/// Least-squares fit of S-hat = C* psi-hat (2 K-hat)^(1/2) on a
/// volume-preserving frame (n = 2).
struct SolitonFit {
    double C_star = 0.0;
    double residual = 0.0; ///< relative L2(dsigma) residual
    Eigen::VectorXd S_hat;
    Eigen::VectorXd psi_hat;
    Eigen::VectorXd K_hat;
};

SolitonFit soliton_residual(const RescaledFrame& frame, const AnisotropyDescriptor& psi);

} // namespace ascflow
