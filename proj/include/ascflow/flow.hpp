#pragma once

#include <ascflow/anisotropy.hpp>
#include <ascflow/curvature.hpp>
#include <ascflow/diagnostics.hpp>
#include <ascflow/geometry.hpp>

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <vector>

namespace ascflow {

/// How the evolving hypersurface is parametrized.
///  - gauss_support: the support function S(z) on the Gauss sphere
///    (full2d or axisym grids); dS/dt = -F.
///  - radial_axisym: a radial graph r(theta) over the axisym grid,
///    star-shaped about the origin; dr/dt = -(F/r) sqrt(r^2 + r_theta^2).
enum class Gauge {
    gauss_support,
    radial_axisym,
};

/// One evolving snapshot: per-node field values (S or r) at time t.
struct SupportState {
    Gauge gauge = Gauge::gauss_support;
    std::shared_ptr<const SphereGrid> grid;
    Eigen::VectorXd values;
    double t = 0.0;
};

/// Engine knobs, normally filled in from the experiment config.
struct EngineControls {
    double cfl = 0.2;                ///< C in dt = C rho_min^2 / (psi_max sqrt(n(n-1))) * gamma
    double r_stop_fraction = 1e-2;   ///< terminate when r_in < fraction * initial r_in
    double record_dt = 0.0;          ///< record spacing; 0 derives it from records_target
    int records_target = 120;        ///< used when record_dt == 0: record_dt = T_plus / target
    int max_halvings = 20;           ///< dt halvings allowed per step on convexity loss
    long step_limit = 2000000;       ///< accepted steps before giving up
    double aliasing_tolerance = 1e-6;///< full2d resolution guard, checked once per accepted step
    PinchParams pinch;               ///< recorded in diagnostics
    std::vector<SigmaNormSpec> sigma_norms; ///< requested f_sigma norms per record
};

enum class TerminationReason {
    extinction_threshold,
    step_limit,
    convexity_loss,
};

/// Snapshot stored along a run: raw field plus derived diagnostics.
struct RecordEntry {
    double t = 0.0;
    Eigen::VectorXd values;
    DiagnosticsRecord diagnostics;
};

struct ExtinctionEstimate {
    double T = 0.0;            ///< extrapolated extinction time
    Eigen::VectorXd x0;        ///< Steiner point of the last recorded state
    double alpha = 0.0;        ///< fitted slope of r_in^2 = alpha (T - t)
    double fit_residual = 0.0; ///< rms residual of the fit / rms of r_in^2
    int records_used = 0;
};

struct Trajectory {
    Gauge gauge = Gauge::gauss_support;
    std::shared_ptr<const SphereGrid> grid;
    std::vector<RecordEntry> records;
    TerminationReason termination = TerminationReason::extinction_threshold;
    long steps_taken = 0;
    int total_halvings = 0;
    double t_plus = 0.0; ///< a-priori extinction upper bound used for record spacing
    std::optional<ExtinctionEstimate> extinction;
};

/// One explicit Runge-Kutta-4 step of dS/dt = -F, F = psi(X) R^(1/2),
/// in the support gauge.  Throws ConvexityError (with the failing substage
/// 0..3) if any stage state stops being strictly convex; the caller rolls
/// back and halves dt.
SupportState step_gauss(const SupportState& state, const AnisotropyDescriptor& psi, double dt);

/// RK4 step of the radial graph equation dr/dt = -(F/r) sqrt(r^2 + r_theta^2)
/// on the axisym grid.  Star-shapedness (r > 0) and convexity are enforced
/// at every stage.
SupportState step_radial_axisym(const SupportState& state, const AnisotropyDescriptor& psi,
                                double dt);

/// Gauge dispatch for the two steppers above.
SupportState step(const SupportState& state, const AnisotropyDescriptor& psi, double dt);

/// Stability bound: cfl * rho_min^2 / (psi_max sqrt(n(n-1))) * gamma with
/// gamma = 2/(L(L+1)) (full2d spectral) or (delta theta)^2 (axisym FD).
double stability_dt(const SupportState& state, const AnisotropyDescriptor& psi, double cfl);

/// Curvature of a state in either gauge.  gauss_support states feed the
/// support-function curvature directly; radial_axisym states are converted
/// to support samples first (max over the meridian of X . z, polished by
/// parabolic interpolation), so every downstream diagnostic sees one
/// representation.
CurvatureBundle state_curvature(const SupportState& state, double aliasing_tolerance = -1.0);

/// Support samples of a radial-graph state on its own grid.
Eigen::VectorXd support_from_radial(const SupportState& state);

/// Integrate until r_in drops below the stop threshold (or the step budget
/// is exhausted, or convexity is irrecoverably lost).  Records diagnostics
/// every record_dt, rolling dt back on convexity loss.  When the run ends
/// by extinction-threshold the square-root extinction fit is attached.
Trajectory run(const SupportState& initial, const AnisotropyDescriptor& psi,
               const EngineControls& controls);

/// Least-squares fit of r_in(t)^2 = alpha (T - t) over the last
/// max(10, ceil(0.3 K)) records.  Requires termination by
/// extinction-threshold and at least 10 records.
ExtinctionEstimate estimate_extinction(const Trajectory& traj);

} // namespace ascflow
