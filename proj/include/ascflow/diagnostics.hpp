#pragma once

#include <ascflow/anisotropy.hpp>
#include <ascflow/curvature.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <vector>

namespace ascflow {

/// Pinching threshold for W = h - eps (H + c) g.
struct PinchParams {
    double eps = 0.1; ///< in (0, 1)
    double c = 0.0;   ///< >= 0, speed offset making the weight harmless
};

/// Curvature-pinching fragment of a diagnostics record.
struct PinchReport {
    /// min over nodes of the smallest eigenvalue of h - eps(H+c) g in an
    /// orthonormal frame (equals lambda_min - eps(H+c)).
    double min_eig_W = 0.0;
    double lambda_ratio_max = 1.0; ///< max over nodes of lambda_n / lambda_1
    double f0_max = 0.0;           ///< max of (|A|^2 - H^2/n) / H^2
    Eigen::VectorXd f_sigma;       ///< node values of (|A|^2 - H^2/n) / H^(2-sigma)
    double f_sigma_norm = 0.0;     ///< L^p norm against the area measure (prod rho) dsigma
};

/// sigma in [0, 1/2], p >= 2.
PinchReport pinch_report(const CurvatureBundle& bundle, const PinchParams& params, double sigma,
                         double p);

/// Extrema of the speed F = psi(X) R^(1/2) plus the scale-invariant product
/// F_max * r_in.
struct SpeedBound {
    double F_max = 0.0;
    double F_min = 0.0;
    double F_times_r_in = 0.0;
};

SpeedBound speed_bound(const CurvatureBundle& bundle, const AnisotropyDescriptor& psi);

/// Requested f_sigma norm: L^p of f_sigma with the evolving area measure.
struct SigmaNormSpec {
    double sigma = 0.0;
    double p = 2.0;
};

struct SigmaNormValue {
    double sigma = 0.0;
    double p = 2.0;
    double value = 0.0;
};

/// Everything recorded per trajectory snapshot.
struct DiagnosticsRecord {
    double t = 0.0;
    double r_in = 0.0, r_out = 0.0, w_max = 0.0, w_min = 0.0;
    double H_max = 0.0, H_min = 0.0;
    double lambda_ratio_max = 1.0;
    double min_eig_W = 0.0;
    double f0_max = 0.0;
    std::vector<SigmaNormValue> f_sigma_norms;
    double F_max = 0.0, F_min = 0.0, F_times_r_in = 0.0;
    double volume = 0.0;
};

/// Assemble a full record from a curvature bundle.  The enclosed volume is
/// computed by the caller (gauge-aware) and passed through.
DiagnosticsRecord make_record(const CurvatureBundle& bundle, const AnisotropyDescriptor& psi,
                              const PinchParams& pinch, const std::vector<SigmaNormSpec>& norms,
                              double t, double volume);

// ---------------------------------------------------------------------------
// Null-condition audit
// ---------------------------------------------------------------------------

/// Totally symmetric rank-3 tensor (Weingarten gradient h_{ijk} in an
/// eigenframe), stored once per sorted index triple i <= j <= k, zero-based.
struct SymmetricTensor3 {
    int n = 0;
    Eigen::VectorXd coeffs;

    static SymmetricTensor3 zero(int n);
    static int index(int i, int j, int k, int n); ///< any order; sorts internally
    double operator()(int i, int j, int k) const { return coeffs[index(i, j, k, n)]; }
    double& at(int i, int j, int k) { return coeffs[index(i, j, k, n)]; }
};

/// One pointwise sample of the quantities entering the null-eigenvector
/// quantity Q at a minimum of the pinching function: diagonal Weingarten
/// values (ascending, h_11 = eps(H+c)), the gradient tensor obeying the
/// constraint h_{k11} = eps/(1-eps) sum_{j>1} h_{kjj}, and surrogate
/// weight-derivative scalars within declared ambient bounds.
struct NullAuditSample {
    int n = 2;
    PinchParams pinch;
    Eigen::VectorXd h_diag;  ///< ascending eigenvalues h_11 <= ... <= h_nn
    SymmetricTensor3 h_grad; ///< h_{ijk}

    double psi = 1.0;          ///< weight value at the point
    Eigen::VectorXd psi_grad;  ///< tangential derivatives psi_k, k = 1..n
    double psi_11 = 0.0;       ///< surface second derivative in the e1 direction
    double psi_laplacian = 0.0;///< surface Laplacian of psi
    double grad_bound = 0.0;   ///< declared |D psi| bound used by the generator
    double hess_bound = 0.0;   ///< declared |D^2 psi| bound used by the generator

    std::uint64_t seed = 0; ///< provenance for batch exports
    int index = 0;
};

/// Term-by-term evaluation of the decomposition Q = Q_0 + sum_k Q_k +
/// sum Q_{1kl} + sum Q_{jkl}, each part exactly as printed, plus the
/// pre-decomposition expression for cross-checking.  The printed distinct-
/// index parts carry no factor psi while the pre-decomposition quadratic
/// terms all do, so the exact bookkeeping identity is
///   q_pre == q_parts_total + (psi - 1) * (sum q_1kl + sum q_jkl).
struct NullAuditResult {
    double q0 = 0.0;
    Eigen::VectorXd q_k;        ///< entry 0 is Q_1, entry k-1 is Q_k
    std::vector<double> q_1kl;  ///< triples (1,k,l), 1 < k < l, lexicographic
    std::vector<double> q_jkl;  ///< triples (j,k,l), 1 < j < k < l, lexicographic
    double q_parts_total = 0.0; ///< Q_0 + sum Q_k + sum Q_{1kl} + sum Q_{jkl}
    double q_pre = 0.0;         ///< pre-decomposition expression
    double min_part = 0.0;      ///< smallest individual part
    double scale = 0.0;         ///< sum of |parts|, for relative tolerances
};

/// Evaluates every term of the decomposition at one sample.  Coincident
/// eigenvalues are perturbed by 1e-9 (relative) first; differences still
/// below 1e-12 (relative) are rejected.
NullAuditResult audit_null_condition(const NullAuditSample& sample);

struct AuditBatchConfig {
    int n = 2;
    int count = 10000;
    std::uint64_t seed = 2026;
    double eps = 0.1;
    double c = 0.0;          ///< speed offset; 0 pins H = h_11/eps exactly
    double psi = 1.0;        ///< constant surrogate weight value
    double grad_bound = 0.0; ///< |D psi| for surrogate gradient draws
    double hess_bound = 0.0; ///< |D^2 psi| for surrogate second-derivative draws
    double grad_tensor_amplitude = 0.5; ///< scale of free h_{ijk} draws (times h_nn)
};

struct AuditBatchRow {
    int index = 0;
    double q_parts_total = 0.0;
    double q_pre = 0.0;
    double min_part = 0.0;
    double q0 = 0.0;
    double bookkeeping_gap = 0.0; ///< q_pre - q_parts - (psi-1)(sum of distinct parts)
    double scale = 0.0;
};

struct AuditBatchResult {
    AuditBatchConfig config;
    std::vector<AuditBatchRow> rows;
    double min_q = 0.0;       ///< smallest q_parts_total over the batch
    double min_part = 0.0;    ///< smallest individual part over the batch
    double max_gap = 0.0;     ///< largest |bookkeeping_gap| over the batch
    int negative_count = 0;   ///< samples with q_parts_total < 0
};

/// Deterministic seeded batch: sample i is generated from a counter-based
/// stream independent of every other sample, so batches are reproducible
/// and order-independent.
AuditBatchResult audit_batch(const AuditBatchConfig& config);

/// Draws the i-th sample of a batch (exposed for tests and exports).
NullAuditSample draw_audit_sample(const AuditBatchConfig& config, int index);

// ---------------------------------------------------------------------------
// Evolution-equation verification
// ---------------------------------------------------------------------------

/// One engine step in the support gauge: maps node values at time t to node
/// values at t + dt.  Passing the engine as a callback keeps this module
/// independent of the time-stepping code.
using SupportStepper =
    std::function<Eigen::VectorXd(const Eigen::VectorXd& values, double t, double dt)>;

/// Max-over-nodes relative residuals between analytic right-hand sides and
/// centered finite-difference time derivatives from two engine steps
/// (one forward, one backward).
struct EvolutionResiduals {
    double dt = 0.0;
    /// (a) dS/dt = -F.
    double support_speed = 0.0;
    /// (b) dH/dt = sum_k lambda_k^2 [(Hess F)_kk + F] in the radii eigenframe.
    double mean_curvature = 0.0;
    /// (c) dF/dt = psi R^(-1/2) sum_k lambda_k^2 (H - lambda_k) (Hess F)_kk
    ///     + psi^2 (H |A|^2 - tr A^3) - psi R (D psi . z)
    ///     - R^(1/2) <D psi, grad F>   (corrected second-order coefficient
    ///     and tangential transport; see README notes).
    double speed_function = 0.0;
    /// (c') same check against the H g^{ij} second-order coefficient without
    /// tangential transport, reported for reference only.
    double speed_function_reference = 0.0;
    /// (d) sphere-only: d(g)/dt = -2 F h reduces to d(r^2)/dt = -2 F r.
    double metric_sphere = 0.0;
    bool sphere_checked = false;
};

/// dt must satisfy dt <= 1e-4 * (min rho)^2.  sphere_checks enables (d),
/// which is meaningful only for round-sphere states.
EvolutionResiduals verify_evolution(const ScalarField& S, const AnisotropyDescriptor& psi,
                                    double dt, const SupportStepper& stepper, bool sphere_checks);

} // namespace ascflow
