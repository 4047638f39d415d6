#pragma once

#include <Eigen/Dense>

namespace ascflow {

enum class PsiKind {
    constant,
    quadratic,
    gaussian_well,
};

/// Positive smooth ambient weight multiplying the normal speed.  Every
/// family has closed-form first and second derivatives:
///  - constant:      psi = a                              (a > 0)
///  - quadratic:     psi = a + b |x - x0|^2               (a > 0, b >= 0)
///  - gaussian_well: psi = a - b exp(-|x - x0|^2 / s^2)   (a > b >= 0, s > 0)
struct AnisotropyDescriptor {
    PsiKind kind = PsiKind::constant;
    double a = 1.0;
    double b = 0.0;
    double s = 1.0;
    Eigen::VectorXd center; ///< x0 in R^{n+1}

    static AnisotropyDescriptor constant(double a, int ambient_dim);
    static AnisotropyDescriptor quadratic(double a, double b, Eigen::VectorXd center);
    static AnisotropyDescriptor gaussian_well(double a, double b, double s, Eigen::VectorXd center);
};

/// Domain checks for the family parameters; throws ConfigError.
void validate(const AnisotropyDescriptor& psi);

struct PsiJet {
    double value = 0.0;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
};

/// Weight value with ambient gradient and Hessian at x (closed form).
PsiJet eval_psi(const AnisotropyDescriptor& psi, const Eigen::VectorXd& x);

/// Values only, one per row of X.
Eigen::VectorXd eval_psi_values(const AnisotropyDescriptor& psi, const Eigen::MatrixXd& X);

/// Extremal statistics of psi over the closed ball B(region_center,
/// region_radius), computed from the radial profile (all families are
/// radial about x0) on a refined dense sampling plus closed-form critical
/// radii, cross-checked by a coarse Cartesian sweep.
struct PsiRegionStats {
    double inf_psi = 0.0;
    double sup_psi = 0.0;
    double sup_grad_norm = 0.0;
    double sup_hess_norm = 0.0; ///< spectral norm
};

PsiRegionStats psi_region_stats(const AnisotropyDescriptor& psi, const Eigen::VectorXd& region_center,
                                double region_radius);

/// Smallest admissible speed offset c for pinching threshold eps over the
/// region, combining the region-wise extrema conservatively:
///   c = max( 5 n^2 G / (eps^2 m),
///            3 n sqrt(Hs) / (eps sqrt(m)) + 2 n^3 G / m )
/// with G = sup |grad psi|, Hs = sup |D^2 psi|, m = inf psi.
struct AdmissibleReport {
    double c = 0.0;
    double gradient_term = 0.0;
    double hessian_term = 0.0;
    PsiRegionStats stats;
};

AdmissibleReport admissible_c(const AnisotropyDescriptor& psi, int n, double eps,
                              const Eigen::VectorXd& region_center, double region_radius);

} // namespace ascflow
