#pragma once

#include <ascflow/geometry.hpp>

namespace ascflow {

/// Elementary symmetric data of a principal-curvature vector lambda:
/// H = sum, A2 = sum of squares, R = H^2 - A2 (twice the sum over pairs),
/// K = product.
struct SymmetricFunctions {
    double H = 0.0;
    double A2 = 0.0;
    double R = 0.0;
    double K = 0.0;
};

SymmetricFunctions symmetric_functions(const Eigen::VectorXd& lambda);

/// Pointwise curvature data of the convex hypersurface with support
/// function S, parametrized by its Gauss map: the radii matrix
/// b = Hess S + S g (orthonormal frame components) has the principal radii
/// as eigenvalues; principal curvatures are their reciprocals.
struct CurvatureBundle {
    std::shared_ptr<const SphereGrid> grid;
    Eigen::VectorXd S;          ///< support samples
    Eigen::MatrixXd grad_S;     ///< N x n frame components of the sphere gradient
    Eigen::MatrixXd radii;      ///< N x n(n+1)/2 packed radii matrix
    Eigen::MatrixXd rho;        ///< N x n principal radii, ascending
    Eigen::MatrixXd lambda;     ///< N x n principal curvatures, ascending
    /// full2d: per-node 2x2 eigenvector matrix of the radii matrix, stored
    /// column-major (columns match the ascending rho order).  axisym grids
    /// are already diagonal in the frame; the rotation is the identity.
    Eigen::MatrixXd eigenframe;
    Eigen::VectorXd H;          ///< mean curvature sum
    Eigen::VectorXd A2;         ///< squared norm of the shape operator
    Eigen::VectorXd R;          ///< scalar curvature H^2 - A2
    Eigen::VectorXd K;          ///< Gauss curvature (product of lambdas)
    Eigen::MatrixXd positions;  ///< N x (n+1) surface points X = S z + grad S
    double min_rho = 0.0;       ///< global strict-convexity margin
    double max_rho = 0.0;

    int n() const { return grid->n; }
};

/// Compute the curvature bundle from support samples.  Throws
/// ConvexityError when the radii matrix fails to be positive definite at
/// some node, and (full2d) ResolutionError when the field looks
/// under-resolved; pass aliasing_tolerance <= 0 to skip that check.
CurvatureBundle curvature_from_support(const ScalarField& S, double aliasing_tolerance = 1e-6);

/// Node-sampled body extents.  Widths are exact at node directions; the
/// inradius/circumradius are the node-sampled Chebyshev programs
///   r_in  = max_p min_k (S_k - p . z_k),
///   r_out = min_p max_k |X_k - p|,
/// solved by a damped Newton iteration on log-sum-exp smoothings with a
/// decreasing smoothing parameter (deterministic, started at the Steiner
/// point, absolute accuracy ~1e-8 against the node-sampled optimum; the
/// node sampling itself biases the true body values by O(grid spacing^2)).
struct ExtentReport {
    Eigen::VectorXd width;        ///< w(z_k) = S(z_k) + S(-z_k)
    double w_min = 0.0;
    double w_max = 0.0;
    double r_in = 0.0;
    double r_out = 0.0;
    Eigen::VectorXd steiner;      ///< Steiner point (curvature-free centroid)
    Eigen::VectorXd inball_center;
    Eigen::VectorXd circumcenter;
};

ExtentReport geometry_extents(const ScalarField& S);
/// Same, reusing an already computed bundle (positions, gradients).
ExtentReport geometry_extents(const CurvatureBundle& bundle);

/// Steiner point of the body with support samples S:
/// s = (n+1)/|S^n| * integral of S(z) z.
Eigen::VectorXd steiner_point(const ScalarField& S);

} // namespace ascflow
