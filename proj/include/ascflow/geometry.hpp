#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

namespace ascflow {

/// Discretization of the unit sphere S^n (the Gauss sphere of a convex body).
///
/// Two modes:
///  - full2d:  n = 2 only.  Tensor grid of Gauss-Legendre colatitudes
///             (L+1 rings for band limit L) times 2L+2 equispaced
///             longitudes.  Derivatives are spectral: fields are expanded
///             in real spherical harmonics up to degree L and
///             differentiated exactly mode by mode.
///  - axisym:  any n >= 2, rotationally symmetric fields only.  Uniform
///             colatitude grid on [0, pi] including both poles;
///             derivatives are 4th-order centered finite differences with
///             even reflection across the poles; quadrature weights are
///             exact for trigonometric interpolants (Clenshaw-Curtis type
///             against the sin^(n-1) weight), so low-order moments are
///             spectrally accurate.
enum class GridMode {
    full2d,
    axisym,
};

/// Grid data plus the precomputed tables needed for differentiation and
/// integration.  Immutable after construction; shared via shared_ptr so
/// fields can carry their grid cheaply.
struct SphereGrid {
    int n = 2;                ///< sphere dimension (hypersurfaces live in R^{n+1})
    GridMode mode = GridMode::full2d;

    // full2d: band limit L; axisym: unused (0).
    int band_limit = 0;
    int n_theta = 0;          ///< number of colatitude nodes (rings for full2d)
    int n_phi = 1;            ///< longitudes per ring (1 for axisym)

    /// Colatitudes theta_i, ascending in (0, pi) for full2d (Gauss-Legendre),
    /// [0, pi] inclusive for axisym (uniform).
    Eigen::VectorXd theta;
    /// Longitudes phi_j (full2d only), equispaced starting at 0.
    Eigen::VectorXd phi;

    /// Unit normals: row k is the node z_k in R^{n+1}.  full2d ordering is
    /// ring-major: k = i * n_phi + j.  The last coordinate is the symmetry
    /// axis direction: z = (sin t cos p, sin t sin p, cos t) for n = 2 and
    /// z = (sin t, 0, ..., 0, cos t) for axisym meridian nodes.
    Eigen::MatrixXd nodes;

    /// Quadrature weights per node; sum equals the measure of S^n.
    Eigen::VectorXd weights;
    /// full2d: Gauss-Legendre weights per colatitude ring.
    Eigen::VectorXd ring_weights;

    // ---- full2d spectral tables ------------------------------------------
    // Normalized associated Legendre values Pbar_{l,m}(cos theta_i) and the
    // colatitude derivative dPbar/dtheta.  legendre[m] is an
    // n_theta x (L+1-m) matrix whose column (l - m) holds Pbar_{l,m} at the
    // ring colatitudes.
    std::vector<Eigen::MatrixXd> legendre;
    std::vector<Eigen::MatrixXd> legendre_dtheta;
    /// Longitude trig tables: n_phi x (L+1), column m = cos/sin(m phi_j).
    Eigen::MatrixXd cos_mphi;
    Eigen::MatrixXd sin_mphi;

    // ---- axisym finite-difference data -----------------------------------
    double dtheta = 0.0;     ///< axisym grid spacing

    int num_nodes() const { return static_cast<int>(nodes.rows()); }
    int ambient_dim() const { return n + 1; }

    /// Index of the node where a field takes its antipodal value: the exact
    /// antipode for full2d; for axisym, the antipode reflected into the
    /// stored meridian (the same value for any axisymmetric field).
    int antipodal_index(int k) const;
    /// Orthonormal tangent frame at node k: columns e_1 (colatitude
    /// direction) and, for full2d, e_2 (longitude direction), as vectors in
    /// R^{n+1}.  Axisym returns just e_1; the remaining frame directions are
    /// transverse to the meridian plane and carry no data.
    Eigen::MatrixXd tangent_frame(int k) const;
};

/// Scalar field sampled on a sphere grid (support function, speed, ...).
struct ScalarField {
    std::shared_ptr<const SphereGrid> grid;
    Eigen::VectorXd values;

    ScalarField() = default;
    ScalarField(std::shared_ptr<const SphereGrid> g, Eigen::VectorXd v)
        : grid(std::move(g)), values(std::move(v)) {}
};

/// First and second covariant derivatives of a scalar field with respect to
/// the round metric, expressed in the orthonormal frame of each node.
///
///  - grad: N x n.  full2d columns: (e_theta, e_phi) components.  axisym
///    column 0 is the meridian derivative; transverse components vanish.
///  - hess: N x n(n+1)/2, packed upper triangle row-major:
///    (0,0), (0,1), ..., (0,n-1), (1,1), ...  For axisym the off-diagonal
///    entries are zero and all transverse diagonal entries coincide.
struct FieldJet {
    Eigen::MatrixXd grad;
    Eigen::MatrixXd hess;

    static int packed_index(int i, int j, int n);
};

/// Build a grid.  full2d: resolution = band limit L (>= 4); axisym:
/// resolution = number of colatitude nodes (>= 9, odd recommended).
/// Throws ConfigError on unsupported combinations (full2d requires n = 2).
std::shared_ptr<const SphereGrid> build_grid(int n, GridMode mode, int resolution);

/// Covariant derivatives of f in the round metric (see FieldJet).
/// full2d throws ResolutionError when the aliasing ratio of f exceeds
/// `aliasing_tolerance` (set <= 0 to skip the check).
FieldJet covariant_derivatives(const ScalarField& f, double aliasing_tolerance = 1e-6);

/// Quadrature of f over S^n against the round measure.
double integrate(const ScalarField& f);
double integrate(const SphereGrid& grid, const Eigen::VectorXd& values);

/// full2d only: node-sample residual of the band-limited projection,
/// measured as quadrature energy of f - Proj_L f relative to the energy of
/// f.  Zero (to roundoff) for band-limited fields, order one for generic
/// under-resolved data.  Components that alias exactly onto in-band modes
/// at the nodes are invisible to any sample-based measure, so this is a
/// resolution heuristic, not a spectral guarantee.
double aliasing_energy_ratio(const ScalarField& f);

/// full2d only: real spherical-harmonic analysis / synthesis.  Coefficients
/// are packed m-major matching SphereGrid::legendre_index with cosine and
/// sine parts interleaved per (l, m > 0): [m=0 block | (cos, sin) pairs...].
Eigen::VectorXd sh_analysis(const ScalarField& f);
Eigen::VectorXd sh_synthesis(const SphereGrid& grid, const Eigen::VectorXd& coeffs);
int sh_coefficient_count(int band_limit);

/// Measure of the unit sphere S^d in R^{d+1} (|S^1| = 2 pi, |S^2| = 4 pi, ...).
double sphere_measure(int d);

} // namespace ascflow
