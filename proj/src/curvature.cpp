#include <ascflow/curvature.hpp>

#include <ascflow/errors.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>

namespace ascflow {

namespace {

/// Damped Newton iteration on a log-sum-exp smoothing of a discrete
/// Chebyshev program, with a geometrically decreasing smoothing parameter.
/// Shared by the inball (maximin) and circumball (minimax) solves.
struct ChebyshevResult {
    double value = 0.0;
    Eigen::VectorXd center;
};

/// r_in = max_p min_k (S_k - p . z_k): the largest ball, centered at p,
/// contained in all node-sampled supporting half-spaces.
ChebyshevResult inball_program(const Eigen::MatrixXd& nodes, const Eigen::VectorXd& S,
                               Eigen::VectorXd p, double scale) {
    const int d = static_cast<int>(nodes.cols());
    double mu = 0.1 * scale;
    const double mu_final = 1e-12 * scale;
    int budget = 100;
    while (budget > 0) {
        for (int it = 0; it < 10 && budget > 0; ++it, --budget) {
            Eigen::VectorXd g = S - nodes * p;
            double gmin = g.minCoeff();
            Eigen::VectorXd w = (-(g.array() - gmin) / mu).exp();
            w /= w.sum();
            Eigen::VectorXd zbar = nodes.transpose() * w;
            Eigen::MatrixXd cov = nodes.transpose() * w.asDiagonal() * nodes - zbar * zbar.transpose();
            Eigen::VectorXd grad = -zbar; // ascent direction of the smoothed minimum
            if (grad.norm() < 1e-13) break;
            double delta = 1e-12 + 1e-9 * cov.trace() / (d * mu);
            Eigen::MatrixXd A = cov / mu + delta * Eigen::MatrixXd::Identity(d, d);
            Eigen::VectorXd step = A.ldlt().solve(grad);
            double cap = 0.5 * scale;
            if (step.norm() > cap) step *= cap / step.norm();
            p += step;
            if (step.norm() < 1e-11 * (1.0 + p.norm())) break;
        }
        if (mu <= mu_final) break;
        mu = std::max(mu * 0.25, mu_final);
    }
    ChebyshevResult out;
    out.center = p;
    out.value = (S - nodes * p).minCoeff();
    return out;
}

/// r_out = min_p max_k |X_k - p|: the smallest ball around the node-sampled
/// surface points.
ChebyshevResult circumball_program(const Eigen::MatrixXd& X, Eigen::VectorXd p, double scale) {
    const int d = static_cast<int>(X.cols());
    const int N = static_cast<int>(X.rows());
    double mu = 0.1 * scale;
    const double mu_final = 1e-12 * scale;
    int budget = 100;
    Eigen::VectorXd dist(N);
    Eigen::MatrixXd U(N, d);
    while (budget > 0) {
        for (int it = 0; it < 10 && budget > 0; ++it, --budget) {
            for (int k = 0; k < N; ++k) {
                Eigen::VectorXd diff = p - X.row(k).transpose();
                double dk = std::max(diff.norm(), 1e-300);
                dist(k) = dk;
                U.row(k) = diff.transpose() / dk;
            }
            double dmax = dist.maxCoeff();
            Eigen::VectorXd w = ((dist.array() - dmax) / mu).exp();
            w /= w.sum();
            Eigen::VectorXd ubar = U.transpose() * w;
            Eigen::MatrixXd uu = U.transpose() * w.asDiagonal() * U;
            Eigen::MatrixXd curv = Eigen::MatrixXd::Zero(d, d);
            for (int k = 0; k < N; ++k)
                curv += (w(k) / dist(k)) * (Eigen::MatrixXd::Identity(d, d) -
                                            U.row(k).transpose() * U.row(k));
            Eigen::MatrixXd H = curv + (uu - ubar * ubar.transpose()) / mu;
            if (ubar.norm() < 1e-13) break;
            double delta = 1e-12 + 1e-9 * H.trace() / d;
            Eigen::VectorXd step = (H + delta * Eigen::MatrixXd::Identity(d, d)).ldlt().solve(ubar);
            double cap = 0.5 * scale;
            if (step.norm() > cap) step *= cap / step.norm();
            p -= step;
            if (step.norm() < 1e-11 * (1.0 + p.norm())) break;
        }
        if (mu <= mu_final) break;
        mu = std::max(mu * 0.25, mu_final);
    }
    ChebyshevResult out;
    out.center = p;
    out.value = (X.rowwise() - p.transpose()).rowwise().norm().maxCoeff();
    return out;
}

} // namespace

SymmetricFunctions symmetric_functions(const Eigen::VectorXd& lambda) {
    SymmetricFunctions s;
    s.K = 1.0;
    for (int i = 0; i < lambda.size(); ++i) {
        s.H += lambda(i);
        s.A2 += lambda(i) * lambda(i);
        s.K *= lambda(i);
    }
    s.R = s.H * s.H - s.A2;
    return s;
}

CurvatureBundle curvature_from_support(const ScalarField& S, double aliasing_tolerance) {
    const SphereGrid& grid = *S.grid;
    const int N = grid.num_nodes();
    const int n = grid.n;
    const int packed = n * (n + 1) / 2;

    FieldJet jet = covariant_derivatives(S, aliasing_tolerance);

    CurvatureBundle cb;
    cb.grid = S.grid;
    cb.S = S.values;
    cb.grad_S = jet.grad;
    cb.radii.resize(N, packed);
    cb.rho.resize(N, n);
    cb.lambda.resize(N, n);
    cb.eigenframe.resize(N, n * n);
    cb.H.resize(N);
    cb.A2.resize(N);
    cb.R.resize(N);
    cb.K.resize(N);
    cb.positions.resize(N, n + 1);

    // Radii matrix b = Hess S + S g and its eigenvalues per node.
    double worst = std::numeric_limits<double>::infinity();
    int worst_node = -1;
    for (int k = 0; k < N; ++k) {
        for (int c = 0; c < packed; ++c) cb.radii(k, c) = jet.hess(k, c);
        for (int i = 0; i < n; ++i) cb.radii(k, FieldJet::packed_index(i, i, n)) += S.values(k);

        if (grid.mode == GridMode::full2d) {
            Eigen::Matrix2d b;
            b << cb.radii(k, 0), cb.radii(k, 1), cb.radii(k, 1), cb.radii(k, 2);
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(b);
            cb.rho(k, 0) = eig.eigenvalues()(0);
            cb.rho(k, 1) = eig.eigenvalues()(1);
            cb.eigenframe(k, 0) = eig.eigenvectors()(0, 0);
            cb.eigenframe(k, 1) = eig.eigenvectors()(1, 0);
            cb.eigenframe(k, 2) = eig.eigenvectors()(0, 1);
            cb.eigenframe(k, 3) = eig.eigenvectors()(1, 1);
        } else {
            // Diagonal in the meridian frame: sort with an index permutation.
            Eigen::VectorXd diag(n);
            for (int i = 0; i < n; ++i) diag(i) = cb.radii(k, FieldJet::packed_index(i, i, n));
            std::array<int, 8> order{};
            for (int i = 0; i < n; ++i) order[i] = i;
            std::sort(order.begin(), order.begin() + n,
                      [&](int a, int b2) { return diag(a) < diag(b2); });
            for (int i = 0; i < n * n; ++i) cb.eigenframe(k, i) = 0.0;
            for (int i = 0; i < n; ++i) {
                cb.rho(k, i) = diag(order[i]);
                cb.eigenframe(k, i * n + order[i]) = 1.0; // column i = e_{order[i]}
            }
        }
        if (cb.rho(k, 0) < worst) {
            worst = cb.rho(k, 0);
            worst_node = k;
        }
    }
    cb.min_rho = worst;
    cb.max_rho = cb.rho.maxCoeff();
    if (!(worst > 0.0))
        throw ConvexityError("curvature_from_support: radii matrix not positive definite",
                             worst_node, worst);

    for (int k = 0; k < N; ++k) {
        Eigen::VectorXd lam(n);
        for (int i = 0; i < n; ++i) lam(i) = 1.0 / cb.rho(k, n - 1 - i); // ascending
        cb.lambda.row(k) = lam.transpose();
        SymmetricFunctions sf = symmetric_functions(lam);
        cb.H(k) = sf.H;
        cb.A2(k) = sf.A2;
        cb.R(k) = sf.R;
        cb.K(k) = sf.K;

        Eigen::VectorXd x = S.values(k) * grid.nodes.row(k).transpose();
        Eigen::MatrixXd frame = grid.tangent_frame(k);
        for (int c = 0; c < frame.cols(); ++c) x += jet.grad(k, c) * frame.col(c);
        cb.positions.row(k) = x.transpose();
    }
    return cb;
}

Eigen::VectorXd steiner_point(const ScalarField& S) {
    const SphereGrid& grid = *S.grid;
    Eigen::VectorXd s = Eigen::VectorXd::Zero(grid.ambient_dim());
    if (grid.mode == GridMode::axisym) {
        // Transverse components vanish by the longitude average; the stored
        // meridian covers only half of each transverse circle, so only the
        // axial component may be read off the meridian quadrature.
        double acc = 0.0;
        for (int k = 0; k < grid.num_nodes(); ++k)
            acc += grid.weights(k) * S.values(k) * grid.nodes(k, grid.n);
        s(grid.n) = acc;
    } else {
        for (int k = 0; k < grid.num_nodes(); ++k)
            s += grid.weights(k) * S.values(k) * grid.nodes.row(k).transpose();
    }
    return (grid.n + 1) / sphere_measure(grid.n) * s;
}

ExtentReport geometry_extents(const CurvatureBundle& bundle) {
    const SphereGrid& grid = *bundle.grid;
    const int N = grid.num_nodes();
    ExtentReport ext;
    ext.width.resize(N);
    for (int k = 0; k < N; ++k) ext.width(k) = bundle.S(k) + bundle.S(grid.antipodal_index(k));
    ext.w_min = ext.width.minCoeff();
    ext.w_max = ext.width.maxCoeff();
    ext.steiner = steiner_point(ScalarField(bundle.grid, bundle.S));

    double scale = ext.w_max > 0.0 ? 0.5 * ext.w_max : 1.0;
    if (grid.mode == GridMode::axisym) {
        // The stored meridian covers only half of each transverse circle.
        // Mirror it in the meridian plane: the Chebyshev programs become
        // two-dimensional (radial, axial), their optima stay exactly on the
        // axis by symmetry, and the values match the rotationally complete
        // three-dimensional programs.
        Eigen::MatrixXd nodes2(2 * N, 2), X2(2 * N, 2);
        Eigen::VectorXd S2(2 * N);
        for (int k = 0; k < N; ++k) {
            nodes2(k, 0) = grid.nodes(k, 0);
            nodes2(k + N, 0) = -grid.nodes(k, 0);
            nodes2(k, 1) = nodes2(k + N, 1) = grid.nodes(k, grid.n);
            X2(k, 0) = bundle.positions(k, 0);
            X2(k + N, 0) = -bundle.positions(k, 0);
            X2(k, 1) = X2(k + N, 1) = bundle.positions(k, grid.n);
            S2(k) = S2(k + N) = bundle.S(k);
        }
        Eigen::Vector2d start(0.0, ext.steiner(grid.n));
        ChebyshevResult in = inball_program(nodes2, S2, start, scale);
        ChebyshevResult out = circumball_program(X2, start, scale);
        ext.r_in = in.value;
        ext.r_out = out.value;
        ext.inball_center = Eigen::VectorXd::Zero(grid.ambient_dim());
        ext.inball_center(grid.n) = in.center(1);
        ext.circumcenter = Eigen::VectorXd::Zero(grid.ambient_dim());
        ext.circumcenter(grid.n) = out.center(1);
        return ext;
    }
    ChebyshevResult in = inball_program(grid.nodes, bundle.S, ext.steiner, scale);
    ext.r_in = in.value;
    ext.inball_center = in.center;
    ChebyshevResult out = circumball_program(bundle.positions, ext.steiner, scale);
    ext.r_out = out.value;
    ext.circumcenter = out.center;
    return ext;
}

ExtentReport geometry_extents(const ScalarField& S) {
    return geometry_extents(curvature_from_support(S));
}

} // namespace ascflow
