#include <ascflow/geometry.hpp>

#include <ascflow/errors.hpp>

#include <cmath>

namespace ascflow {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 6.28318530717958647692;
constexpr double kFourPi = 12.56637061435917295385;

/// Gauss-Legendre nodes (descending) and weights on [-1, 1], symmetrized so
/// that x[n-1-i] == -x[i] exactly.
void gauss_legendre(int npts, Eigen::VectorXd& x, Eigen::VectorXd& w) {
    x.resize(npts);
    w.resize(npts);
    int half = npts / 2;
    for (int i = 0; i < half; ++i) {
        // Tricomi-type initial guess for the i-th root from the top.
        double xi = std::cos(kPi * (i + 0.75) / (npts + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            // Legendre recurrence for P_n and P_{n-1}.
            double p0 = 1.0, p1 = xi;
            for (int l = 2; l <= npts; ++l) {
                double p2 = ((2.0 * l - 1.0) * xi * p1 - (l - 1.0) * p0) / l;
                p0 = p1;
                p1 = p2;
            }
            dp = npts * (xi * p1 - p0) / (xi * xi - 1.0);
            double step = p1 / dp;
            xi -= step;
            if (std::abs(step) < 1e-15) break;
        }
        // One clean derivative evaluation at the converged node.
        double p0 = 1.0, p1 = xi;
        for (int l = 2; l <= npts; ++l) {
            double p2 = ((2.0 * l - 1.0) * xi * p1 - (l - 1.0) * p0) / l;
            p0 = p1;
            p1 = p2;
        }
        dp = npts * (xi * p1 - p0) / (xi * xi - 1.0);
        double wi = 2.0 / ((1.0 - xi * xi) * dp * dp);
        x(i) = xi;
        x(npts - 1 - i) = -xi;
        w(i) = wi;
        w(npts - 1 - i) = wi;
    }
    if (npts % 2 == 1) {
        // Central node is exactly zero; P'_n(0) via the recurrence.
        double p0 = 1.0, p1 = 0.0;
        for (int l = 2; l <= npts; ++l) {
            double p2 = -(l - 1.0) * p0 / l;
            p0 = p1;
            p1 = p2;
        }
        // dp at x = 0: n (x p_n - p_{n-1}) / (x^2 - 1) = n p_{n-1}.
        double dp = npts * p0;
        x(half) = 0.0;
        w(half) = 2.0 / (dp * dp);
    }
}

/// Normalized associated Legendre tables at the given colatitudes:
/// leg[m](i, l - m) = Pbar_{l,m}(cos theta_i), and the theta-derivative.
void legendre_tables(int band_limit, const Eigen::VectorXd& cos_theta, const Eigen::VectorXd& sin_theta,
                     std::vector<Eigen::MatrixXd>& leg, std::vector<Eigen::MatrixXd>& dleg) {
    int L = band_limit;
    int nt = static_cast<int>(cos_theta.size());
    leg.assign(L + 1, Eigen::MatrixXd());
    dleg.assign(L + 1, Eigen::MatrixXd());
    for (int m = 0; m <= L; ++m) {
        leg[m].resize(nt, L + 1 - m);
        dleg[m].resize(nt, L + 1 - m);
    }
    for (int i = 0; i < nt; ++i) {
        double ct = cos_theta(i);
        double st = sin_theta(i);
        double pmm = std::sqrt(1.0 / kFourPi);
        for (int m = 0; m <= L; ++m) {
            if (m > 0) pmm *= -std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * st;
            leg[m](i, 0) = pmm;
            dleg[m](i, 0) = m * ct * pmm / st;
            double prev2 = pmm;
            double prev = 0.0;
            if (m < L) {
                prev = std::sqrt(2.0 * m + 3.0) * ct * pmm;
                leg[m](i, 1) = prev;
                int l = m + 1;
                double c = std::sqrt((2.0 * l + 1.0) * (1.0 * l * l - 1.0 * m * m) / (2.0 * l - 1.0));
                dleg[m](i, 1) = (l * ct * prev - c * prev2) / st;
            }
            for (int l = m + 2; l <= L; ++l) {
                double a = std::sqrt((4.0 * l * l - 1.0) / (1.0 * l * l - 1.0 * m * m));
                double b = std::sqrt((2.0 * l + 1.0) * ((l - 1.0) * (l - 1.0) - 1.0 * m * m) /
                                     ((2.0 * l - 3.0) * (1.0 * l * l - 1.0 * m * m)));
                double p = a * ct * prev - b * prev2;
                leg[m](i, l - m) = p;
                double c = std::sqrt((2.0 * l + 1.0) * (1.0 * l * l - 1.0 * m * m) / (2.0 * l - 1.0));
                dleg[m](i, l - m) = (l * ct * p - c * prev) / st;
                prev2 = prev;
                prev = p;
            }
        }
    }
}

/// Cosine moments of the sin^p weight on [0, pi]:
/// I(k, p) = \int_0^pi cos(k t) sin^p(t) dt, for k = 0..kmax.
Eigen::VectorXd trig_moments(int kmax, int p) {
    Eigen::VectorXd base(kmax + 1), cur(kmax + 1);
    int q0 = p % 2;
    if (q0 == 0) {
        base.setZero();
        base(0) = kPi;
    } else {
        for (int k = 0; k <= kmax; ++k) {
            if (k == 1)
                base(k) = 0.0;
            else
                base(k) = (1.0 + std::cos(k * kPi)) / (1.0 - 1.0 * k * k);
        }
    }
    if (p == q0) return base;
    for (int q = q0 + 2; q <= p; q += 2) {
        for (int k = 0; k <= kmax; ++k) {
            if (k == q)
                cur(k) = kPi * std::cos(q * kPi / 2.0) / std::pow(2.0, q);
            else
                cur(k) = q * (q - 1.0) / (1.0 * q * q - 1.0 * k * k) * base(k);
        }
        base = cur;
    }
    return base;
}

/// Clenshaw-Curtis type weights for \int_0^pi f(t) sin^p(t) dt on the
/// uniform grid t_j = j pi / (N-1): exact whenever f is a cosine polynomial
/// of degree <= N-1.
Eigen::VectorXd axisym_weights(int N, int p) {
    Eigen::VectorXd m = trig_moments(N - 1, p);
    Eigen::VectorXd w(N);
    for (int j = 0; j < N; ++j) {
        double tau = (j == 0 || j == N - 1) ? 0.5 : 1.0;
        double acc = 0.0;
        for (int k = 0; k <= N - 1; ++k) {
            double sigma = (k == 0 || k == N - 1) ? 0.5 : 1.0;
            acc += sigma * m(k) * std::cos(k * j * kPi / (N - 1));
        }
        w(j) = 2.0 / (N - 1) * tau * acc;
    }
    return w;
}

/// Reflect an index across both poles (even extension of axisymmetric data).
inline int reflect(int j, int N) {
    if (j < 0) j = -j;
    if (j > N - 1) j = 2 * (N - 1) - j;
    return j;
}

struct RingDerivatives {
    Eigen::MatrixXd f, ft, ftt, fp, ftp, fpp; // n_phi x n_theta each
};

/// Unpacked per-(l,m) coefficient blocks: cos and sin families.
struct ModeCoefficients {
    std::vector<Eigen::VectorXd> c, s; // [m], length L+1-m each
};

ModeCoefficients unpack_coefficients(int L, const Eigen::VectorXd& packed) {
    ModeCoefficients mc;
    mc.c.assign(L + 1, Eigen::VectorXd());
    mc.s.assign(L + 1, Eigen::VectorXd());
    int pos = 0;
    for (int m = 0; m <= L; ++m) {
        int nm = L + 1 - m;
        mc.c[m] = Eigen::VectorXd::Zero(nm);
        mc.s[m] = Eigen::VectorXd::Zero(nm);
        if (m == 0) {
            for (int r = 0; r < nm; ++r) mc.c[0](r) = packed(pos + r);
            pos += nm;
        } else {
            for (int r = 0; r < nm; ++r) {
                mc.c[m](r) = packed(pos + 2 * r);
                mc.s[m](r) = packed(pos + 2 * r + 1);
            }
            pos += 2 * nm;
        }
    }
    return mc;
}

Eigen::VectorXd pack_coefficients(int L, const ModeCoefficients& mc) {
    Eigen::VectorXd packed(sh_coefficient_count(L));
    int pos = 0;
    for (int m = 0; m <= L; ++m) {
        int nm = L + 1 - m;
        if (m == 0) {
            for (int r = 0; r < nm; ++r) packed(pos + r) = mc.c[0](r);
            pos += nm;
        } else {
            for (int r = 0; r < nm; ++r) {
                packed(pos + 2 * r) = mc.c[m](r);
                packed(pos + 2 * r + 1) = mc.s[m](r);
            }
            pos += 2 * nm;
        }
    }
    return packed;
}

/// Forward transform: returns unpacked coefficient blocks (orthonormal real
/// convention: m = 0 modes Pbar_{l,0}; m > 0 modes sqrt(2) Pbar_{l,m} cos/sin).
ModeCoefficients analysis_blocks(const SphereGrid& grid, const Eigen::VectorXd& values) {
    int L = grid.band_limit;
    int nt = grid.n_theta, np = grid.n_phi;
    Eigen::Map<const Eigen::MatrixXd> F(values.data(), np, nt);
    // Ring-wise longitude transforms, scaled by the phi quadrature weight.
    Eigen::MatrixXd Fc = (kTwoPi / np) * (grid.cos_mphi.transpose() * F); // (L+1) x nt
    Eigen::MatrixXd Fs = (kTwoPi / np) * (grid.sin_mphi.transpose() * F);
    ModeCoefficients mc;
    mc.c.assign(L + 1, Eigen::VectorXd());
    mc.s.assign(L + 1, Eigen::VectorXd());
    for (int m = 0; m <= L; ++m) {
        double norm = (m == 0) ? 1.0 : std::sqrt(2.0);
        Eigen::VectorXd vc = grid.ring_weights.cwiseProduct(Fc.row(m).transpose());
        mc.c[m] = norm * (grid.legendre[m].transpose() * vc);
        if (m == 0) {
            mc.s[m] = Eigen::VectorXd::Zero(L + 1);
        } else {
            Eigen::VectorXd vs = grid.ring_weights.cwiseProduct(Fs.row(m).transpose());
            mc.s[m] = norm * (grid.legendre[m].transpose() * vs);
        }
    }
    return mc;
}

/// Inverse transform with optional colatitude/longitude derivatives.
RingDerivatives synthesis_blocks(const SphereGrid& grid, const ModeCoefficients& mc, bool derivatives) {
    int L = grid.band_limit;
    int nt = grid.n_theta, np = grid.n_phi;
    Eigen::MatrixXd Ac = Eigen::MatrixXd::Zero(L + 1, nt), As = Eigen::MatrixXd::Zero(L + 1, nt);
    Eigen::MatrixXd Dc, Ds, Bc, Bs;
    if (derivatives) {
        Dc = Eigen::MatrixXd::Zero(L + 1, nt);
        Ds = Eigen::MatrixXd::Zero(L + 1, nt);
        Bc = Eigen::MatrixXd::Zero(L + 1, nt);
        Bs = Eigen::MatrixXd::Zero(L + 1, nt);
    }
    for (int m = 0; m <= L; ++m) {
        double norm = (m == 0) ? 1.0 : std::sqrt(2.0);
        Eigen::VectorXd cc = norm * mc.c[m];
        Ac.row(m) = (grid.legendre[m] * cc).transpose();
        if (derivatives) {
            Dc.row(m) = (grid.legendre_dtheta[m] * cc).transpose();
            Eigen::VectorXd scaled = cc;
            for (int l = m; l <= L; ++l) scaled(l - m) *= 1.0 * l * (l + 1.0);
            Bc.row(m) = (grid.legendre[m] * scaled).transpose();
        }
        if (m > 0) {
            Eigen::VectorXd ss = norm * mc.s[m];
            As.row(m) = (grid.legendre[m] * ss).transpose();
            if (derivatives) {
                Ds.row(m) = (grid.legendre_dtheta[m] * ss).transpose();
                Eigen::VectorXd scaled = ss;
                for (int l = m; l <= L; ++l) scaled(l - m) *= 1.0 * l * (l + 1.0);
                Bs.row(m) = (grid.legendre[m] * scaled).transpose();
            }
        }
    }
    RingDerivatives out;
    out.f = grid.cos_mphi * Ac + grid.sin_mphi * As;
    if (!derivatives) return out;

    // Second colatitude derivative from the associated Legendre equation:
    // Pbar'' = -cot(t) Pbar' - (l(l+1) - m^2/sin^2 t) Pbar.
    Eigen::MatrixXd A2c(L + 1, nt), A2s(L + 1, nt);
    for (int i = 0; i < nt; ++i) {
        double ct = std::cos(grid.theta(i));
        double st = std::sin(grid.theta(i));
        double cot = ct / st, inv2 = 1.0 / (st * st);
        for (int m = 0; m <= L; ++m) {
            A2c(m, i) = -cot * Dc(m, i) - Bc(m, i) + (1.0 * m * m) * inv2 * Ac(m, i);
            A2s(m, i) = -cot * Ds(m, i) - Bs(m, i) + (1.0 * m * m) * inv2 * As(m, i);
        }
    }

    Eigen::VectorXd mfac(L + 1), m2fac(L + 1);
    for (int m = 0; m <= L; ++m) {
        mfac(m) = m;
        m2fac(m) = 1.0 * m * m;
    }
    out.ft = grid.cos_mphi * Dc + grid.sin_mphi * Ds;
    out.ftt = grid.cos_mphi * A2c + grid.sin_mphi * A2s;
    out.fp = grid.cos_mphi * (mfac.asDiagonal() * As) - grid.sin_mphi * (mfac.asDiagonal() * Ac);
    out.ftp = grid.cos_mphi * (mfac.asDiagonal() * Ds) - grid.sin_mphi * (mfac.asDiagonal() * Dc);
    out.fpp = -(grid.cos_mphi * (m2fac.asDiagonal() * Ac) + grid.sin_mphi * (m2fac.asDiagonal() * As));
    return out;
}

} // namespace

int FieldJet::packed_index(int i, int j, int n) {
    if (i > j) std::swap(i, j);
    return i * n - i * (i - 1) / 2 + (j - i);
}

double sphere_measure(int d) {
    if (d < 0) throw ConfigError("sphere_measure: dimension must be non-negative");
    if (d == 0) return 2.0;
    if (d == 1) return kTwoPi;
    return sphere_measure(d - 2) * kTwoPi / (d - 1);
}

int sh_coefficient_count(int band_limit) { return (band_limit + 1) * (band_limit + 1); }

std::shared_ptr<const SphereGrid> build_grid(int n, GridMode mode, int resolution) {
    auto grid = std::make_shared<SphereGrid>();
    grid->n = n;
    grid->mode = mode;

    if (mode == GridMode::full2d) {
        if (n != 2) throw ConfigError("full2d grids require sphere dimension n = 2");
        if (resolution < 4) throw ConfigError("full2d band limit must be at least 4");
        int L = resolution;
        grid->band_limit = L;
        grid->n_theta = L + 1;
        grid->n_phi = 2 * L + 2;
        int nt = grid->n_theta, np = grid->n_phi;

        Eigen::VectorXd x, w;
        gauss_legendre(nt, x, w);
        grid->ring_weights = w;
        grid->theta.resize(nt);
        Eigen::VectorXd st(nt);
        for (int i = 0; i < nt; ++i) {
            grid->theta(i) = std::acos(x(i));
            st(i) = std::sqrt((1.0 - x(i)) * (1.0 + x(i)));
        }

        // Longitudes with exactly mirrored trig values at phi + pi.
        grid->phi.resize(np);
        Eigen::VectorXd cp(np), sp(np);
        int half = np / 2;
        for (int j = 0; j < half; ++j) {
            grid->phi(j) = kTwoPi * j / np;
            grid->phi(j + half) = kTwoPi * j / np + kPi;
            cp(j) = std::cos(grid->phi(j));
            sp(j) = std::sin(grid->phi(j));
            cp(j + half) = -cp(j);
            sp(j + half) = -sp(j);
        }

        grid->nodes.resize(nt * np, 3);
        grid->weights.resize(nt * np);
        for (int i = 0; i < nt; ++i) {
            for (int j = 0; j < np; ++j) {
                int k = i * np + j;
                grid->nodes(k, 0) = st(i) * cp(j);
                grid->nodes(k, 1) = st(i) * sp(j);
                grid->nodes(k, 2) = x(i);
                grid->weights(k) = w(i) * kTwoPi / np;
            }
        }

        legendre_tables(L, x, st, grid->legendre, grid->legendre_dtheta);
        grid->cos_mphi.resize(np, L + 1);
        grid->sin_mphi.resize(np, L + 1);
        for (int j = 0; j < np; ++j) {
            for (int m = 0; m <= L; ++m) {
                grid->cos_mphi(j, m) = std::cos(m * grid->phi(j));
                grid->sin_mphi(j, m) = std::sin(m * grid->phi(j));
            }
        }
        return grid;
    }

    // axisym
    if (n < 2) throw ConfigError("axisym grids require sphere dimension n >= 2");
    if (resolution < 9) throw ConfigError("axisym grids need at least 9 colatitude nodes");
    int N = resolution;
    grid->band_limit = 0;
    grid->n_theta = N;
    grid->n_phi = 1;
    grid->dtheta = kPi / (N - 1);
    grid->theta.resize(N);
    Eigen::VectorXd ct(N), st(N);
    for (int j = 0; j <= (N - 1) / 2; ++j) {
        grid->theta(j) = j * kPi / (N - 1);
        grid->theta(N - 1 - j) = kPi - j * kPi / (N - 1);
        double c = std::cos(grid->theta(j));
        double s = std::sin(grid->theta(j));
        if (2 * j == N - 1) c = 0.0;
        ct(j) = c;
        st(j) = s;
        ct(N - 1 - j) = -c;
        st(N - 1 - j) = s;
    }
    grid->nodes = Eigen::MatrixXd::Zero(N, n + 1);
    for (int j = 0; j < N; ++j) {
        grid->nodes(j, 0) = st(j);
        grid->nodes(j, n) = ct(j);
    }
    grid->weights = sphere_measure(n - 1) * axisym_weights(N, n - 1);
    return grid;
}

int SphereGrid::antipodal_index(int k) const {
    if (mode == GridMode::full2d) {
        int i = k / n_phi, j = k % n_phi;
        int jm = (j + n_phi / 2) % n_phi;
        return (n_theta - 1 - i) * n_phi + jm;
    }
    return n_theta - 1 - k;
}

Eigen::MatrixXd SphereGrid::tangent_frame(int k) const {
    if (mode == GridMode::full2d) {
        int i = k / n_phi, j = k % n_phi;
        double ct = std::cos(theta(i)), st = std::sin(theta(i));
        double cp = std::cos(phi(j)), sp = std::sin(phi(j));
        Eigen::MatrixXd frame(3, 2);
        frame.col(0) << ct * cp, ct * sp, -st;
        frame.col(1) << -sp, cp, 0.0;
        return frame;
    }
    Eigen::MatrixXd frame = Eigen::MatrixXd::Zero(n + 1, 1);
    frame(0, 0) = std::cos(theta(k));
    frame(n, 0) = -std::sin(theta(k));
    return frame;
}

double integrate(const SphereGrid& grid, const Eigen::VectorXd& values) {
    if (values.size() != grid.num_nodes())
        throw ConfigError("integrate: field size does not match the grid");
    return grid.weights.dot(values);
}

double integrate(const ScalarField& f) { return integrate(*f.grid, f.values); }

Eigen::VectorXd sh_analysis(const ScalarField& f) {
    const SphereGrid& grid = *f.grid;
    if (grid.mode != GridMode::full2d)
        throw ConfigError("spherical-harmonic transforms require a full2d grid");
    return pack_coefficients(grid.band_limit, analysis_blocks(grid, f.values));
}

Eigen::VectorXd sh_synthesis(const SphereGrid& grid, const Eigen::VectorXd& coeffs) {
    if (grid.mode != GridMode::full2d)
        throw ConfigError("spherical-harmonic transforms require a full2d grid");
    if (coeffs.size() != sh_coefficient_count(grid.band_limit))
        throw ConfigError("sh_synthesis: coefficient vector has the wrong size");
    ModeCoefficients mc = unpack_coefficients(grid.band_limit, coeffs);
    RingDerivatives r = synthesis_blocks(grid, mc, false);
    Eigen::VectorXd values(grid.num_nodes());
    Eigen::Map<Eigen::MatrixXd>(values.data(), grid.n_phi, grid.n_theta) = r.f;
    return values;
}

double aliasing_energy_ratio(const ScalarField& f) {
    const SphereGrid& grid = *f.grid;
    if (grid.mode != GridMode::full2d)
        throw ConfigError("aliasing_energy_ratio requires a full2d grid");
    ModeCoefficients mc = analysis_blocks(grid, f.values);
    RingDerivatives r = synthesis_blocks(grid, mc, false);
    Eigen::VectorXd back(grid.num_nodes());
    Eigen::Map<Eigen::MatrixXd>(back.data(), grid.n_phi, grid.n_theta) = r.f;
    double energy = grid.weights.dot(f.values.cwiseProduct(f.values));
    Eigen::VectorXd resid = f.values - back;
    double lost = grid.weights.dot(resid.cwiseProduct(resid));
    if (energy <= 1e-300) return 0.0;
    return lost / energy;
}

FieldJet covariant_derivatives(const ScalarField& f, double aliasing_tolerance) {
    const SphereGrid& grid = *f.grid;
    int N = grid.num_nodes();
    if (f.values.size() != N) throw ConfigError("covariant_derivatives: field size mismatch");

    FieldJet jet;
    int n = grid.n;
    jet.grad = Eigen::MatrixXd::Zero(N, n);
    jet.hess = Eigen::MatrixXd::Zero(N, n * (n + 1) / 2);

    if (grid.mode == GridMode::full2d) {
        if (aliasing_tolerance > 0.0) {
            double ratio = aliasing_energy_ratio(f);
            if (ratio > aliasing_tolerance)
                throw ResolutionError("covariant_derivatives: field energy above the band limit "
                                      "(refine the grid)",
                                      ratio);
        }
        ModeCoefficients mc = analysis_blocks(grid, f.values);
        RingDerivatives r = synthesis_blocks(grid, mc, true);
        for (int i = 0; i < grid.n_theta; ++i) {
            double ct = std::cos(grid.theta(i)), st = std::sin(grid.theta(i));
            double inv = 1.0 / st, inv2 = inv * inv, cot = ct * inv;
            for (int j = 0; j < grid.n_phi; ++j) {
                int k = i * grid.n_phi + j;
                double ft = r.ft(j, i), fp = r.fp(j, i);
                jet.grad(k, 0) = ft;
                jet.grad(k, 1) = fp * inv;
                jet.hess(k, 0) = r.ftt(j, i);
                jet.hess(k, 1) = r.ftp(j, i) * inv - cot * inv * fp;
                jet.hess(k, 2) = r.fpp(j, i) * inv2 + cot * ft;
            }
        }
        return jet;
    }

    // axisym: 4th-order centered differences with even reflection at poles.
    int Nt = grid.n_theta;
    double h = grid.dtheta;
    const Eigen::VectorXd& v = f.values;
    for (int j = 0; j < Nt; ++j) {
        double vm2 = v(reflect(j - 2, Nt)), vm1 = v(reflect(j - 1, Nt));
        double vp1 = v(reflect(j + 1, Nt)), vp2 = v(reflect(j + 2, Nt));
        double ft = (vm2 - 8.0 * vm1 + 8.0 * vp1 - vp2) / (12.0 * h);
        double ftt = (-vm2 + 16.0 * vm1 - 30.0 * v(j) + 16.0 * vp1 - vp2) / (12.0 * h * h);
        jet.grad(j, 0) = ft;
        jet.hess(j, FieldJet::packed_index(0, 0, n)) = ftt;
        bool pole = (j == 0 || j == Nt - 1);
        double trans = pole ? ftt : (std::cos(grid.theta(j)) / std::sin(grid.theta(j))) * ft;
        for (int i = 1; i < n; ++i) jet.hess(j, FieldJet::packed_index(i, i, n)) = trans;
    }
    return jet;
}

} // namespace ascflow
