#include <ascflow/anisotropy.hpp>
#include <ascflow/errors.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

namespace ascflow {

namespace {

/// Radial profile v(t) = psi at distance t from the family center, with
/// derivatives.  Every supported family is radial, so region extrema reduce
/// to a one-dimensional problem over the spanned radius interval.
struct RadialProfile {
    double v = 0.0;
    double dv = 0.0;
    double ddv = 0.0;
};

RadialProfile radial_profile(const AnisotropyDescriptor& psi, double t) {
    RadialProfile p;
    switch (psi.kind) {
    case PsiKind::constant:
        p.v = psi.a;
        break;
    case PsiKind::quadratic:
        p.v = psi.a + psi.b * t * t;
        p.dv = 2.0 * psi.b * t;
        p.ddv = 2.0 * psi.b;
        break;
    case PsiKind::gaussian_well: {
        const double s2 = psi.s * psi.s;
        const double e = std::exp(-t * t / s2);
        p.v = psi.a - psi.b * e;
        p.dv = (2.0 * psi.b / s2) * t * e;
        p.ddv = (2.0 * psi.b / s2) * e * (1.0 - 2.0 * t * t / s2);
        break;
    }
    }
    return p;
}

/// Spectral norm of the ambient Hessian at radius t.  The Hessian of a
/// radial function has eigenvalues v''(t) (radial direction) and v'(t)/t
/// (transverse, multiplicity ambient_dim - 1); both tend to v''(0) at the
/// center.
double hess_norm_at_radius(const AnisotropyDescriptor& psi, double t) {
    RadialProfile p = radial_profile(psi, t);
    if (t < 1e-14) return std::abs(p.ddv);
    return std::max(std::abs(p.ddv), std::abs(p.dv) / t);
}

struct RunningStats {
    double inf_v = std::numeric_limits<double>::infinity();
    double sup_v = -std::numeric_limits<double>::infinity();
    double sup_g = 0.0;
    double sup_h = 0.0;

    void absorb_radius(const AnisotropyDescriptor& psi, double t) {
        RadialProfile p = radial_profile(psi, t);
        inf_v = std::min(inf_v, p.v);
        sup_v = std::max(sup_v, p.v);
        sup_g = std::max(sup_g, std::abs(p.dv));
        sup_h = std::max(sup_h, hess_norm_at_radius(psi, t));
    }
};

bool stats_close(const RunningStats& a, const RunningStats& b, double rel) {
    auto near = [rel](double x, double y) {
        return std::abs(x - y) <= rel * (1.0 + std::max(std::abs(x), std::abs(y)));
    };
    return near(a.inf_v, b.inf_v) && near(a.sup_v, b.sup_v) && near(a.sup_g, b.sup_g) &&
           near(a.sup_h, b.sup_h);
}

/// Extremal radii with closed-form significance for the supported families,
/// clamped into [t_lo, t_hi].
std::vector<double> critical_radii(const AnisotropyDescriptor& psi, double t_lo, double t_hi) {
    std::vector<double> ts = {t_lo, t_hi};
    auto add = [&](double t) {
        if (t >= t_lo && t <= t_hi) ts.push_back(t);
    };
    add(0.0);
    if (psi.kind == PsiKind::gaussian_well) {
        add(psi.s / std::sqrt(2.0));       // gradient magnitude peak
        add(psi.s * std::sqrt(1.5));       // radial curvature trough
    }
    return ts;
}

} // namespace

AnisotropyDescriptor AnisotropyDescriptor::constant(double a, int ambient_dim) {
    AnisotropyDescriptor d;
    d.kind = PsiKind::constant;
    d.a = a;
    d.center = Eigen::VectorXd::Zero(ambient_dim);
    return d;
}

AnisotropyDescriptor AnisotropyDescriptor::quadratic(double a, double b, Eigen::VectorXd center) {
    AnisotropyDescriptor d;
    d.kind = PsiKind::quadratic;
    d.a = a;
    d.b = b;
    d.center = std::move(center);
    return d;
}

AnisotropyDescriptor AnisotropyDescriptor::gaussian_well(double a, double b, double s,
                                                         Eigen::VectorXd center) {
    AnisotropyDescriptor d;
    d.kind = PsiKind::gaussian_well;
    d.a = a;
    d.b = b;
    d.s = s;
    d.center = std::move(center);
    return d;
}

void validate(const AnisotropyDescriptor& psi) {
    if (psi.center.size() < 1) throw ConfigError("anisotropy center must live in a positive-dimensional space");
    if (!std::isfinite(psi.a) || !std::isfinite(psi.b) || !std::isfinite(psi.s) ||
        !psi.center.allFinite())
        throw ConfigError("anisotropy parameters must be finite");
    if (psi.a <= 0.0) throw ConfigError("anisotropy amplitude a must be positive");
    switch (psi.kind) {
    case PsiKind::constant:
        break;
    case PsiKind::quadratic:
        if (psi.b < 0.0) throw ConfigError("quadratic anisotropy requires b >= 0");
        break;
    case PsiKind::gaussian_well:
        if (psi.b < 0.0) throw ConfigError("gaussian well anisotropy requires b >= 0");
        if (psi.b >= psi.a)
            throw ConfigError("gaussian well anisotropy requires b < a to keep the weight positive");
        if (psi.s <= 0.0) throw ConfigError("gaussian well anisotropy requires s > 0");
        break;
    }
}

PsiJet eval_psi(const AnisotropyDescriptor& psi, const Eigen::VectorXd& x) {
    const int d = static_cast<int>(x.size());
    PsiJet jet;
    jet.grad = Eigen::VectorXd::Zero(d);
    jet.hess = Eigen::MatrixXd::Zero(d, d);
    switch (psi.kind) {
    case PsiKind::constant:
        jet.value = psi.a;
        break;
    case PsiKind::quadratic: {
        Eigen::VectorXd dx = x - psi.center;
        jet.value = psi.a + psi.b * dx.squaredNorm();
        jet.grad = 2.0 * psi.b * dx;
        jet.hess = 2.0 * psi.b * Eigen::MatrixXd::Identity(d, d);
        break;
    }
    case PsiKind::gaussian_well: {
        Eigen::VectorXd dx = x - psi.center;
        const double s2 = psi.s * psi.s;
        const double e = std::exp(-dx.squaredNorm() / s2);
        jet.value = psi.a - psi.b * e;
        jet.grad = (2.0 * psi.b / s2) * e * dx;
        jet.hess = (2.0 * psi.b / s2) * e *
                   (Eigen::MatrixXd::Identity(d, d) - (2.0 / s2) * dx * dx.transpose());
        break;
    }
    }
    return jet;
}

Eigen::VectorXd eval_psi_values(const AnisotropyDescriptor& psi, const Eigen::MatrixXd& X) {
    const Eigen::Index N = X.rows();
    Eigen::VectorXd out(N);
    switch (psi.kind) {
    case PsiKind::constant:
        out.setConstant(psi.a);
        break;
    case PsiKind::quadratic:
        out = psi.a +
              psi.b * (X.rowwise() - psi.center.transpose()).rowwise().squaredNorm().array();
        break;
    case PsiKind::gaussian_well:
        out = psi.a -
              psi.b * (-(X.rowwise() - psi.center.transpose()).rowwise().squaredNorm().array() /
                       (psi.s * psi.s))
                          .exp();
        break;
    }
    return out;
}

PsiRegionStats psi_region_stats(const AnisotropyDescriptor& psi, const Eigen::VectorXd& region_center,
                                double region_radius) {
    validate(psi);
    if (region_radius <= 0.0 || !std::isfinite(region_radius))
        throw ConfigError("region radius must be positive and finite");
    if (region_center.size() != psi.center.size())
        throw ConfigError("region center dimension does not match the anisotropy center");

    const double t_c = (region_center - psi.center).norm();
    const double t_lo = std::max(0.0, t_c - region_radius);
    const double t_hi = t_c + region_radius;

    // Radial reduction: dense sampling of [t_lo, t_hi], refined until the
    // four statistics stabilise, plus the closed-form critical radii.
    RunningStats radial;
    RunningStats prev;
    int m = 1025;
    for (int pass = 0; pass < 8; ++pass) {
        RunningStats cur;
        for (int j = 0; j < m; ++j) {
            double t = t_lo + (t_hi - t_lo) * static_cast<double>(j) / (m - 1);
            cur.absorb_radius(psi, t);
        }
        radial = cur;
        if (pass > 0 && stats_close(cur, prev, 1e-6)) break;
        prev = cur;
        m = 2 * m - 1;
    }
    for (double t : critical_radii(psi, t_lo, t_hi)) radial.absorb_radius(psi, t);

    // Cartesian cross-check: sweep a cube about the region center masked to
    // the ball.  Hessian norms use the rank-one structure
    // D^2 psi = alpha I + beta dx dx^T, an independent derivation from the
    // radial eigenvalue formula above.
    const int d = static_cast<int>(region_center.size());
    const double target = 64.0 * 64.0 * 64.0;
    const int per_axis = std::max(3, static_cast<int>(std::ceil(std::pow(target, 1.0 / d))));
    RunningStats sweep;
    std::vector<int> idx(d, 0);
    Eigen::VectorXd x(d);
    const double r2 = region_radius * region_radius;
    while (true) {
        double dist2 = 0.0;
        for (int i = 0; i < d; ++i) {
            x(i) = region_center(i) -
                   region_radius + 2.0 * region_radius * static_cast<double>(idx[i]) / (per_axis - 1);
            double gap = x(i) - region_center(i);
            dist2 += gap * gap;
        }
        if (dist2 <= r2 * (1.0 + 1e-12)) {
            Eigen::VectorXd dx = x - psi.center;
            double t2 = dx.squaredNorm();
            double alpha = 0.0, beta = 0.0, value = psi.a, gnorm = 0.0;
            switch (psi.kind) {
            case PsiKind::constant:
                break;
            case PsiKind::quadratic:
                value = psi.a + psi.b * t2;
                gnorm = 2.0 * psi.b * std::sqrt(t2);
                alpha = 2.0 * psi.b;
                break;
            case PsiKind::gaussian_well: {
                const double s2 = psi.s * psi.s;
                const double e = std::exp(-t2 / s2);
                value = psi.a - psi.b * e;
                gnorm = (2.0 * psi.b / s2) * std::sqrt(t2) * e;
                alpha = (2.0 * psi.b / s2) * e;
                beta = -(4.0 * psi.b / (s2 * s2)) * e;
                break;
            }
            }
            sweep.inf_v = std::min(sweep.inf_v, value);
            sweep.sup_v = std::max(sweep.sup_v, value);
            sweep.sup_g = std::max(sweep.sup_g, gnorm);
            sweep.sup_h = std::max(sweep.sup_h, std::max(std::abs(alpha), std::abs(alpha + beta * t2)));
        }
        int i = 0;
        while (i < d && ++idx[i] == per_axis) idx[i++] = 0;
        if (i == d) break;
    }

    PsiRegionStats out;
    out.inf_psi = std::min(radial.inf_v, sweep.inf_v);
    out.sup_psi = std::max(radial.sup_v, sweep.sup_v);
    out.sup_grad_norm = std::max(radial.sup_g, sweep.sup_g);
    out.sup_hess_norm = std::max(radial.sup_h, sweep.sup_h);
    return out;
}

AdmissibleReport admissible_c(const AnisotropyDescriptor& psi, int n, double eps,
                              const Eigen::VectorXd& region_center, double region_radius) {
    if (n < 2) throw ConfigError("admissible offset requires surface dimension n >= 2");
    if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("pinching threshold eps must lie in (0, 1)");

    AdmissibleReport rep;
    rep.stats = psi_region_stats(psi, region_center, region_radius);
    const double G = rep.stats.sup_grad_norm;
    const double Hs = rep.stats.sup_hess_norm;
    const double m = rep.stats.inf_psi;
    if (m <= 0.0) throw ConfigError("anisotropy must stay positive on the region");

    rep.gradient_term = 5.0 * n * n * G / (eps * eps * m);
    rep.hessian_term = 3.0 * n * std::sqrt(Hs) / (eps * std::sqrt(m)) + 2.0 * n * n * n * G / m;
    rep.c = std::max(rep.gradient_term, rep.hessian_term);
    return rep;
}

} // namespace ascflow
