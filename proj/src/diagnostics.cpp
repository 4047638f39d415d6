#include <ascflow/diagnostics.hpp>

#include <ascflow/errors.hpp>
#include <ascflow/rng.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace ascflow {

namespace {

void validate_pinch(const PinchParams& params) {
    if (!(params.eps > 0.0 && params.eps < 1.0))
        throw ConfigError("pinch eps must lie in (0, 1)");
    if (!(params.c >= 0.0)) throw ConfigError("pinch offset c must be >= 0");
}

/// Area-element Jacobian at node k: product of the principal radii.
double area_jacobian(const CurvatureBundle& bundle, int k) {
    double prod = 1.0;
    for (int i = 0; i < bundle.n(); ++i) prod *= bundle.rho(k, i);
    return prod;
}

} // namespace

PinchReport pinch_report(const CurvatureBundle& bundle, const PinchParams& params, double sigma,
                         double p) {
    validate_pinch(params);
    if (!(sigma >= 0.0 && sigma <= 0.5))
        throw ConfigError("sigma must lie in [0, 1/2]");
    if (!(p >= 2.0)) throw ConfigError("norm exponent p must be >= 2");

    const int N = bundle.grid->num_nodes();
    const int n = bundle.n();
    PinchReport rep;
    rep.min_eig_W = std::numeric_limits<double>::max();
    rep.lambda_ratio_max = 1.0;
    rep.f0_max = 0.0;
    rep.f_sigma.resize(N);

    double mass = 0.0;
    for (int k = 0; k < N; ++k) {
        double lmin = bundle.lambda(k, 0);
        double lmax = bundle.lambda(k, n - 1);
        double H = bundle.H[k];
        rep.min_eig_W = std::min(rep.min_eig_W, lmin - params.eps * (H + params.c));
        rep.lambda_ratio_max = std::max(rep.lambda_ratio_max, lmax / lmin);
        double trace_free = std::max(0.0, bundle.A2[k] - H * H / n);
        rep.f0_max = std::max(rep.f0_max, trace_free / (H * H));
        double f = trace_free / std::pow(H, 2.0 - sigma);
        rep.f_sigma[k] = f;
        mass += bundle.grid->weights[k] * area_jacobian(bundle, k) * std::pow(f, p);
    }
    rep.f_sigma_norm = std::pow(mass, 1.0 / p);
    return rep;
}

SpeedBound speed_bound(const CurvatureBundle& bundle, const AnisotropyDescriptor& psi) {
    Eigen::VectorXd psi_vals = eval_psi_values(psi, bundle.positions);
    SpeedBound sb;
    sb.F_max = 0.0;
    sb.F_min = std::numeric_limits<double>::max();
    for (int k = 0; k < bundle.grid->num_nodes(); ++k) {
        double F = psi_vals[k] * std::sqrt(bundle.R[k]);
        sb.F_max = std::max(sb.F_max, F);
        sb.F_min = std::min(sb.F_min, F);
    }
    sb.F_times_r_in = sb.F_max * geometry_extents(bundle).r_in;
    return sb;
}

DiagnosticsRecord make_record(const CurvatureBundle& bundle, const AnisotropyDescriptor& psi,
                              const PinchParams& pinch, const std::vector<SigmaNormSpec>& norms,
                              double t, double volume) {
    DiagnosticsRecord rec;
    rec.t = t;
    rec.volume = volume;

    ExtentReport extents = geometry_extents(bundle);
    rec.r_in = extents.r_in;
    rec.r_out = extents.r_out;
    rec.w_max = extents.w_max;
    rec.w_min = extents.w_min;
    rec.H_max = bundle.H.maxCoeff();
    rec.H_min = bundle.H.minCoeff();

    PinchReport pr = pinch_report(bundle, pinch, 0.0, 2.0);
    rec.lambda_ratio_max = pr.lambda_ratio_max;
    rec.min_eig_W = pr.min_eig_W;
    rec.f0_max = pr.f0_max;
    for (const SigmaNormSpec& spec : norms) {
        PinchReport pn = pinch_report(bundle, pinch, spec.sigma, spec.p);
        rec.f_sigma_norms.push_back({spec.sigma, spec.p, pn.f_sigma_norm});
    }

    SpeedBound sb;
    Eigen::VectorXd psi_vals = eval_psi_values(psi, bundle.positions);
    sb.F_max = 0.0;
    sb.F_min = std::numeric_limits<double>::max();
    for (int k = 0; k < bundle.grid->num_nodes(); ++k) {
        double F = psi_vals[k] * std::sqrt(bundle.R[k]);
        sb.F_max = std::max(sb.F_max, F);
        sb.F_min = std::min(sb.F_min, F);
    }
    rec.F_max = sb.F_max;
    rec.F_min = sb.F_min;
    rec.F_times_r_in = sb.F_max * extents.r_in;
    return rec;
}

// ---------------------------------------------------------------------------
// Null-condition audit
// ---------------------------------------------------------------------------

SymmetricTensor3 SymmetricTensor3::zero(int n) {
    SymmetricTensor3 t;
    t.n = n;
    t.coeffs = Eigen::VectorXd::Zero(n * (n + 1) * (n + 2) / 6);
    return t;
}

int SymmetricTensor3::index(int i, int j, int k, int n) {
    int a = i, b = j, c = k;
    if (a > b) std::swap(a, b);
    if (b > c) std::swap(b, c);
    if (a > b) std::swap(a, b);
    (void)n;
    // Position of the sorted triple a <= b <= c in the lexicographic
    // enumeration of all sorted triples: tetrahedral offsets.
    auto tet = [](int m) { return m * (m + 1) * (m + 2) / 6; };
    auto tri = [](int m) { return m * (m + 1) / 2; };
    return tet(c) + tri(b) + a;
}

namespace {

struct AuditWork {
    int n;
    double eps, c, psi;
    Eigen::VectorXd h;    ///< perturbed ascending eigenvalues
    Eigen::VectorXd fdot; ///< (H - h_i)/sqrt(R)
    double H, R, sqrtR;
    const SymmetricTensor3* hg;
    Eigen::VectorXd psi_grad;
    double psi_11, psi_lap;

    double fddot(int i, int j) const {
        double v = -(H - h[i]) * (H - h[j]) / (R * sqrtR);
        if (i != j) v += 1.0 / sqrtR;
        return v;
    }
    double q(int i, int j) const { return (fdot[i] - fdot[j]) / (h[i] - h[j]); }
    double g(int i, int j, int k) const { return (*hg)(i, j, k); }
};

void validate_sample(const NullAuditSample& s) {
    if (s.n < 2) throw ConfigError("audit sample needs n >= 2");
    if (s.h_diag.size() != s.n || s.h_grad.n != s.n)
        throw ConfigError("audit sample arrays must have size n");
    if (s.psi_grad.size() != s.n)
        throw ConfigError("audit sample psi_grad must have size n");
    validate_pinch(s.pinch);
    if (!(s.psi > 0.0)) throw ConfigError("audit sample psi must be positive");

    const double scale_h = s.h_diag[s.n - 1];
    if (!(s.h_diag[0] > 0.0) || !(scale_h > 0.0))
        throw AnalysisError("audit sample eigenvalues must be positive");
    for (int i = 1; i < s.n; ++i)
        if (s.h_diag[i] < s.h_diag[i - 1] - 1e-12 * scale_h)
            throw AnalysisError("audit sample eigenvalues must be ascending");

    double H = s.h_diag.sum();
    if (std::abs(s.h_diag[0] - s.pinch.eps * (H + s.pinch.c)) > 1e-10 * (1.0 + H))
        throw AnalysisError("audit sample violates h_11 = eps (H + c)");
    for (int k = 0; k < s.n; ++k) {
        double rhs = 0.0;
        for (int j = 1; j < s.n; ++j) rhs += s.h_grad(k, j, j);
        rhs *= s.pinch.eps / (1.0 - s.pinch.eps);
        if (std::abs(s.h_grad(k, 0, 0) - rhs) > 1e-10 * (1.0 + std::abs(rhs)))
            throw AnalysisError("audit sample violates the gradient constraint");
    }
}

} // namespace

NullAuditResult audit_null_condition(const NullAuditSample& sample) {
    validate_sample(sample);
    const int n = sample.n;
    const double eps = sample.pinch.eps;
    const double c = sample.pinch.c;

    AuditWork w;
    w.n = n;
    w.eps = eps;
    w.c = c;
    w.psi = sample.psi;
    w.h = sample.h_diag;
    w.hg = &sample.h_grad;
    w.psi_grad = sample.psi_grad;
    w.psi_11 = sample.psi_11;
    w.psi_lap = sample.psi_laplacian;

    // Coincident eigenvalues break the difference quotients; nudge them
    // apart by 1e-9 relative to the largest eigenvalue.
    const double scale_h = w.h[n - 1];
    for (int i = 1; i < n; ++i)
        if (w.h[i] - w.h[i - 1] < 1e-12 * scale_h) w.h[i] = w.h[i - 1] + 1e-9 * scale_h;
    for (int i = 1; i < n; ++i)
        if (w.h[i] - w.h[i - 1] < 1e-12 * scale_h)
            throw AnalysisError("audit sample eigenvalues remain coincident after perturbation");

    w.H = w.h.sum();
    double A2 = w.h.squaredNorm();
    w.R = w.H * w.H - A2;
    if (!(w.R > 0.0)) throw AnalysisError("audit sample has non-positive scalar curvature");
    w.sqrtR = std::sqrt(w.R);
    w.fdot.resize(n);
    for (int i = 0; i < n; ++i) w.fdot[i] = (w.H - w.h[i]) / w.sqrtR;

    NullAuditResult res;

    // Q_0 (no bare-speed term: only the weight-derivative and offset parts).
    {
        double q0 = w.sqrtR * (w.psi_11 - eps * w.psi_lap);
        double offset = 0.0;
        for (int k = 0; k < n - 1; ++k) offset += w.fdot[k] * w.h[k] * w.h[k];
        offset += 0.5 * w.fdot[n - 1] * w.h[n - 1] * w.h[n - 1];
        q0 += c * eps * w.psi * offset;
        res.q0 = q0;
    }

    const double tail = c * eps * w.psi * w.fdot[n - 1] * w.h[n - 1] * w.h[n - 1] / (2.0 * n);

    res.q_k.resize(n);
    // Q_1: repeated-index quadratics anchored at the null direction e_1.
    {
        double v = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) v += w.fddot(i, j) * w.g(0, i, i) * w.g(0, j, j);
        v *= (1.0 - eps) * w.psi;
        for (int j = 1; j < n; ++j) {
            double hj = w.g(0, j, j);
            v += 2.0 * w.psi * (w.fdot[j] / (w.h[j] - w.h[0])) * hj * hj;
            v -= 2.0 * eps * w.psi * w.q(j, 0) * hj * hj;
        }
        double lin = 0.0;
        for (int j = 0; j < n; ++j) lin += w.fdot[j] * w.g(0, j, j);
        v += 2.0 * (1.0 - eps) * w.psi_grad[0] * lin;
        res.q_k[0] = v + tail;
    }
    // Q_k, k > 1.
    for (int k = 1; k < n; ++k) {
        double v = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) v += w.fddot(i, j) * w.g(k, i, i) * w.g(k, j, j);
        v *= -eps * w.psi;
        double hk11 = w.g(k, 0, 0);
        v += 2.0 * w.psi * (w.fdot[0] / (w.h[k] - w.h[0])) * hk11 * hk11;
        v += 2.0 * w.psi * w.q(k, 0) * hk11 * hk11;
        for (int j = 0; j < n; ++j) {
            if (j == k) continue;
            double hj = w.g(k, j, j);
            v -= 2.0 * eps * w.psi * w.q(j, k) * hj * hj;
        }
        double lin = 0.0;
        for (int j = 0; j < n; ++j) lin += w.fdot[j] * w.g(k, j, j);
        v -= 2.0 * eps * w.psi_grad[k] * lin;
        res.q_k[k] = v + tail;
    }
    // Q_{1kl}, 1 < k < l (one-based): distinct-index quadratics through e_1.
    // As printed these carry no factor psi.
    for (int k = 1; k < n; ++k) {
        for (int l = k + 1; l < n; ++l) {
            double hkl = w.g(0, k, l);
            double bracket = (1.0 - eps) * w.q(k, l) + w.fdot[k] / (w.h[l] - w.h[0]) +
                             w.fdot[l] / (w.h[k] - w.h[0]) - eps * (w.q(k, 0) + w.q(l, 0));
            res.q_1kl.push_back(2.0 * bracket * hkl * hkl);
        }
    }
    // Q_{jkl}, 1 < j < k < l (one-based).
    for (int j = 1; j < n; ++j)
        for (int k = j + 1; k < n; ++k)
            for (int l = k + 1; l < n; ++l) {
                double hjkl = w.g(j, k, l);
                double bracket = w.q(j, k) + w.q(k, l) + w.q(l, j);
                res.q_jkl.push_back(-2.0 * eps * bracket * hjkl * hjkl);
            }

    // Pre-decomposition expression, expanded form.
    {
        double pre = 0.0;
        for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l)
                pre += w.psi * w.fddot(k, l) * w.g(0, k, k) * w.g(0, l, l);
        for (int k = 0; k < n; ++k)
            for (int l = k + 1; l < n; ++l) {
                double hkl = w.g(0, k, l);
                pre += 2.0 * w.psi * w.q(k, l) * hkl * hkl;
            }
        for (int j = 0; j < n; ++j) {
            double part = 0.0;
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l)
                    part += w.fddot(k, l) * w.g(j, k, k) * w.g(j, l, l);
            pre -= eps * w.psi * part;
            for (int k = 0; k < n; ++k)
                for (int l = k + 1; l < n; ++l) {
                    double hjkl = w.g(j, k, l);
                    pre -= 2.0 * eps * w.psi * w.q(k, l) * hjkl * hjkl;
                }
        }
        for (int k = 0; k < n; ++k)
            for (int l = 1; l < n; ++l) {
                double hkl = w.g(0, k, l);
                pre += 2.0 * w.psi * (w.fdot[k] / (w.h[l] - w.h[0])) * hkl * hkl;
            }
        pre += w.sqrtR * (w.psi_11 - eps * w.psi_lap);
        for (int j = 0; j < n; ++j) {
            double inner = w.g(0, j, j) * w.psi_grad[0];
            for (int i = 0; i < n; ++i) inner -= eps * w.g(i, j, j) * w.psi_grad[i];
            pre += 2.0 * w.fdot[j] * inner;
        }
        double offset = 0.0;
        for (int k = 0; k < n; ++k) offset += w.fdot[k] * w.h[k] * w.h[k];
        pre += c * eps * w.psi * offset;
        res.q_pre = pre;
    }

    res.q_parts_total = res.q0 + res.q_k.sum();
    res.min_part = res.q0;
    res.scale = std::abs(res.q0);
    for (int k = 0; k < n; ++k) {
        res.min_part = std::min(res.min_part, res.q_k[k]);
        res.scale += std::abs(res.q_k[k]);
    }
    for (double q : res.q_1kl) {
        res.q_parts_total += q;
        res.min_part = std::min(res.min_part, q);
        res.scale += std::abs(q);
    }
    for (double q : res.q_jkl) {
        res.q_parts_total += q;
        res.min_part = std::min(res.min_part, q);
        res.scale += std::abs(q);
    }
    return res;
}

NullAuditSample draw_audit_sample(const AuditBatchConfig& config, int index) {
    if (config.n < 2) throw ConfigError("audit batch needs n >= 2");
    if (!(config.eps > 0.0 && config.eps < 1.0))
        throw ConfigError("audit batch eps must lie in (0, 1)");
    if (!(config.c >= 0.0)) throw ConfigError("audit batch c must be >= 0");
    if (!(config.psi > 0.0)) throw ConfigError("audit batch psi must be positive");

    const int n = config.n;
    const double eps = config.eps;
    SplitMix64 rng = SplitMix64::for_item(config.seed, static_cast<std::uint64_t>(index));

    NullAuditSample s;
    s.n = n;
    s.pinch = PinchParams{eps, config.c};
    s.seed = config.seed;
    s.index = index;
    s.psi = config.psi;
    s.grad_bound = config.grad_bound;
    s.hess_bound = config.hess_bound;

    // Eigenvalue ratios rho_j = h_jj / h_11.  With c > 0 the ratios are free
    // in (1, margin (1/eps - 1)/(n-1)) and h_11 follows from the pinching
    // identity; with c = 0 the identity forces sum rho = 1/eps exactly and
    // h_11 is a free scale.
    Eigen::VectorXd rho(n);
    rho[0] = 1.0;
    if (config.c > 0.0) {
        double hi = 1.0 + 0.9 * ((1.0 / eps - 1.0) / (n - 1) - 1.0);
        std::vector<double> draws(n - 1);
        for (double& d : draws) d = rng.uniform(1.0, hi);
        std::sort(draws.begin(), draws.end());
        for (int j = 1; j < n; ++j) rho[j] = draws[j - 1];
        double sum = rho.sum();
        s.h_diag = rho * (eps * config.c / (1.0 - eps * sum));
    } else {
        std::vector<double> x(n - 1);
        for (double& d : x) d = rng.uniform(0.05, 1.0);
        std::sort(x.begin(), x.end());
        double xsum = 0.0;
        for (double d : x) xsum += d;
        for (int j = 1; j < n; ++j) rho[j] = 1.0 + (x[j - 1] / xsum) * (1.0 / eps - n);
        s.h_diag = rho * rng.log_uniform(0.5, 2.0);
    }

    // Free gradient-tensor components: sorted triples with at most one index
    // equal to the null direction; the rest follow from the constraint.
    s.h_grad = SymmetricTensor3::zero(n);
    const double amp = config.grad_tensor_amplitude * s.h_diag[n - 1];
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j)
            for (int k = j; k < n; ++k) {
                int zeros = (i == 0) + (j == 0) + (k == 0);
                if (zeros <= 1) s.h_grad.at(i, j, k) = rng.uniform(-amp, amp);
            }
    for (int k = 0; k < n; ++k) {
        double rhs = 0.0;
        for (int j = 1; j < n; ++j) rhs += s.h_grad(k, j, j);
        s.h_grad.at(k, 0, 0) = eps / (1.0 - eps) * rhs;
    }

    // Weight-derivative surrogates: an ambient unit direction w splits
    // |D psi| between the tangential components and the normal part that
    // curvature folds into surface second derivatives.
    Eigen::VectorXd wdir(n + 1);
    for (int i = 0; i <= n; ++i) wdir[i] = rng.normal();
    double wnorm = wdir.norm();
    if (wnorm < 1e-12) {
        wdir.setZero();
        wdir[0] = 1.0;
    } else {
        wdir /= wnorm;
    }
    s.psi_grad.resize(n);
    for (int k = 0; k < n; ++k) s.psi_grad[k] = config.grad_bound * wdir[k];
    double normal_slope = config.grad_bound * wdir[n];
    double H = s.h_diag.sum();
    double d11 = rng.uniform(-config.hess_bound, config.hess_bound);
    double tr_tang = rng.uniform(-double(n) * config.hess_bound, double(n) * config.hess_bound);
    s.psi_11 = d11 - s.h_diag[0] * normal_slope;
    s.psi_laplacian = tr_tang - H * normal_slope;
    return s;
}

AuditBatchResult audit_batch(const AuditBatchConfig& config) {
    if (config.count < 1) throw ConfigError("audit batch count must be >= 1");
    AuditBatchResult res;
    res.config = config;
    res.rows.reserve(config.count);
    res.min_q = std::numeric_limits<double>::max();
    res.min_part = std::numeric_limits<double>::max();
    res.max_gap = 0.0;
    res.negative_count = 0;
    for (int i = 0; i < config.count; ++i) {
        NullAuditSample s = draw_audit_sample(config, i);
        NullAuditResult a = audit_null_condition(s);
        double distinct = 0.0;
        for (double q : a.q_1kl) distinct += q;
        for (double q : a.q_jkl) distinct += q;
        AuditBatchRow row;
        row.index = i;
        row.q_parts_total = a.q_parts_total;
        row.q_pre = a.q_pre;
        row.min_part = a.min_part;
        row.q0 = a.q0;
        row.bookkeeping_gap = a.q_pre - a.q_parts_total - (s.psi - 1.0) * distinct;
        row.scale = a.scale;
        res.rows.push_back(row);
        res.min_q = std::min(res.min_q, row.q_parts_total);
        res.min_part = std::min(res.min_part, row.min_part);
        res.max_gap = std::max(res.max_gap, std::abs(row.bookkeeping_gap));
        if (row.q_parts_total < -1e-10 * (1.0 + row.scale)) ++res.negative_count;
    }
    return res;
}

// ---------------------------------------------------------------------------
// Evolution-equation verification
// ---------------------------------------------------------------------------

namespace {

/// Per-node speed field F = psi(X) sqrt(R).
Eigen::VectorXd speed_field(const CurvatureBundle& bundle, const AnisotropyDescriptor& psi) {
    Eigen::VectorXd F = eval_psi_values(psi, bundle.positions);
    for (int k = 0; k < F.size(); ++k) F[k] *= std::sqrt(bundle.R[k]);
    return F;
}

/// Diagonal entries of the covariant Hessian of a field, rotated into the
/// radii eigenframe at node k.  Entry j pairs with rho(k, j).
Eigen::VectorXd hessian_in_eigenframe(const CurvatureBundle& bundle, const FieldJet& jet, int k) {
    const int n = bundle.n();
    Eigen::MatrixXd Hf(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            double v = jet.hess(k, FieldJet::packed_index(i, j, n));
            Hf(i, j) = v;
            Hf(j, i) = v;
        }
    Eigen::VectorXd ef = bundle.eigenframe.row(k).transpose();
    Eigen::Map<const Eigen::MatrixXd> E(ef.data(), n, n); // column-major flattening
    Eigen::VectorXd d(n);
    for (int j = 0; j < n; ++j) d[j] = E.col(j).dot(Hf * E.col(j));
    return d;
}

double max_abs(const Eigen::VectorXd& v) { return v.cwiseAbs().maxCoeff(); }

} // namespace

EvolutionResiduals verify_evolution(const ScalarField& S, const AnisotropyDescriptor& psi,
                                    double dt, const SupportStepper& stepper,
                                    bool sphere_checks) {
    CurvatureBundle bundle = curvature_from_support(S);
    if (!(dt > 0.0)) throw ConfigError("verification dt must be positive");
    double dt_max = 1e-4 * bundle.min_rho * bundle.min_rho;
    if (dt > dt_max)
        throw ConfigError("verification dt exceeds 1e-4 * (min rho)^2");

    const int N = S.grid->num_nodes();
    const int n = S.grid->n;

    Eigen::VectorXd S_plus = stepper(S.values, 0.0, dt);
    Eigen::VectorXd S_minus = stepper(S.values, 0.0, -dt);
    CurvatureBundle b_plus = curvature_from_support(ScalarField(S.grid, S_plus));
    CurvatureBundle b_minus = curvature_from_support(ScalarField(S.grid, S_minus));

    Eigen::VectorXd F0 = speed_field(bundle, psi);
    FieldJet F_jet = covariant_derivatives(ScalarField(S.grid, F0));

    EvolutionResiduals res;
    res.dt = dt;

    // (a) dS/dt = -F.
    {
        Eigen::VectorXd measured = (S_plus - S_minus) / (2.0 * dt);
        res.support_speed = max_abs(measured + F0) / max_abs(F0);
    }

    // (b) dH/dt = sum_j lambda_j^2 [(Hess F)_jj + F] in the radii eigenframe.
    // (c) dF/dt with the corrected second-order coefficient (H - lambda_j)
    //     and the tangential transport term, against the reference form (c').
    Eigen::VectorXd dH_measured = (b_plus.H - b_minus.H) / (2.0 * dt);
    Eigen::VectorXd F_plus = speed_field(b_plus, psi);
    Eigen::VectorXd F_minus = speed_field(b_minus, psi);
    Eigen::VectorXd dF_measured = (F_plus - F_minus) / (2.0 * dt);

    Eigen::VectorXd dH_rhs(N), dF_rhs(N), dF_rhs_ref(N);
    for (int k = 0; k < N; ++k) {
        Eigen::VectorXd d = hessian_in_eigenframe(bundle, F_jet, k);
        PsiJet pj = eval_psi(psi, bundle.positions.row(k).transpose());
        double R = bundle.R[k], sqrtR = std::sqrt(R), H = bundle.H[k];
        double trA3 = 0.0;
        for (int j = 0; j < n; ++j) {
            double lam = 1.0 / bundle.rho(k, j);
            trA3 += lam * lam * lam;
        }
        double source = pj.value * pj.value * (H * bundle.A2[k] - trA3);

        double hsum = 0.0, hsum_corr = 0.0, hsum_ref = 0.0;
        for (int j = 0; j < n; ++j) {
            double lam = 1.0 / bundle.rho(k, j);
            hsum += lam * lam * (d[j] + F0[k]);
            hsum_corr += lam * lam * (H - lam) * d[j];
            hsum_ref += lam * lam * d[j];
        }
        dH_rhs[k] = hsum;

        // Ambient gradient against the outward normal z and the embedded
        // tangential gradient of F.
        Eigen::VectorXd z = bundle.grid->nodes.row(k).transpose();
        double dpsi_z = pj.grad.dot(z);
        Eigen::MatrixXd frame = bundle.grid->tangent_frame(k);
        double dpsi_gradF = 0.0;
        for (int a = 0; a < frame.cols(); ++a)
            dpsi_gradF += pj.grad.dot(frame.col(a)) * F_jet.grad(k, a);

        dF_rhs[k] = pj.value / sqrtR * hsum_corr + source - pj.value * R * dpsi_z -
                    sqrtR * dpsi_gradF;
        dF_rhs_ref[k] = pj.value * H / sqrtR * hsum_ref + source - pj.value * R * dpsi_z;
    }
    res.mean_curvature = max_abs(dH_measured - dH_rhs) / max_abs(dH_rhs);
    res.speed_function = max_abs(dF_measured - dF_rhs) / max_abs(dF_rhs);
    res.speed_function_reference = max_abs(dF_measured - dF_rhs_ref) / max_abs(dF_rhs);

    // (d) round-sphere metric check: d(r^2)/dt = -2 F r with r = S.
    if (sphere_checks) {
        Eigen::VectorXd measured =
            (S_plus.cwiseProduct(S_plus) - S_minus.cwiseProduct(S_minus)) / (2.0 * dt);
        Eigen::VectorXd rhs = -2.0 * F0.cwiseProduct(S.values);
        res.metric_sphere = max_abs(measured - rhs) / max_abs(rhs);
        res.sphere_checked = true;
    }
    return res;
}

} // namespace ascflow
