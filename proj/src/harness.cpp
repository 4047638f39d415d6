#include <ascflow/harness.hpp>

#include <ascflow/errors.hpp>

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace ascflow {

namespace {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr double kPi = 3.14159265358979323846;

/// Shortest exact decimal form; used for every CSV number so artifact bytes
/// are a pure function of the values.
std::string fd(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

// ---------------------------------------------------------------------------
// enum <-> string tables

std::string gauge_name(Gauge g) {
    return g == Gauge::gauss_support ? "gauss_support" : "radial_axisym";
}

Gauge gauge_from(const std::string& s) {
    if (s == "gauss_support") return Gauge::gauss_support;
    if (s == "radial_axisym") return Gauge::radial_axisym;
    throw ConfigError("unknown gauge: " + s);
}

std::string body_name(BodyKind k) {
    switch (k) {
    case BodyKind::sphere: return "sphere";
    case BodyKind::ellipsoid: return "ellipsoid";
    case BodyKind::perturbed_sphere: return "perturbed_sphere";
    }
    throw ConfigError("unknown body kind");
}

BodyKind body_from(const std::string& s) {
    if (s == "sphere") return BodyKind::sphere;
    if (s == "ellipsoid") return BodyKind::ellipsoid;
    if (s == "perturbed_sphere") return BodyKind::perturbed_sphere;
    throw ConfigError("unknown body kind: " + s);
}

std::string psi_name(PsiKind k) {
    switch (k) {
    case PsiKind::constant: return "constant";
    case PsiKind::quadratic: return "quadratic";
    case PsiKind::gaussian_well: return "gaussian_well";
    }
    throw ConfigError("unknown weight kind");
}

PsiKind psi_from(const std::string& s) {
    if (s == "constant") return PsiKind::constant;
    if (s == "quadratic") return PsiKind::quadratic;
    if (s == "gaussian_well") return PsiKind::gaussian_well;
    throw ConfigError("unknown weight kind: " + s);
}

std::string termination_name(TerminationReason r) {
    switch (r) {
    case TerminationReason::extinction_threshold: return "extinction_threshold";
    case TerminationReason::step_limit: return "step_limit";
    case TerminationReason::convexity_loss: return "convexity_loss";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// JSON plumbing

void require_keys(const ojson& j, const std::set<std::string>& allowed,
                  const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("unknown key in " + where + ": " + it.key());
}

ojson vec_to_json(const Eigen::VectorXd& v) {
    ojson a = ojson::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Eigen::VectorXd vec_from_json(const ojson& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + " must be an array of numbers");
    Eigen::VectorXd v(j.size());
    int i = 0;
    for (const auto& e : j) {
        if (!e.is_number()) throw ConfigError(where + " must be an array of numbers");
        v[i++] = e.get<double>();
    }
    return v;
}

template <typename T>
T get_or(const ojson& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad value for " + key + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// config <-> JSON

ojson body_to_json(const BodySpec& b) {
    ojson j;
    j["kind"] = body_name(b.kind);
    if (b.kind != BodyKind::ellipsoid) j["radius"] = b.radius;
    if (b.kind == BodyKind::sphere) j["center"] = vec_to_json(b.center);
    if (b.kind == BodyKind::ellipsoid) j["axes"] = vec_to_json(b.axes);
    if (b.kind == BodyKind::perturbed_sphere) {
        ojson terms = ojson::array();
        for (const HarmonicTerm& h : b.harmonics) {
            ojson t;
            t["l"] = h.l;
            t["m"] = h.m;
            t["amplitude"] = h.amplitude;
            terms.push_back(std::move(t));
        }
        j["harmonics"] = std::move(terms);
    }
    return j;
}

BodySpec body_from_json(const ojson& j) {
    require_keys(j, {"kind", "radius", "center", "axes", "harmonics"}, "body");
    BodySpec b;
    if (!j.contains("kind")) throw ConfigError("body needs a kind");
    b.kind = body_from(j.at("kind").get<std::string>());
    b.radius = get_or(j, "radius", 1.0);
    if (j.contains("center")) b.center = vec_from_json(j.at("center"), "body.center");
    if (j.contains("axes")) b.axes = vec_from_json(j.at("axes"), "body.axes");
    if (j.contains("harmonics")) {
        if (!j.at("harmonics").is_array())
            throw ConfigError("body.harmonics must be an array");
        for (const auto& t : j.at("harmonics")) {
            require_keys(t, {"l", "m", "amplitude"}, "body.harmonics entry");
            HarmonicTerm h;
            h.l = get_or(t, "l", 0);
            h.m = get_or(t, "m", 0);
            h.amplitude = get_or(t, "amplitude", 0.0);
            b.harmonics.push_back(h);
        }
    }
    return b;
}

ojson psi_to_json(const AnisotropyDescriptor& p) {
    ojson j;
    j["kind"] = psi_name(p.kind);
    j["a"] = p.a;
    j["b"] = p.b;
    j["s"] = p.s;
    j["center"] = vec_to_json(p.center);
    return j;
}

AnisotropyDescriptor psi_from_json(const ojson& j, int ambient_dim) {
    require_keys(j, {"kind", "a", "b", "s", "center"}, "psi");
    AnisotropyDescriptor p;
    if (j.contains("kind")) p.kind = psi_from(j.at("kind").get<std::string>());
    p.a = get_or(j, "a", 1.0);
    p.b = get_or(j, "b", 0.0);
    p.s = get_or(j, "s", 1.0);
    if (j.contains("center")) p.center = vec_from_json(j.at("center"), "psi.center");
    if (p.center.size() == 0) p.center = Eigen::VectorXd::Zero(ambient_dim);
    return p;
}

} // namespace

ExperimentConfig parse_config(const std::string& json_text) {
    ojson j;
    try {
        j = ojson::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config parse: ") + e.what());
    }
    require_keys(j,
                 {"n", "gauge", "resolution", "body", "psi", "pinch", "auto_c",
                  "sigma_norms", "controls", "verify_dt", "output_dir", "seed"},
                 "config");

    ExperimentConfig cfg;
    cfg.n = get_or(j, "n", 2);
    if (j.contains("gauge")) cfg.gauge = gauge_from(j.at("gauge").get<std::string>());
    cfg.resolution = get_or(j, "resolution", 16);
    if (j.contains("body")) cfg.body = body_from_json(j.at("body"));
    if (j.contains("psi")) cfg.psi = psi_from_json(j.at("psi"), cfg.n + 1);
    else cfg.psi = AnisotropyDescriptor::constant(1.0, cfg.n + 1);

    if (j.contains("pinch")) {
        const ojson& p = j.at("pinch");
        require_keys(p, {"eps", "c"}, "pinch");
        cfg.pinch.eps = get_or(p, "eps", 0.1);
        cfg.pinch.c = get_or(p, "c", 0.0);
    }
    cfg.auto_c = get_or(j, "auto_c", false);

    if (j.contains("sigma_norms")) {
        if (!j.at("sigma_norms").is_array())
            throw ConfigError("sigma_norms must be an array");
        for (const auto& s : j.at("sigma_norms")) {
            require_keys(s, {"sigma", "p"}, "sigma_norms entry");
            SigmaNormSpec spec;
            spec.sigma = get_or(s, "sigma", 0.0);
            spec.p = get_or(s, "p", 2.0);
            cfg.sigma_norms.push_back(spec);
        }
    }

    if (j.contains("controls")) {
        const ojson& c = j.at("controls");
        require_keys(c,
                     {"cfl", "r_stop_fraction", "record_dt", "records_target",
                      "max_halvings", "step_limit", "aliasing_tolerance"},
                     "controls");
        cfg.controls.cfl = get_or(c, "cfl", cfg.controls.cfl);
        cfg.controls.r_stop_fraction =
            get_or(c, "r_stop_fraction", cfg.controls.r_stop_fraction);
        cfg.controls.record_dt = get_or(c, "record_dt", cfg.controls.record_dt);
        cfg.controls.records_target =
            get_or(c, "records_target", cfg.controls.records_target);
        cfg.controls.max_halvings = get_or(c, "max_halvings", cfg.controls.max_halvings);
        cfg.controls.step_limit =
            static_cast<long>(get_or<double>(c, "step_limit",
                                             double(cfg.controls.step_limit)));
        cfg.controls.aliasing_tolerance =
            get_or(c, "aliasing_tolerance", cfg.controls.aliasing_tolerance);
    }

    cfg.verify_dt = get_or(j, "verify_dt", 1e-5);
    cfg.output_dir = get_or<std::string>(j, "output_dir", "out");
    cfg.seed = static_cast<unsigned long long>(get_or<double>(j, "seed", 2026.0));

    if (cfg.body.center.size() == 0 && cfg.body.kind == BodyKind::sphere)
        cfg.body.center = Eigen::VectorXd::Zero(cfg.n + 1);
    if (cfg.psi.center.size() == 0) cfg.psi.center = Eigen::VectorXd::Zero(cfg.n + 1);
    return cfg;
}

std::string serialize_config(const ExperimentConfig& cfg) {
    ojson j;
    j["n"] = cfg.n;
    j["gauge"] = gauge_name(cfg.gauge);
    j["resolution"] = cfg.resolution;
    j["body"] = body_to_json(cfg.body);
    j["psi"] = psi_to_json(cfg.psi);
    j["pinch"] = ojson{{"eps", cfg.pinch.eps}, {"c", cfg.pinch.c}};
    j["auto_c"] = cfg.auto_c;
    ojson norms = ojson::array();
    for (const SigmaNormSpec& s : cfg.sigma_norms)
        norms.push_back(ojson{{"sigma", s.sigma}, {"p", s.p}});
    j["sigma_norms"] = std::move(norms);
    j["controls"] = ojson{{"cfl", cfg.controls.cfl},
                          {"r_stop_fraction", cfg.controls.r_stop_fraction},
                          {"record_dt", cfg.controls.record_dt},
                          {"records_target", cfg.controls.records_target},
                          {"max_halvings", cfg.controls.max_halvings},
                          {"step_limit", double(cfg.controls.step_limit)},
                          {"aliasing_tolerance", cfg.controls.aliasing_tolerance}};
    j["verify_dt"] = cfg.verify_dt;
    j["output_dir"] = cfg.output_dir;
    j["seed"] = double(cfg.seed);
    return j.dump(2) + "\n";
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void validate_config(const ExperimentConfig& cfg) {
    if (cfg.n < 2) throw ConfigError("dimension n must be at least 2");
    if (cfg.gauge == Gauge::gauss_support && cfg.n != 2)
        throw ConfigError("the spherical-harmonic support gauge is implemented for n = 2");
    if (cfg.resolution < 4) throw ConfigError("resolution must be at least 4");

    const int ambient = cfg.n + 1;
    const BodySpec& b = cfg.body;
    switch (b.kind) {
    case BodyKind::sphere:
        if (!(b.radius > 0.0)) throw ConfigError("sphere radius must be positive");
        if (b.center.size() != 0 && b.center.size() != ambient)
            throw ConfigError("sphere center must live in R^{n+1}");
        if (cfg.gauge == Gauge::radial_axisym && b.center.size() != 0 &&
            b.center.cwiseAbs().maxCoeff() > 0.0)
            throw ConfigError("the radial gauge needs an origin-centered sphere");
        break;
    case BodyKind::ellipsoid:
        if (b.axes.size() != ambient)
            throw ConfigError("ellipsoid needs one semi-axis per ambient coordinate");
        if (!(b.axes.minCoeff() > 0.0))
            throw ConfigError("ellipsoid semi-axes must be positive");
        if (cfg.gauge == Gauge::radial_axisym)
            for (int i = 0; i + 1 < ambient - 1; ++i)
                if (b.axes[i] != b.axes[i + 1])
                    throw ConfigError(
                        "the radial gauge needs an axisymmetric ellipsoid "
                        "(equal transverse semi-axes)");
        break;
    case BodyKind::perturbed_sphere:
        if (!(b.radius > 0.0)) throw ConfigError("sphere radius must be positive");
        if (cfg.gauge != Gauge::gauss_support)
            throw ConfigError("perturbed spheres need the spherical-harmonic gauge");
        for (const HarmonicTerm& h : b.harmonics) {
            if (h.l < 0 || std::abs(h.m) > h.l)
                throw ConfigError("harmonic term needs 0 <= |m| <= l");
            if (h.l > cfg.resolution)
                throw ConfigError("harmonic degree exceeds the band limit");
            if (!std::isfinite(h.amplitude))
                throw ConfigError("harmonic amplitude must be finite");
        }
        break;
    }

    AnisotropyDescriptor psi = cfg.psi;
    if (psi.center.size() == 0) psi.center = Eigen::VectorXd::Zero(ambient);
    if (psi.center.size() != ambient)
        throw ConfigError("weight center must live in R^{n+1}");
    validate(psi);

    if (!(cfg.pinch.eps > 0.0) || !(cfg.pinch.eps < 1.0))
        throw ConfigError("pinch eps must lie in (0, 1)");
    if (cfg.pinch.c < 0.0) throw ConfigError("pinch c must be nonnegative");
    for (const SigmaNormSpec& s : cfg.sigma_norms) {
        if (s.sigma < 0.0 || s.sigma > 0.5)
            throw ConfigError("sigma must lie in [0, 1/2]");
        if (s.p < 2.0) throw ConfigError("norm exponent p must be at least 2");
    }

    const EngineControls& c = cfg.controls;
    if (!(c.cfl > 0.0)) throw ConfigError("cfl must be positive");
    if (!(c.r_stop_fraction > 0.0) || !(c.r_stop_fraction < 1.0))
        throw ConfigError("r_stop_fraction must lie in (0, 1)");
    if (c.record_dt < 0.0) throw ConfigError("record_dt must be nonnegative");
    if (c.records_target < 1) throw ConfigError("records_target must be positive");
    if (c.max_halvings < 0) throw ConfigError("max_halvings must be nonnegative");
    if (c.step_limit < 1) throw ConfigError("step_limit must be positive");
    if (!(cfg.verify_dt > 0.0)) throw ConfigError("verify_dt must be positive");
    if (cfg.output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

std::shared_ptr<const SphereGrid> config_grid(const ExperimentConfig& cfg) {
    GridMode mode =
        cfg.gauge == Gauge::gauss_support ? GridMode::full2d : GridMode::axisym;
    return build_grid(cfg.n, mode, cfg.resolution);
}

namespace {

/// Packed coefficient index of the orthonormal real harmonic (l, m); m < 0
/// selects the sine partner.  Layout matches the transform: the m = 0 block
/// first, then per-order blocks with cos/sin interleaved by degree.
int sh_index(int L, int l, int m_signed) {
    int m = std::abs(m_signed);
    if (m == 0) return l;
    int pos = L + 1;
    for (int mp = 1; mp < m; ++mp) pos += 2 * (L + 1 - mp);
    pos += 2 * (l - m);
    if (m_signed < 0) pos += 1;
    return pos;
}

} // namespace

Eigen::VectorXd body_support_samples(const SphereGrid& grid, const BodySpec& body) {
    const int N = grid.num_nodes();
    const int ambient = grid.ambient_dim();
    Eigen::VectorXd S(N);
    switch (body.kind) {
    case BodyKind::sphere: {
        Eigen::VectorXd c = body.center.size() == ambient
                                ? body.center
                                : Eigen::VectorXd::Zero(ambient);
        for (int k = 0; k < N; ++k)
            S[k] = body.radius + c.dot(grid.nodes.row(k).transpose());
        return S;
    }
    case BodyKind::ellipsoid: {
        if (body.axes.size() != ambient)
            throw ConfigError("ellipsoid needs one semi-axis per ambient coordinate");
        for (int k = 0; k < N; ++k) {
            double acc = 0.0;
            for (int i = 0; i < ambient; ++i) {
                double zi = grid.nodes(k, i);
                acc += body.axes[i] * body.axes[i] * zi * zi;
            }
            S[k] = std::sqrt(acc);
        }
        return S;
    }
    case BodyKind::perturbed_sphere: {
        if (grid.mode != GridMode::full2d)
            throw ConfigError("perturbed spheres need the spherical-harmonic grid");
        Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(sh_coefficient_count(grid.band_limit));
        for (const HarmonicTerm& h : body.harmonics) {
            if (h.l > grid.band_limit)
                throw ConfigError("harmonic degree exceeds the band limit");
            coeffs[sh_index(grid.band_limit, h.l, h.m)] += h.amplitude;
        }
        Eigen::VectorXd bump = sh_synthesis(grid, coeffs);
        for (int k = 0; k < N; ++k) S[k] = body.radius * (1.0 + bump[k]);
        return S;
    }
    }
    throw ConfigError("unknown body kind");
}

Eigen::VectorXd body_radial_samples(const SphereGrid& grid, const BodySpec& body) {
    const int N = grid.num_nodes();
    Eigen::VectorXd r(N);
    switch (body.kind) {
    case BodyKind::sphere:
        if (body.center.size() != 0 && body.center.cwiseAbs().maxCoeff() > 0.0)
            throw ConfigError("the radial gauge needs an origin-centered sphere");
        r.setConstant(body.radius);
        return r;
    case BodyKind::ellipsoid: {
        if (body.axes.size() != grid.ambient_dim())
            throw ConfigError("ellipsoid needs one semi-axis per ambient coordinate");
        double a = body.axes[0], c = body.axes[grid.ambient_dim() - 1];
        for (int i = 0; i + 1 < grid.ambient_dim() - 1; ++i)
            if (body.axes[i] != body.axes[i + 1])
                throw ConfigError("the radial gauge needs an axisymmetric ellipsoid");
        for (int k = 0; k < N; ++k) {
            double st = std::sin(grid.theta(k)), ct = std::cos(grid.theta(k));
            r[k] = a * c / std::sqrt(c * c * st * st + a * a * ct * ct);
        }
        return r;
    }
    case BodyKind::perturbed_sphere:
        throw ConfigError("perturbed spheres need the spherical-harmonic gauge");
    }
    throw ConfigError("unknown body kind");
}

SupportState initial_state(const ExperimentConfig& cfg,
                           std::shared_ptr<const SphereGrid> grid) {
    SupportState st;
    st.gauge = cfg.gauge;
    st.grid = grid;
    st.t = 0.0;
    st.values = cfg.gauge == Gauge::gauss_support
                    ? body_support_samples(*grid, cfg.body)
                    : body_radial_samples(*grid, cfg.body);
    return st;
}

// ---------------------------------------------------------------------------
// artifacts

void export_snapshot(const SupportState& state, const std::filesystem::path& path) {
    if (!state.grid) throw ConfigError("state has no grid");
    const SphereGrid& grid = *state.grid;
    const int N = grid.num_nodes();

    Eigen::MatrixXd X;
    if (state.gauge == Gauge::radial_axisym) {
        for (int k = 0; k < N; ++k)
            if (!(state.values[k] > 0.0))
                throw ConvexityError("snapshot needs a star-shaped body", k,
                                     state.values[k]);
        X = state.values.asDiagonal() * grid.nodes;
    } else {
        X = state_curvature(state, -1.0).positions;
    }

    std::ofstream out(path);
    if (!out) throw IoError("cannot open snapshot file: " + path.string());
    out << "# surface snapshot X(z) = S z + grad S, t = " << fd(state.t) << "\n";
    for (int k = 0; k < N; ++k) {
        out << "v";
        for (int i = 0; i < X.cols(); ++i) out << " " << fd(X(k, i));
        out << "\n";
    }
    if (grid.mode == GridMode::full2d) {
        // Ring-by-ring triangulation; colatitude rings are index-major, the
        // azimuthal index wraps.  Winding chosen so triangle normals point
        // outward (colatitude ascends with ring index).
        for (int it = 0; it + 1 < grid.n_theta; ++it)
            for (int ip = 0; ip < grid.n_phi; ++ip) {
                int a = it * grid.n_phi + ip;
                int b = it * grid.n_phi + (ip + 1) % grid.n_phi;
                int c = (it + 1) * grid.n_phi + (ip + 1) % grid.n_phi;
                int d = (it + 1) * grid.n_phi + ip;
                out << "f " << a + 1 << " " << c + 1 << " " << b + 1 << "\n";
                out << "f " << a + 1 << " " << d + 1 << " " << c + 1 << "\n";
            }
    } else {
        // Meridian polyline for the axisymmetric grid.
        out << "l";
        for (int k = 0; k < N; ++k) out << " " << k + 1;
        out << "\n";
    }
    if (!out.good()) throw IoError("failed writing snapshot file: " + path.string());
}

namespace {

void write_trajectory_csv(const fs::path& path, const Trajectory& traj) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string());
    const bool gauss = traj.gauge == Gauge::gauss_support;
    out << "# per-record state samples; t is flow time, columns are "
        << (gauss ? "support values S(z_k)" : "radial values r(theta_k)")
        << " (model length units)\n";
    out << "t";
    const int N = traj.grid->num_nodes();
    for (int k = 0; k < N; ++k) {
        char name[24];
        std::snprintf(name, sizeof name, gauss ? "S_%04d" : "r_%04d", k);
        out << "," << name;
    }
    out << "\n";
    for (const RecordEntry& rec : traj.records) {
        out << fd(rec.t);
        for (int k = 0; k < N; ++k) out << "," << fd(rec.values[k]);
        out << "\n";
    }
    if (!out.good()) throw IoError("failed writing " + path.string());
}

void write_diagnostics_csv(const fs::path& path, const Trajectory& traj) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string());
    out << "# per-record diagnostics; lengths in model units, curvatures in "
           "1/length, volume in length^3\n";
    out << "t,r_in,r_out,w_max,w_min,H_max,H_min,lambda_ratio_max,min_eig_W,"
           "f0_max,F_max,F_min,F_times_r_in,volume";
    if (!traj.records.empty())
        for (const SigmaNormValue& v : traj.records.front().diagnostics.f_sigma_norms) {
            char name[48];
            std::snprintf(name, sizeof name, "fsigma_s%g_p%g", v.sigma, v.p);
            out << "," << name;
        }
    out << "\n";
    for (const RecordEntry& rec : traj.records) {
        const DiagnosticsRecord& d = rec.diagnostics;
        out << fd(d.t) << "," << fd(d.r_in) << "," << fd(d.r_out) << "," << fd(d.w_max)
            << "," << fd(d.w_min) << "," << fd(d.H_max) << "," << fd(d.H_min) << ","
            << fd(d.lambda_ratio_max) << "," << fd(d.min_eig_W) << "," << fd(d.f0_max)
            << "," << fd(d.F_max) << "," << fd(d.F_min) << "," << fd(d.F_times_r_in)
            << "," << fd(d.volume);
        for (const SigmaNormValue& v : d.f_sigma_norms) out << "," << fd(v.value);
        out << "\n";
    }
    if (!out.good()) throw IoError("failed writing " + path.string());
}

struct RescaledSeries {
    std::vector<RescaledFrame> parabolic;
    std::vector<RescaledFrame> volume_preserving;
    std::vector<double> I;      ///< per volume-preserving frame
    std::vector<double> I_rate; ///< per volume-preserving frame
    std::vector<SolitonFit> fits;
};

void write_rescaled_csv(const fs::path& path, const RescaledSeries& s) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string());
    out << "# rescaled series; parabolic rows list the rescaled support range, "
           "volume-preserving rows add the monotone quantity and soliton fit "
           "(dimensionless)\n";
    out << "lane,frame,tau,source_t,value_min,value_max,I_hat,I_rate,C_star,"
           "soliton_residual\n";
    for (std::size_t k = 0; k < s.parabolic.size(); ++k) {
        const RescaledFrame& f = s.parabolic[k];
        out << "parabolic," << k << "," << fd(f.tau) << "," << fd(f.source_t) << ","
            << fd(f.values.minCoeff()) << "," << fd(f.values.maxCoeff()) << ",,,,\n";
    }
    for (std::size_t k = 0; k < s.volume_preserving.size(); ++k) {
        const RescaledFrame& f = s.volume_preserving[k];
        out << "volume_preserving," << k << "," << fd(f.tau) << "," << fd(f.source_t)
            << "," << fd(f.values.minCoeff()) << "," << fd(f.values.maxCoeff()) << ","
            << fd(s.I[k]) << "," << fd(s.I_rate[k]) << "," << fd(s.fits[k].C_star)
            << "," << fd(s.fits[k].residual) << "\n";
    }
    if (!out.good()) throw IoError("failed writing " + path.string());
}

} // namespace

RunArtifacts run_experiment(const ExperimentConfig& config, bool quiet) {
    validate_config(config);

    auto grid = config_grid(config);
    SupportState st = initial_state(config, grid);
    AnisotropyDescriptor psi = config.psi;
    if (psi.center.size() == 0) psi.center = Eigen::VectorXd::Zero(config.n + 1);

    // Everything that can reject the experiment runs before any file is
    // created, so failed configs leave no artifacts behind.
    CurvatureBundle b0 = state_curvature(st, -1.0);
    ExtentReport ext0 = geometry_extents(b0);

    EngineControls controls = config.controls;
    controls.pinch = config.pinch;
    controls.sigma_norms = config.sigma_norms;
    double c_used = config.pinch.c;
    if (config.auto_c) {
        AdmissibleReport rep = admissible_c(psi, config.n, config.pinch.eps,
                                            ext0.circumcenter, 1.5 * ext0.r_out);
        c_used = rep.c;
        controls.pinch.c = rep.c;
    }

    Trajectory traj = run(st, psi, controls);

    RunArtifacts art;
    art.output_dir = fs::path(config.output_dir);
    art.pinch_c_used = c_used;
    std::error_code ec;
    fs::create_directories(art.output_dir / "snapshots", ec);
    if (ec) throw IoError("cannot create output directory: " + art.output_dir.string());

    art.trajectory_csv = art.output_dir / "trajectory.csv";
    art.diagnostics_csv = art.output_dir / "diagnostics.csv";
    art.rescaled_csv = art.output_dir / "rescaled.csv";
    art.summary_json = art.output_dir / "summary.json";

    write_trajectory_csv(art.trajectory_csv, traj);
    write_diagnostics_csv(art.diagnostics_csv, traj);

    for (std::size_t k = 0; k < traj.records.size(); ++k) {
        SupportState snap;
        snap.gauge = traj.gauge;
        snap.grid = traj.grid;
        snap.values = traj.records[k].values;
        snap.t = traj.records[k].t;
        char name[32];
        std::snprintf(name, sizeof name, "snapshot_%04zu.obj", k);
        fs::path p = art.output_dir / "snapshots" / name;
        export_snapshot(snap, p);
        art.snapshot_objs.push_back(p);
    }

    // Rescaled lanes: parabolic when an extinction estimate exists,
    // volume-preserving for n = 2.
    RescaledSeries series;
    if (traj.extinction.has_value())
        series.parabolic = parabolic_rescale(traj, traj.extinction->T, traj.extinction->x0);
    if (config.n == 2) {
        series.volume_preserving = volume_preserving_rescale(traj);
        for (const RescaledFrame& f : series.volume_preserving) {
            series.I.push_back(monotone_I(f, psi));
            series.fits.push_back(soliton_residual(f, psi));
        }
        series.I_rate = series.volume_preserving.size() >= 2
                            ? monotone_I_rate(series.volume_preserving, psi)
                            : std::vector<double>(series.volume_preserving.size(), 0.0);
    }
    write_rescaled_csv(art.rescaled_csv, series);

    // Summary document.
    ojson summary;
    summary["config"] = ojson::parse(serialize_config(config));
    summary["grid"] = ojson{{"mode", grid->mode == GridMode::full2d ? "full2d" : "axisym"},
                            {"nodes", grid->num_nodes()},
                            {"resolution", config.resolution}};

    const DiagnosticsRecord& first = traj.records.front().diagnostics;
    const DiagnosticsRecord& last = traj.records.back().diagnostics;
    summary["run"] = ojson{{"termination", termination_name(traj.termination)},
                           {"steps", double(traj.steps_taken)},
                           {"halvings", traj.total_halvings},
                           {"t_plus", traj.t_plus},
                           {"records", traj.records.size()},
                           {"t_final", traj.records.back().t},
                           {"r_in_final", last.r_in},
                           {"volume_initial", first.volume},
                           {"volume_final", last.volume}};

    double min_eig_W = first.min_eig_W, ratio_max = first.lambda_ratio_max;
    double f0_initial = first.f0_max, f0_final = last.f0_max;
    bool f0_nonincreasing = true;
    bool volumes_decreasing = true;
    bool extents_circum = true, extents_inradius = true;
    double prev_f0 = first.f0_max, prev_vol = first.volume;
    for (std::size_t k = 0; k < traj.records.size(); ++k) {
        const DiagnosticsRecord& d = traj.records[k].diagnostics;
        min_eig_W = std::min(min_eig_W, d.min_eig_W);
        ratio_max = std::max(ratio_max, d.lambda_ratio_max);
        if (k > 0) {
            if (d.f0_max > prev_f0 + 1e-6) f0_nonincreasing = false;
            if (!(d.volume < prev_vol)) volumes_decreasing = false;
        }
        prev_f0 = d.f0_max;
        prev_vol = d.volume;
        if (d.r_out > d.w_max / std::sqrt(2.0) * (1.0 + 1e-9)) extents_circum = false;
        if (d.r_in < d.w_min / (config.n + 2.0) * (1.0 - 1e-9)) extents_inradius = false;
    }
    summary["pinch"] = ojson{{"eps", config.pinch.eps},
                             {"c_used", c_used},
                             {"auto_c", config.auto_c},
                             {"min_eig_W_overall", min_eig_W},
                             {"lambda_ratio_max_overall", ratio_max},
                             {"f0_max_initial", f0_initial},
                             {"f0_max_final", f0_final}};

    ojson ext = ojson{{"estimated", traj.extinction.has_value()}};
    if (traj.extinction.has_value()) {
        const ExtinctionEstimate& e = *traj.extinction;
        ext["T"] = e.T;
        ext["x0"] = vec_to_json(e.x0);
        ext["alpha"] = e.alpha;
        ext["fit_residual"] = e.fit_residual;
        ext["records_used"] = e.records_used;
    }
    summary["extinction"] = std::move(ext);

    ojson rescaling;
    ojson para = ojson{{"frames", series.parabolic.size()}};
    if (!series.parabolic.empty()) {
        const double r_fixed = std::pow(2.0, 0.25);
        double dev = 0.0;
        int in_window = 0;
        for (const RescaledFrame& f : series.parabolic) {
            if (f.tau < 1.0 || f.tau > 3.0) continue;
            ++in_window;
            dev = std::max(dev, (f.values.array() - r_fixed).abs().maxCoeff());
        }
        const RescaledFrame& lastf = series.parabolic.back();
        para["last"] = ojson{{"tau", lastf.tau},
                             {"value_min", lastf.values.minCoeff()},
                             {"value_max", lastf.values.maxCoeff()}};
        para["window_tau_1_to_3"] =
            ojson{{"frames", in_window}, {"round_profile_deviation", dev}};
    }
    rescaling["parabolic"] = std::move(para);

    ojson vp = ojson{{"frames", series.volume_preserving.size()}};
    if (!series.volume_preserving.empty()) {
        vp["I_first"] = series.I.front();
        vp["I_last"] = series.I.back();
        ojson tail = ojson::array();
        for (std::size_t k = series.I_rate.size() >= 3 ? series.I_rate.size() - 3 : 0;
             k < series.I_rate.size(); ++k)
            tail.push_back(series.I_rate[k]);
        vp["I_rate_tail"] = std::move(tail);
        vp["soliton_last"] = ojson{{"C_star", series.fits.back().C_star},
                                   {"residual", series.fits.back().residual}};
    }
    rescaling["volume_preserving"] = std::move(vp);
    summary["rescaling"] = std::move(rescaling);

    summary["checks"] = ojson{{"volumes_strictly_decreasing", volumes_decreasing},
                              {"f0_max_nonincreasing_1e6_slack", f0_nonincreasing},
                              {"circumradius_width_bound", extents_circum},
                              {"inradius_width_bound", extents_inradius}};

    std::ofstream sj(art.summary_json);
    if (!sj) throw IoError("cannot open " + art.summary_json.string());
    sj << summary.dump(2) << "\n";
    if (!sj.good()) throw IoError("failed writing " + art.summary_json.string());

    if (!quiet) {
        std::printf("run: %s, %zu records, %ld steps\n",
                    termination_name(traj.termination).c_str(), traj.records.size(),
                    traj.steps_taken);
        if (traj.extinction.has_value())
            std::printf("extinction: T = %.9g, fit residual = %.3g\n",
                        traj.extinction->T, traj.extinction->fit_residual);
        std::printf("artifacts: %s\n", art.output_dir.string().c_str());
    }

    art.trajectory = std::move(traj);
    return art;
}

BatchResult run_batch(const std::vector<std::filesystem::path>& config_paths,
                      const std::filesystem::path& output_dir, bool quiet) {
    BatchResult result;
    std::error_code ec;
    fs::create_directories(output_dir, ec);
    if (ec) throw IoError("cannot create batch directory: " + output_dir.string());

    for (const fs::path& path : config_paths) {
        BatchRow row;
        row.name = path.stem().string();
        try {
            ExperimentConfig cfg = load_config(path);
            cfg.output_dir = (output_dir / path.stem()).string();
            RunArtifacts art = run_experiment(cfg, quiet);
            row.ok = true;
            row.t_final = art.trajectory.records.back().t;
            row.r_in_final = art.trajectory.records.back().diagnostics.r_in;
            if (art.trajectory.extinction.has_value()) row.T = art.trajectory.extinction->T;
        } catch (const Error& e) {
            row.exit_code = e.exit_code();
            row.message = e.what();
        } catch (const std::exception& e) {
            row.exit_code = 3;
            row.message = e.what();
        }
        if (!row.ok && result.exit_code == 0) result.exit_code = row.exit_code;
        if (!quiet)
            std::printf("batch row %s: %s\n", row.name.c_str(),
                        row.ok ? "ok" : row.message.c_str());
        result.rows.push_back(std::move(row));
    }

    result.table_csv = output_dir / "batch_summary.csv";
    std::ofstream out(result.table_csv);
    if (!out) throw IoError("cannot open " + result.table_csv.string());
    out << "# one row per config; T is the fitted extinction time (0 when the "
           "run did not reach the threshold)\n";
    out << "name,ok,exit_code,t_final,r_in_final,T,message\n";
    for (const BatchRow& r : result.rows)
        out << r.name << "," << (r.ok ? 1 : 0) << "," << r.exit_code << ","
            << fd(r.t_final) << "," << fd(r.r_in_final) << "," << fd(r.T) << ","
            << csv_quote(r.message) << "\n";
    if (!out.good()) throw IoError("failed writing " + result.table_csv.string());
    return result;
}

AuditBatchConfig parse_audit_config(const std::string& json_text) {
    ojson j;
    try {
        j = ojson::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("audit config parse: ") + e.what());
    }
    require_keys(j,
                 {"n", "count", "seed", "eps", "c", "psi", "grad_bound", "hess_bound",
                  "grad_tensor_amplitude"},
                 "audit config");
    AuditBatchConfig cfg;
    cfg.n = get_or(j, "n", cfg.n);
    cfg.count = get_or(j, "count", cfg.count);
    cfg.seed = static_cast<std::uint64_t>(get_or<double>(j, "seed", double(cfg.seed)));
    cfg.eps = get_or(j, "eps", cfg.eps);
    cfg.c = get_or(j, "c", cfg.c);
    cfg.psi = get_or(j, "psi", cfg.psi);
    cfg.grad_bound = get_or(j, "grad_bound", cfg.grad_bound);
    cfg.hess_bound = get_or(j, "hess_bound", cfg.hess_bound);
    cfg.grad_tensor_amplitude =
        get_or(j, "grad_tensor_amplitude", cfg.grad_tensor_amplitude);
    return cfg;
}

AuditBatchConfig load_audit_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read audit config file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_audit_config(ss.str());
}

AuditBatchResult run_audit(const AuditBatchConfig& config,
                           const std::filesystem::path& report_path) {
    AuditBatchResult result = audit_batch(config);

    std::size_t worst = 0;
    for (std::size_t k = 1; k < result.rows.size(); ++k)
        if (result.rows[k].q_parts_total < result.rows[worst].q_parts_total) worst = k;

    ojson report;
    report["config"] = ojson{{"n", config.n},
                             {"count", config.count},
                             {"seed", double(config.seed)},
                             {"eps", config.eps},
                             {"c", config.c},
                             {"psi", config.psi},
                             {"grad_bound", config.grad_bound},
                             {"hess_bound", config.hess_bound},
                             {"grad_tensor_amplitude", config.grad_tensor_amplitude}};
    report["min_q"] = result.min_q;
    report["min_part"] = result.min_part;
    report["max_bookkeeping_gap"] = result.max_gap;
    report["negative_count"] = result.negative_count;
    if (!result.rows.empty())
        report["worst_row"] = ojson{{"index", result.rows[worst].index},
                                    {"q_parts_total", result.rows[worst].q_parts_total},
                                    {"q_pre", result.rows[worst].q_pre},
                                    {"min_part", result.rows[worst].min_part}};

    std::error_code ec;
    if (report_path.has_parent_path())
        fs::create_directories(report_path.parent_path(), ec);
    if (ec) throw IoError("cannot create report directory: " +
                          report_path.parent_path().string());
    std::ofstream out(report_path);
    if (!out) throw IoError("cannot open " + report_path.string());
    out << report.dump(2) << "\n";
    if (!out.good()) throw IoError("failed writing " + report_path.string());
    return result;
}

EvolutionResiduals run_verify(const ExperimentConfig& config,
                              const std::filesystem::path& report_path) {
    validate_config(config);
    if (config.gauge != Gauge::gauss_support)
        throw ConfigError("the verify lane needs the spherical-harmonic support gauge");

    auto grid = config_grid(config);
    SupportState st = initial_state(config, grid);
    AnisotropyDescriptor psi = config.psi;
    if (psi.center.size() == 0) psi.center = Eigen::VectorXd::Zero(config.n + 1);

    bool is_round_sphere =
        config.body.kind == BodyKind::sphere &&
        (config.body.center.size() == 0 || config.body.center.cwiseAbs().maxCoeff() == 0.0);

    SupportStepper stepper = [grid, psi](const Eigen::VectorXd& values, double t,
                                         double dt) {
        SupportState s;
        s.gauge = Gauge::gauss_support;
        s.grid = grid;
        s.values = values;
        s.t = t;
        return step_gauss(s, psi, dt).values;
    };

    EvolutionResiduals res = verify_evolution(ScalarField(grid, st.values), psi,
                                              config.verify_dt, stepper, is_round_sphere);

    ojson report;
    report["config"] = ojson::parse(serialize_config(config));
    report["dt"] = res.dt;
    report["residuals"] = ojson{{"support_speed", res.support_speed},
                                {"mean_curvature", res.mean_curvature},
                                {"speed_function", res.speed_function},
                                {"speed_function_reference", res.speed_function_reference},
                                {"metric_sphere", res.metric_sphere},
                                {"sphere_checked", res.sphere_checked}};

    std::error_code ec;
    if (report_path.has_parent_path())
        fs::create_directories(report_path.parent_path(), ec);
    if (ec) throw IoError("cannot create report directory: " +
                          report_path.parent_path().string());
    std::ofstream out(report_path);
    if (!out) throw IoError("cannot open " + report_path.string());
    out << report.dump(2) << "\n";
    if (!out.good()) throw IoError("failed writing " + report_path.string());
    return res;
}

} // namespace ascflow
