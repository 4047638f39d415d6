#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <ascflow/errors.hpp>
#include <ascflow/harness.hpp>

#include <algorithm>

namespace py = pybind11;
using namespace ascflow;

namespace {

const char* termination_name(TerminationReason r) {
    switch (r) {
    case TerminationReason::extinction_threshold: return "extinction_threshold";
    case TerminationReason::step_limit: return "step_limit";
    case TerminationReason::convexity_loss: return "convexity_loss";
    }
    return "unknown";
}

/// Run the flow for a JSON config and return the trajectory in memory;
/// no files are written.
py::dict run_flow(const std::string& config_json) {
    ExperimentConfig cfg = parse_config(config_json);
    validate_config(cfg);
    auto grid = config_grid(cfg);
    SupportState st = initial_state(cfg, grid);
    AnisotropyDescriptor psi = cfg.psi;
    if (psi.center.size() == 0) psi.center = Eigen::VectorXd::Zero(cfg.n + 1);

    EngineControls controls = cfg.controls;
    controls.pinch = cfg.pinch;
    controls.sigma_norms = cfg.sigma_norms;
    double c_used = cfg.pinch.c;
    if (cfg.auto_c) {
        ExtentReport ext0 = geometry_extents(state_curvature(st, -1.0));
        c_used = admissible_c(psi, cfg.n, cfg.pinch.eps, ext0.circumcenter,
                              1.5 * ext0.r_out)
                     .c;
        controls.pinch.c = c_used;
    }
    Trajectory traj = run(st, psi, controls);

    const int K = static_cast<int>(traj.records.size());
    const int N = grid->num_nodes();
    Eigen::VectorXd t(K);
    Eigen::MatrixXd values(K, N);
    Eigen::VectorXd r_in(K), r_out(K), w_max(K), w_min(K), vol(K), f0(K),
        min_eig_W(K), ratio(K);
    for (int k = 0; k < K; ++k) {
        const RecordEntry& rec = traj.records[k];
        t[k] = rec.t;
        values.row(k) = rec.values.transpose();
        r_in[k] = rec.diagnostics.r_in;
        r_out[k] = rec.diagnostics.r_out;
        w_max[k] = rec.diagnostics.w_max;
        w_min[k] = rec.diagnostics.w_min;
        vol[k] = rec.diagnostics.volume;
        f0[k] = rec.diagnostics.f0_max;
        min_eig_W[k] = rec.diagnostics.min_eig_W;
        ratio[k] = rec.diagnostics.lambda_ratio_max;
    }

    py::dict diagnostics;
    diagnostics["r_in"] = r_in;
    diagnostics["r_out"] = r_out;
    diagnostics["w_max"] = w_max;
    diagnostics["w_min"] = w_min;
    diagnostics["volume"] = vol;
    diagnostics["f0_max"] = f0;
    diagnostics["min_eig_W"] = min_eig_W;
    diagnostics["lambda_ratio_max"] = ratio;

    py::dict out;
    out["gauge"] = cfg.gauge == Gauge::gauss_support ? "gauss_support" : "radial_axisym";
    out["nodes"] = Eigen::MatrixXd(grid->nodes);
    out["t"] = t;
    out["values"] = values;
    out["diagnostics"] = diagnostics;
    out["termination"] = termination_name(traj.termination);
    out["steps"] = traj.steps_taken;
    out["halvings"] = traj.total_halvings;
    out["pinch_c_used"] = c_used;
    if (traj.extinction.has_value()) {
        py::dict e;
        e["T"] = traj.extinction->T;
        e["x0"] = Eigen::VectorXd(traj.extinction->x0);
        e["alpha"] = traj.extinction->alpha;
        e["fit_residual"] = traj.extinction->fit_residual;
        e["records_used"] = traj.extinction->records_used;
        out["extinction"] = e;
    } else {
        out["extinction"] = py::none();
    }
    return out;
}

/// Run an experiment and write the full artifact set; returns the paths.
py::dict run_experiment_py(const std::string& config_json, bool quiet) {
    ExperimentConfig cfg = parse_config(config_json);
    RunArtifacts art = run_experiment(cfg, quiet);
    py::dict out;
    out["output_dir"] = art.output_dir.string();
    out["trajectory_csv"] = art.trajectory_csv.string();
    out["diagnostics_csv"] = art.diagnostics_csv.string();
    out["rescaled_csv"] = art.rescaled_csv.string();
    out["summary_json"] = art.summary_json.string();
    std::vector<std::string> snaps;
    snaps.reserve(art.snapshot_objs.size());
    for (const auto& p : art.snapshot_objs) snaps.push_back(p.string());
    out["snapshots"] = snaps;
    out["records"] = art.trajectory.records.size();
    out["pinch_c_used"] = art.pinch_c_used;
    out["termination"] = termination_name(art.trajectory.termination);
    if (art.trajectory.extinction.has_value())
        out["T"] = art.trajectory.extinction->T;
    return out;
}

/// Seeded positivity audit; returns the batch statistics.
py::dict audit_py(const std::string& config_json) {
    AuditBatchConfig cfg = parse_audit_config(config_json);
    AuditBatchResult res = audit_batch(cfg);
    py::dict out;
    out["count"] = int(res.rows.size());
    out["min_q"] = res.min_q;
    out["min_part"] = res.min_part;
    out["max_bookkeeping_gap"] = res.max_gap;
    out["negative_count"] = res.negative_count;
    return out;
}

/// Check engine steps against the analytic evolution identities.
py::dict verify_py(const std::string& config_json) {
    ExperimentConfig cfg = parse_config(config_json);
    validate_config(cfg);
    if (cfg.gauge != Gauge::gauss_support)
        throw ConfigError("the verify lane needs the spherical-harmonic support gauge");
    auto grid = config_grid(cfg);
    SupportState st = initial_state(cfg, grid);
    AnisotropyDescriptor psi = cfg.psi;
    if (psi.center.size() == 0) psi.center = Eigen::VectorXd::Zero(cfg.n + 1);
    bool is_round_sphere =
        cfg.body.kind == BodyKind::sphere &&
        (cfg.body.center.size() == 0 || cfg.body.center.cwiseAbs().maxCoeff() == 0.0);
    auto stepper = [grid, psi](const Eigen::VectorXd& values, double t, double dt) {
        SupportState s;
        s.gauge = Gauge::gauss_support;
        s.grid = grid;
        s.values = values;
        s.t = t;
        return step_gauss(s, psi, dt).values;
    };
    EvolutionResiduals res = verify_evolution(ScalarField(grid, st.values), psi,
                                              cfg.verify_dt, stepper, is_round_sphere);
    py::dict out;
    out["dt"] = res.dt;
    out["support_speed"] = res.support_speed;
    out["mean_curvature"] = res.mean_curvature;
    out["speed_function"] = res.speed_function;
    out["speed_function_reference"] = res.speed_function_reference;
    out["metric_sphere"] = res.metric_sphere;
    out["sphere_checked"] = res.sphere_checked;
    return out;
}

/// Grid nodes and initial samples for a config, without running the flow.
py::dict initial_body_py(const std::string& config_json) {
    ExperimentConfig cfg = parse_config(config_json);
    validate_config(cfg);
    auto grid = config_grid(cfg);
    SupportState st = initial_state(cfg, grid);
    py::dict out;
    out["nodes"] = Eigen::MatrixXd(grid->nodes);
    out["values"] = Eigen::VectorXd(st.values);
    out["volume"] = volume(st);
    ExtentReport ext = geometry_extents(state_curvature(st, -1.0));
    out["r_in"] = ext.r_in;
    out["r_out"] = ext.r_out;
    out["w_min"] = ext.w_min;
    out["w_max"] = ext.w_max;
    return out;
}

std::string canonical_config_py(const std::string& config_json) {
    return serialize_config(parse_config(config_json));
}

} // namespace

PYBIND11_MODULE(_ascflow, m) {
    m.doc() = "anisotropic curvature-flow simulator: flow runs, rescaling "
              "diagnostics, positivity audits, and evolution verification";

    // Most-derived exceptions registered last so their translators run first.
    static py::exception<Error> exc_base(m, "Error");
    py::register_exception<ConfigError>(m, "ConfigError", exc_base);
    py::register_exception<ConvexityError>(m, "ConvexityError", exc_base);
    py::register_exception<ResolutionError>(m, "ResolutionError", exc_base);
    py::register_exception<AnalysisError>(m, "AnalysisError", exc_base);
    py::register_exception<IoError>(m, "IoError", exc_base);

    m.attr("__version__") = "1.0.0";

    m.def("run_flow", &run_flow, py::arg("config_json"),
          "Run the flow for a JSON config; returns the recorded trajectory, "
          "per-record diagnostics, and the extinction estimate as numpy arrays. "
          "Writes no files.");
    m.def("run_experiment", &run_experiment_py, py::arg("config_json"),
          py::arg("quiet") = true,
          "Run the flow and write the artifact set (CSV tables, snapshots, "
          "summary JSON); returns the artifact paths.");
    m.def("audit", &audit_py, py::arg("config_json"),
          "Seeded positivity audit of the pinching certificate; returns batch "
          "statistics.");
    m.def("verify", &verify_py, py::arg("config_json"),
          "Compare engine steps against analytic evolution identities; returns "
          "the relative residuals.");
    m.def("initial_body", &initial_body_py, py::arg("config_json"),
          "Grid nodes, initial samples, enclosed volume, and extents for a "
          "config, without running the flow.");
    m.def("canonical_config", &canonical_config_py, py::arg("config_json"),
          "Parse a config and return its canonical serialized form.");
}
