#pragma once

#include <ascflow/anisotropy.hpp>
#include <ascflow/diagnostics.hpp>
#include <ascflow/flow.hpp>
#include <ascflow/rescaling.hpp>

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace ascflow {

enum class BodyKind {
    sphere,
    ellipsoid,
    perturbed_sphere,
};

/// One real-spherical-harmonic perturbation term (orthonormal convention;
/// m < 0 selects the sine partner of |m|).
struct HarmonicTerm {
    int l = 0;
    int m = 0;
    double amplitude = 0.0;
};

/// Initial body menu.  Spheres may be translated in the support gauge;
/// ellipsoids list one semi-axis per ambient coordinate (the radial gauge
/// needs all but the last equal); perturbed spheres are
/// S = r (1 + sum_j a_j Y_j) and require the spherical-harmonic grid.
struct BodySpec {
    BodyKind kind = BodyKind::sphere;
    double radius = 1.0;
    Eigen::VectorXd center;              ///< empty means the origin
    Eigen::VectorXd axes;                ///< ellipsoid semi-axes, size n+1
    std::vector<HarmonicTerm> harmonics; ///< perturbed_sphere terms
};

/// Everything one experiment needs, serializable to a JSON config file.
struct ExperimentConfig {
    int n = 2;
    Gauge gauge = Gauge::gauss_support;
    int resolution = 16; ///< band limit (full2d) or meridian node count (axisym)
    BodySpec body;
    AnisotropyDescriptor psi; ///< empty center = origin of R^{n+1}
    PinchParams pinch;
    bool auto_c = false; ///< derive pinch.c from the weight over the start region
    std::vector<SigmaNormSpec> sigma_norms;
    EngineControls controls; ///< pinch/sigma_norms fields here are ignored;
                             ///< the runner injects the ones above
    double verify_dt = 1e-5; ///< step used by the `verify` lane
    std::string output_dir = "out";
    unsigned long long seed = 2026;
};

/// Parse a JSON config document.  Unknown keys and malformed values raise
/// ConfigError; missing optional keys take the defaults above.
ExperimentConfig parse_config(const std::string& json_text);

/// Canonical JSON form; parse(serialize(c)) reproduces c exactly.
std::string serialize_config(const ExperimentConfig& config);

/// Read and parse a config file (IoError if unreadable).
ExperimentConfig load_config(const std::filesystem::path& path);

/// Structural validation beyond parsing: dimension/gauge/body compatibility,
/// weight positivity, pinch ranges.  Throws ConfigError.
void validate_config(const ExperimentConfig& config);

/// Grid described by the config.
std::shared_ptr<const SphereGrid> config_grid(const ExperimentConfig& config);

/// Initial support state (gauss gauge: support samples; radial gauge:
/// radius samples) for the configured body.
SupportState initial_state(const ExperimentConfig& config,
                           std::shared_ptr<const SphereGrid> grid);

/// Body samples on an explicit grid, one per gauge.
Eigen::VectorXd body_support_samples(const SphereGrid& grid, const BodySpec& body);
Eigen::VectorXd body_radial_samples(const SphereGrid& grid, const BodySpec& body);

/// Files written by run_experiment, plus the in-memory trajectory for
/// downstream analysis.
struct RunArtifacts {
    std::filesystem::path output_dir;
    std::filesystem::path trajectory_csv;
    std::filesystem::path diagnostics_csv;
    std::filesystem::path rescaled_csv;
    std::filesystem::path summary_json;
    std::vector<std::filesystem::path> snapshot_objs;
    Trajectory trajectory;
    double pinch_c_used = 0.0; ///< pinch.c after the optional auto-c step
};

/// Full pipeline: validate -> grid -> initial state -> (auto-c) -> run ->
/// extinction fit -> rescalings -> artifacts on disk.
RunArtifacts run_experiment(const ExperimentConfig& config, bool quiet = true);

/// Triangulated surface X(z) = S z + grad S (OBJ text).  Vertex count equals
/// node count; the spherical-harmonic grid is triangulated ring by ring, the
/// axisymmetric grid writes its meridian as a polyline.
void export_snapshot(const SupportState& state, const std::filesystem::path& path);

/// One row of a batch summary.
struct BatchRow {
    std::string name;
    bool ok = false;
    int exit_code = 0;
    std::string message;     ///< error text when !ok
    double t_final = 0.0;
    double r_in_final = 0.0;
    double T = 0.0;          ///< fitted extinction time (0 when unavailable)
};

struct BatchResult {
    std::vector<BatchRow> rows;
    std::filesystem::path table_csv;
    int exit_code = 0; ///< 0 when every row succeeded, else the first failure's code
};

/// Run each config into <output_dir>/<config-stem>/; failures are isolated
/// per row.  Configs are processed in the given order.
BatchResult run_batch(const std::vector<std::filesystem::path>& config_paths,
                      const std::filesystem::path& output_dir, bool quiet = true);

/// Null-condition audit lane: JSON config mirroring AuditBatchConfig.
AuditBatchConfig parse_audit_config(const std::string& json_text);
AuditBatchConfig load_audit_config(const std::filesystem::path& path);

/// Run the audit and write a JSON report; returns the batch result.
AuditBatchResult run_audit(const AuditBatchConfig& config,
                           const std::filesystem::path& report_path);

/// Evolution-identity lane: builds the configured body in the support gauge
/// and verifies the motion identities at config.verify_dt, writing a JSON
/// report.  Radial-gauge configs are rejected.
EvolutionResiduals run_verify(const ExperimentConfig& config,
                              const std::filesystem::path& report_path);

} // namespace ascflow
