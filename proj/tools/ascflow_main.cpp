#include <ascflow/errors.hpp>
#include <ascflow/harness.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace ascflow;

namespace {

struct CommonOpts {
    std::string output_dir;
    long long seed = -1;
    int records = 0;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_records = true) {
    cmd->add_option("--output-dir", o.output_dir, "override the output directory");
    cmd->add_option("--seed", o.seed, "override the RNG seed");
    if (with_records)
        cmd->add_option("--records", o.records,
                        "override the number of records (resets record spacing)");
    cmd->add_flag("--quiet", o.quiet, "suppress progress output");
}

void apply_overrides(ExperimentConfig& cfg, const CommonOpts& o) {
    if (!o.output_dir.empty()) cfg.output_dir = o.output_dir;
    if (o.seed >= 0) cfg.seed = static_cast<unsigned long long>(o.seed);
    if (o.records > 0) {
        cfg.controls.records_target = o.records;
        cfg.controls.record_dt = 0.0;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"anisotropic curvature-flow simulation and verification toolkit"};
    app.require_subcommand(1);
    int exit_code = 0;

    std::string run_config;
    CommonOpts run_opts;
    CLI::App* run_cmd = app.add_subcommand("run", "run one experiment config");
    run_cmd->add_option("config", run_config, "experiment config JSON")->required();
    add_common(run_cmd, run_opts);
    run_cmd->callback([&] {
        ExperimentConfig cfg = load_config(run_config);
        apply_overrides(cfg, run_opts);
        RunArtifacts art = run_experiment(cfg, run_opts.quiet);
        if (!run_opts.quiet)
            std::printf("summary: %s\n", art.summary_json.string().c_str());
    });

    std::string batch_dir;
    CommonOpts batch_opts;
    CLI::App* batch_cmd =
        app.add_subcommand("batch", "run every *.json config in a directory");
    batch_cmd->add_option("dir", batch_dir, "directory of experiment configs")
        ->required();
    add_common(batch_cmd, batch_opts, false);
    batch_cmd->callback([&] {
        if (!fs::is_directory(batch_dir))
            throw IoError("not a directory: " + batch_dir);
        std::vector<fs::path> configs;
        for (const auto& entry : fs::directory_iterator(batch_dir))
            if (entry.is_regular_file() && entry.path().extension() == ".json")
                configs.push_back(entry.path());
        std::sort(configs.begin(), configs.end());
        fs::path out = batch_opts.output_dir.empty()
                           ? fs::path(batch_dir) / "batch_out"
                           : fs::path(batch_opts.output_dir);
        BatchResult result = run_batch(configs, out, batch_opts.quiet);
        if (!batch_opts.quiet)
            std::printf("batch table: %s (%zu rows)\n",
                        result.table_csv.string().c_str(), result.rows.size());
        exit_code = result.exit_code;
    });

    std::string audit_config;
    CommonOpts audit_opts;
    CLI::App* audit_cmd =
        app.add_subcommand("audit", "run a seeded positivity audit batch");
    audit_cmd->add_option("config", audit_config, "audit config JSON")->required();
    add_common(audit_cmd, audit_opts, false);
    audit_cmd->callback([&] {
        AuditBatchConfig cfg = load_audit_config(audit_config);
        if (audit_opts.seed >= 0) cfg.seed = static_cast<std::uint64_t>(audit_opts.seed);
        fs::path out = audit_opts.output_dir.empty()
                           ? fs::path("audit_out")
                           : fs::path(audit_opts.output_dir);
        AuditBatchResult result = run_audit(cfg, out / "audit_summary.json");
        if (!audit_opts.quiet)
            std::printf("audit: %d samples, min q = %.6g, negatives = %d, "
                        "max bookkeeping gap = %.3g\n",
                        cfg.count, result.min_q, result.negative_count, result.max_gap);
    });

    std::string verify_config;
    CommonOpts verify_opts;
    CLI::App* verify_cmd = app.add_subcommand(
        "verify", "check engine steps against analytic evolution identities");
    verify_cmd->add_option("config", verify_config, "experiment config JSON")
        ->required();
    add_common(verify_cmd, verify_opts, false);
    verify_cmd->callback([&] {
        ExperimentConfig cfg = load_config(verify_config);
        if (!verify_opts.output_dir.empty()) cfg.output_dir = verify_opts.output_dir;
        fs::path out = fs::path(cfg.output_dir) / "verify.json";
        EvolutionResiduals res = run_verify(cfg, out);
        if (!verify_opts.quiet) {
            std::printf("verify (dt = %g): support %.3g, mean curvature %.3g, "
                        "speed %.3g\n",
                        res.dt, res.support_speed, res.mean_curvature,
                        res.speed_function);
            if (res.sphere_checked)
                std::printf("sphere metric identity: %.3g\n", res.metric_sphere);
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.exit_code();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return exit_code;
}
