// infoflow: information-flow causality from multivariate time series.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "infoflow/cli.hpp"

#ifndef INFOFLOW_PRESET_DIR
#define INFOFLOW_PRESET_DIR "presets"
#endif

namespace {

using infoflow::cli::RunConfig;

const char* kOrientationNote =
    "Matrices are oriented T[target][source]: row i holds the flows INTO variable i, "
    "and the diagonal holds each variable's self contribution dH*/dt. "
    "Flows are in nats per unit of --dt; with the default --dt 1 they are per sample step "
    "and scale as 1/dt.";

struct EnumFlags {
    std::string mode = "multivariate";
    std::string nan_policy = "reject";
    std::string analyze_format = "json";
    std::string graph_format = "dot";
};

void add_estimation_flags(CLI::App* cmd, RunConfig& cfg, EnumFlags& flags) {
    cmd->footer(kOrientationNote);
    cmd->add_option("--input", cfg.input, "CSV file: header of names, one row per time step, empty cell = NaN")
        ->required();
    cmd->add_option("--dt", cfg.dt, "Sampling interval in time units (default 1)");
    cmd->add_option("--k", cfg.k, "Difference lag: Xdot[n] = (X[n+k] - X[n]) / (k dt)")->default_val(1);
    cmd->add_option("--alpha", cfg.alpha, "Significance level, 0 < alpha < 1")->default_val(0.05);
    cmd->add_option("--mode", flags.mode, "multivariate (condition on all variables) or bivariate (pairwise)")
        ->check(CLI::IsMember({"multivariate", "bivariate"}))
        ->default_val("multivariate");
    cmd->add_flag("--normalize", cfg.normalize, "Attach normalized flows tau (shares of each target's entropy budget)");
    cmd->add_option("--nan-policy", flags.nan_policy, "reject, or interpolate interior NaN runs and trim the ends")
        ->check(CLI::IsMember({"reject", "interpolate"}))
        ->default_val("reject");
    cmd->add_option("--workers", cfg.workers, "Worker threads over targets (0 = all cores); output is identical")
        ->default_val(1);
}

void add_system_flags(CLI::App* cmd, RunConfig& cfg) {
    cmd->add_option("--preset", cfg.preset, "Preset name (ou2, chain5) or path to a preset JSON file");
    cmd->add_option("--preset-dir", cfg.preset_dir, "Directory holding <name>.json presets")
        ->default_val(std::string(INFOFLOW_PRESET_DIR));
    cmd->add_option("--A", cfg.a_spec, "Drift matrix, rows separated by ';', e.g. \"-1,0.5;0,-1\"");
    cmd->add_option("--B", cfg.b_spec, "Noise amplitude matrix (d x m); defaults to identity");
    cmd->add_option("--f", cfg.f_spec, "Drift offset vector; defaults to zero");
}

}  // namespace

int main(int argc, char** argv) {
    RunConfig cfg;
    EnumFlags flags;
    CLI::App app{"infoflow: information-flow (Liang-Kleeman) causality for multivariate time series.\n" +
                 std::string(kOrientationNote)};
    app.require_subcommand(1);

    auto* analyze = app.add_subcommand("analyze", "All-pairs flows, self contributions, p-values as JSON or CSV");
    add_estimation_flags(analyze, cfg, flags);
    analyze->add_option("--output", cfg.output, "Output file (default stdout)");
    analyze->add_option("--format", flags.analyze_format, "json or csv (long table target,source,T,SE,P,TAU)")
        ->default_val("json");

    auto* graph = app.add_subcommand("graph", "Significance-filtered causal graph with self-loops");
    add_estimation_flags(graph, cfg, flags);
    graph->get_option("--input")->description("CSV series, or a flow-matrix JSON written by analyze");
    graph->add_option("--output", cfg.output, "Output file (default stdout)");
    graph->add_option("--format", flags.graph_format, "dot or json")->default_val("dot");
    graph->add_option("--min-tau", cfg.min_tau, "Also require |tau| >= this (needs --normalize)");
    graph->add_flag("--bonferroni", cfg.bonferroni, "Divide alpha by d^2 before filtering");

    auto* sim = app.add_subcommand("simulate", "Euler-Maruyama trajectory of a linear SDE, written as CSV");
    add_system_flags(sim, cfg);
    sim->add_option("--x0", cfg.x0_spec, "Initial state; defaults to the preset's or zero");
    sim->add_option("--n", cfg.n, "Number of recorded samples");
    sim->add_option("--dt", cfg.dt, "Integration step (default from preset, else 0.01)");
    sim->add_option("--burn-in", cfg.burn_in,
                    "Steps discarded first (default max(10/|Re lambda_slowest|/dt, 1000) for stable A, else 0)");
    sim->add_option("--seed", cfg.seed, "Seed; equal seed and parameters give identical bytes")->default_val(0);
    sim->add_flag("--require-stationary", cfg.require_stationary, "Fail (exit 3) unless A is Hurwitz");
    sim->add_option("--output", cfg.output, "Output CSV (default stdout)");

    auto* oracle = app.add_subcommand("oracle", "Exact stationary flows, covariance and entropy budget as JSON");
    add_system_flags(oracle, cfg);
    oracle->footer(kOrientationNote);
    oracle->add_option("--output", cfg.output, "Output file (default stdout)");

    auto* bench = app.add_subcommand("bench", "Time all-pairs estimation on synthetic in-memory data");
    bench->add_option("--d", cfg.bench_d, "Number of variables")->default_val(30);
    bench->add_option("--n", cfg.bench_n, "Samples per variable")->default_val(10000);
    bench->add_option("--repetitions", cfg.repetitions, "Timed repetitions")->default_val(5);
    bench->add_option("--seed", cfg.seed, "Seed for the synthetic data")->default_val(0);
    bench->add_option("--workers", cfg.workers, "Worker threads over targets")->default_val(1);
    bench->add_option("--output", cfg.output, "Output file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : infoflow::cli::kExitInput;
    }
    cfg.command = app.get_subcommands().front()->get_name();
    cfg.format = cfg.command == "graph" ? flags.graph_format : flags.analyze_format;
    cfg.mode = infoflow::parse_mode(flags.mode);
    cfg.nan_policy = flags.nan_policy == "interpolate" ? infoflow::NanPolicy::Interpolate : infoflow::NanPolicy::Reject;
    return infoflow::cli::run(cfg, std::cout, std::cerr);
}
