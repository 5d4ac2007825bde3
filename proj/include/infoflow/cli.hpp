#pragma once

/** @file
 * Command implementations behind the infoflow executable. Each command
 * writes its artifact to RunConfig::output (or the given stream) and
 * run() maps failures to exit codes: 0 success, 1 unexpected, 2 input or
 * validation error, 3 numerical degeneracy.
 */

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "infoflow/core.hpp"
#include "infoflow/csv.hpp"
#include "infoflow/dynamics.hpp"
#include "infoflow/error.hpp"
#include "infoflow/estimator.hpp"
#include "infoflow/graph.hpp"

namespace infoflow::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUnexpected = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;

struct RunConfig {
    std::string command;
    std::string input;
    std::string output;  // empty: the output stream
    std::optional<double> dt;
    std::size_t k = 1;
    double alpha = 0.05;
    bool normalize = false;
    Mode mode = Mode::Multivariate;
    NanPolicy nan_policy = NanPolicy::Reject;
    std::uint64_t seed = 0;
    std::string format = "json";
    std::size_t workers = 1;

    // simulate / oracle
    std::string preset;
    std::string preset_dir;
    std::string a_spec;
    std::string b_spec;
    std::string f_spec;
    std::string x0_spec;
    std::optional<std::size_t> n;
    std::optional<std::size_t> burn_in;
    bool require_stationary = false;

    // graph
    std::optional<double> min_tau;
    bool bonferroni = false;

    // bench
    std::size_t bench_d = 30;
    std::size_t bench_n = 10000;
    std::size_t repetitions = 5;
};

inline void validate(const RunConfig& cfg) {
    if (cfg.dt && !(*cfg.dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "--dt must be positive");
    if (cfg.k < 1) throw Error(ErrorCode::InvalidArgument, "--k must be >= 1");
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "--alpha must be in (0, 1)");
}

/// "r00,r01;r10,r11": rows split by ';', entries by ',' or blanks.
[[nodiscard]] inline Matrix parse_matrix_spec(const std::string& spec) {
    std::vector<std::vector<double>> rows;
    for (auto row_text : infoflow::detail::split(spec, ';')) {
        std::string normalized(row_text);
        std::replace(normalized.begin(), normalized.end(), ',', ' ');
        std::istringstream in(normalized);
        std::vector<double> row;
        std::string tok;
        while (in >> tok) {
            double v = 0.0;
            if (!infoflow::detail::parse_double(tok, v) || !std::isfinite(v)) {
                throw Error(ErrorCode::BadMatrixSpec, "bad number '" + tok + "' in '" + spec + "'");
            }
            row.push_back(v);
        }
        if (row.empty()) throw Error(ErrorCode::BadMatrixSpec, "empty row in '" + spec + "'");
        rows.push_back(std::move(row));
    }
    const std::size_t cols = rows.front().size();
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != cols) throw Error(ErrorCode::BadMatrixSpec, "ragged matrix '" + spec + "'");
        for (std::size_t c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
    return m;
}

[[nodiscard]] inline Vector parse_vector_spec(const std::string& spec) {
    Matrix m = parse_matrix_spec(spec);
    if (m.rows() != 1 && m.cols() != 1) throw Error(ErrorCode::BadMatrixSpec, "expected a vector: '" + spec + "'");
    return Eigen::Map<const Vector>(m.data(), m.size());
}

/// A system plus the sampling defaults that ship with it.
struct Scenario {
    LinearSDE sde;
    Vector x0;
    double dt = 0.01;
    std::size_t n = 10000;
    std::optional<std::size_t> burn_in;
};

inline Matrix json_matrix(const nlohmann::json& j, const char* field) {
    try {
        const auto rows = j.get<std::vector<std::vector<double>>>();
        if (rows.empty()) throw Error(ErrorCode::BadMatrixSpec, std::string(field) + " is empty");
        Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != rows.front().size()) throw Error(ErrorCode::BadMatrixSpec, std::string(field) + " is ragged");
            for (std::size_t c = 0; c < rows[r].size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::BadMatrixSpec, std::string(field) + ": " + e.what());
    }
}

/**
 * Preset file: {"names", "A", "B", "f", "x0", "dt", "n", "burn_in"}; only A
 * and B are required. `name` is a file path or a preset name resolved as
 * <preset_dir>/<name>.json.
 */
[[nodiscard]] inline Scenario load_preset(const std::string& name, const std::string& preset_dir) {
    std::filesystem::path path(name);
    if (!std::filesystem::exists(path)) path = std::filesystem::path(preset_dir) / (name + ".json");
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InvalidArgument, "unknown preset '" + name + "' (looked in " + preset_dir + ")");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::BadMatrixSpec, "preset '" + name + "': " + e.what());
    }
    Matrix a = json_matrix(j.at("A"), "A");
    Matrix b = json_matrix(j.at("B"), "B");
    Vector f;
    if (j.contains("f")) {
        const auto v = j["f"].get<std::vector<double>>();
        f = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    std::vector<std::string> names;
    if (j.contains("names")) names = j["names"].get<std::vector<std::string>>();
    Scenario s;
    s.sde = make_linear_sde(std::move(a), std::move(f), std::move(b), std::move(names));
    if (j.contains("x0")) {
        const auto v = j["x0"].get<std::vector<double>>();
        s.x0 = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    } else {
        s.x0 = Vector::Zero(static_cast<Eigen::Index>(s.sde.dim()));
    }
    if (j.contains("dt")) s.dt = j["dt"].get<double>();
    if (j.contains("n")) s.n = j["n"].get<std::size_t>();
    if (j.contains("burn_in")) s.burn_in = j["burn_in"].get<std::size_t>();
    return s;
}

/// Preset (if any) overridden by inline --A/--B/--f/--x0/--dt/--n/--burn-in.
[[nodiscard]] inline Scenario resolve_scenario(const RunConfig& cfg) {
    Scenario s;
    if (!cfg.preset.empty()) {
        s = load_preset(cfg.preset, cfg.preset_dir);
    } else if (cfg.a_spec.empty()) {
        throw Error(ErrorCode::BadMatrixSpec, "need --preset or --A");
    }
    if (!cfg.a_spec.empty() || !cfg.b_spec.empty() || !cfg.f_spec.empty()) {
        Matrix a = cfg.a_spec.empty() ? s.sde.A : parse_matrix_spec(cfg.a_spec);
        const auto d = a.rows();
        Matrix b = cfg.b_spec.empty() ? (s.sde.B.rows() == d ? s.sde.B : Matrix::Identity(d, d))
                                      : parse_matrix_spec(cfg.b_spec);
        Vector f = cfg.f_spec.empty() ? (s.sde.f.size() == d ? s.sde.f : Vector::Zero(d)) : parse_vector_spec(cfg.f_spec);
        auto names = s.sde.names.size() == static_cast<std::size_t>(d) ? s.sde.names : std::vector<std::string>{};
        s.sde = make_linear_sde(std::move(a), std::move(f), std::move(b), std::move(names));
        if (s.x0.size() != d) s.x0 = Vector::Zero(d);
    }
    if (!cfg.x0_spec.empty()) s.x0 = parse_vector_spec(cfg.x0_spec);
    if (cfg.dt) s.dt = *cfg.dt;
    if (cfg.n) s.n = *cfg.n;
    if (cfg.burn_in) s.burn_in = cfg.burn_in;
    return s;
}

inline void write_output(const RunConfig& cfg, const std::string& text, std::ostream& out) {
    if (cfg.output.empty() || cfg.output == "-") {
        out << text;
        return;
    }
    std::ofstream file(cfg.output, std::ios::binary);
    if (!file) throw Error(ErrorCode::InvalidArgument, "cannot write '" + cfg.output + "'");
    file << text;
}

[[nodiscard]] inline TimeSeriesSet load_series(const RunConfig& cfg, std::ostream& err) {
    if (cfg.input.empty()) throw Error(ErrorCode::InvalidArgument, "--input is required");
    auto table = parse_csv(cfg.input);
    ValidationReport report;
    auto set = validate_series_set(table.values, std::move(table.names), cfg.dt.value_or(1.0), cfg.nan_policy, &report);
    if (report.interpolated_cells || report.trimmed_leading || report.trimmed_trailing) {
        err << "infoflow: interpolated " << report.interpolated_cells << " NaN cells, trimmed "
            << report.trimmed_leading << " leading and " << report.trimmed_trailing << " trailing samples\n";
    }
    return set;
}

[[nodiscard]] inline AllPairsOptions pair_options(const RunConfig& cfg) {
    return AllPairsOptions{cfg.k, cfg.alpha, cfg.normalize, cfg.mode, cfg.workers};
}

/// Long table: target,source,T,SE,P,TAU (TAU empty when not normalized).
[[nodiscard]] inline std::string flow_matrix_csv(const FlowMatrix& fm) {
    std::string out = "target,source,T,SE,P,TAU\n";
    char buf[40];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(fm.dim()); ++i) {
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(fm.dim()); ++j) {
            out += fm.names[static_cast<std::size_t>(i)] + "," + fm.names[static_cast<std::size_t>(j)] + "," +
                   num(fm.T(i, j)) + "," + num(fm.SE(i, j)) + "," + num(fm.P(i, j)) + "," +
                   (fm.TAU ? num((*fm.TAU)(i, j)) : std::string()) + "\n";
        }
    }
    return out;
}

inline void cmd_analyze(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const auto set = load_series(cfg, err);
    const auto fm = all_pairs(set, pair_options(cfg));
    if (cfg.format == "json") {
        write_output(cfg, emit_json(fm), out);
    } else if (cfg.format == "csv") {
        write_output(cfg, flow_matrix_csv(fm), out);
    } else {
        throw Error(ErrorCode::InvalidArgument, "analyze --format must be json or csv");
    }
}

inline void cmd_simulate(const RunConfig& cfg, std::ostream& out) {
    const auto s = resolve_scenario(cfg);
    if (cfg.require_stationary && !is_hurwitz(s.sde.A)) {
        throw Error(ErrorCode::NotHurwitz, "--require-stationary: drift matrix is not Hurwitz");
    }
    const auto set = simulate(s.sde, s.x0, SimulationOptions{s.n, s.dt, cfg.seed, s.burn_in});
    write_output(cfg, write_csv(set.names, set.values), out);
}

inline void cmd_oracle(const RunConfig& cfg, std::ostream& out) {
    const auto s = resolve_scenario(cfg);
    const auto stationary = stationary_covariance(s.sde);
    const auto d = static_cast<Eigen::Index>(s.sde.dim());
    Matrix t(d, d);
    std::vector<double> noise, residual;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
        const auto budget = theoretical_budget(s.sde, static_cast<std::size_t>(i), stationary);
        t.row(i) = budget.flows.transpose();
        t(i, i) = budget.self;
        noise.push_back(budget.noise);
        residual.push_back(budget.residual());
        worst = std::max(worst, std::abs(budget.residual()));
    }
    infoflow::detail::ojson j;
    j["orientation"] = kOrientation;
    j["names"] = s.sde.names;
    j["T"] = infoflow::detail::matrix_json(t);
    j["noise"] = noise;
    j["sigma"] = infoflow::detail::matrix_json(stationary.sigma);
    j["lyapunov_residual"] = stationary.residual;
    j["budget_residual"] = residual;
    j["max_budget_residual"] = worst;
    write_output(cfg, j.dump(2) + "\n", out);
}

inline void cmd_graph(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    FlowMatrix fm;
    if (std::filesystem::path(cfg.input).extension() == ".json") {
        std::ifstream in(cfg.input);
        if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open '" + cfg.input + "'");
        std::ostringstream buf;
        buf << in.rdbuf();
        fm = flow_matrix_from_json(buf.str());
    } else {
        fm = all_pairs(load_series(cfg, err), pair_options(cfg));
    }
    const auto g = build_graph(fm, GraphOptions{cfg.alpha, cfg.min_tau, cfg.bonferroni});
    if (cfg.format == "dot") {
        write_output(cfg, emit_dot(g), out);
    } else if (cfg.format == "json") {
        write_output(cfg, emit_json(g), out);
    } else {
        throw Error(ErrorCode::InvalidArgument, "graph --format must be dot or json");
    }
}

struct BenchReport {
    std::size_t d = 0;
    std::size_t n = 0;
    std::size_t relations = 0;
    std::size_t self_terms = 0;
    std::vector<double> seconds;
    double median_seconds = 0.0;
    double min_seconds = 0.0;
};

/// Chain X1 → X2 → … → Xd (a_{i+1,i} = 0.5, a_ii = −1, B = I).
[[nodiscard]] inline LinearSDE chain_system(std::size_t d) {
    const auto n = static_cast<Eigen::Index>(d);
    Matrix a = -Matrix::Identity(n, n);
    for (Eigen::Index i = 1; i < n; ++i) a(i, i - 1) = 0.5;
    return make_linear_sde(std::move(a), Vector::Zero(n), Matrix::Identity(n, n));
}

/// Times all_pairs (multivariate, significance and normalization) on
/// in-memory synthetic data; generation is excluded.
[[nodiscard]] inline BenchReport run_bench(std::size_t d, std::size_t n, std::size_t repetitions, std::uint64_t seed,
                                           std::size_t workers) {
    if (d < 2) throw Error(ErrorCode::InvalidArgument, "bench needs d >= 2");
    if (repetitions < 1) throw Error(ErrorCode::InvalidArgument, "bench needs at least one repetition");
    const auto sde = chain_system(d);
    const auto set = simulate(sde, Vector::Zero(static_cast<Eigen::Index>(d)), SimulationOptions{n, 0.01, seed, {}});
    const AllPairsOptions opts{1, 0.05, true, Mode::Multivariate, workers};

    BenchReport report;
    report.d = d;
    report.n = n;
    report.relations = d * (d - 1);
    report.self_terms = d;
    for (std::size_t r = 0; r < repetitions; ++r) {
        const auto start = std::chrono::steady_clock::now();
        const auto fm = all_pairs(set, opts);
        const auto stop = std::chrono::steady_clock::now();
        if (fm.dim() != d) throw Error(ErrorCode::InvalidArgument, "unexpected result size");
        report.seconds.push_back(std::chrono::duration<double>(stop - start).count());
    }
    auto sorted = report.seconds;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = sorted.size() / 2;
    report.median_seconds = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
    report.min_seconds = sorted.front();
    return report;
}

inline void cmd_bench(const RunConfig& cfg, std::ostream& out) {
    const auto r = run_bench(cfg.bench_d, cfg.bench_n, cfg.repetitions, cfg.seed, cfg.workers);
    infoflow::detail::ojson j;
    j["d"] = r.d;
    j["n"] = r.n;
    j["repetitions"] = r.seconds.size();
    j["relations"] = r.relations;
    j["self_terms"] = r.self_terms;
    j["median_seconds"] = r.median_seconds;
    j["min_seconds"] = r.min_seconds;
    j["seconds"] = r.seconds;
    write_output(cfg, j.dump(2) + "\n", out);
}

[[nodiscard]] inline int exit_code_for(ErrorCode code) noexcept {
    return is_numerical(code) ? kExitNumerical : kExitInput;
}

/// Dispatches cfg.command; diagnostics go to err.
inline int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        validate(cfg);
        if (cfg.command == "analyze") {
            cmd_analyze(cfg, out, err);
        } else if (cfg.command == "simulate") {
            cmd_simulate(cfg, out);
        } else if (cfg.command == "oracle") {
            cmd_oracle(cfg, out);
        } else if (cfg.command == "graph") {
            cmd_graph(cfg, out, err);
        } else if (cfg.command == "bench") {
            cmd_bench(cfg, out);
        } else {
            throw Error(ErrorCode::InvalidArgument, "unknown command '" + cfg.command + "'");
        }
        return kExitOk;
    } catch (const Error& e) {
        err << "infoflow: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "infoflow: unexpected error: " << e.what() << "\n";
        return kExitUnexpected;
    }
}

}  // namespace infoflow::cli
