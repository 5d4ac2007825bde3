#pragma once

/** @file
 * All-pairs information flow and the significance-filtered causal graph.
 *
 * Every matrix is oriented T[target][source]: row i collects the flows into
 * X_i, and the diagonal holds the self contributions dH*_i/dt.
 */

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <exception>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "infoflow/core.hpp"
#include "infoflow/error.hpp"
#include "infoflow/estimator.hpp"

namespace infoflow {

inline constexpr std::string_view kOrientation = "T[target][source]";

enum class Mode { Multivariate, Bivariate };

[[nodiscard]] constexpr std::string_view to_string(Mode mode) noexcept {
    return mode == Mode::Multivariate ? "multivariate" : "bivariate";
}

[[nodiscard]] inline Mode parse_mode(std::string_view text) {
    if (text == "multivariate") return Mode::Multivariate;
    if (text == "bivariate") return Mode::Bivariate;
    throw Error(ErrorCode::InvalidArgument, "unknown mode '" + std::string(text) + "'");
}

struct AllPairsOptions {
    std::size_t k = 1;
    double alpha = 0.05;
    bool normalize = false;
    Mode mode = Mode::Multivariate;
    std::size_t workers = 1;  // 0: one per hardware thread
};

struct FlowMatrix {
    std::vector<std::string> names;
    std::size_t k = 1;
    double dt = 1.0;
    double alpha = 0.05;
    Mode mode = Mode::Multivariate;
    Matrix T;
    Matrix P;
    Matrix SE;
    std::optional<Matrix> TAU;          // when normalized
    std::optional<Vector> noise_share;  // when normalized

    [[nodiscard]] std::size_t dim() const noexcept { return names.size(); }
};

namespace detail {

struct RowResult {
    std::vector<FlowEstimate> flows;  // index = source; [target] is the self term
    double noise_share = 0.0;
};

inline RowResult flow_row(const TimeSeriesSet& set, const CenteredData& data, const ScaledSystem& sys,
                          std::size_t target, const AllPairsOptions& opts) {
    const std::size_t d = set.dim();
    const auto fit = fit_target(data, sys, target, static_cast<double>(opts.k) * set.dt);
    RowResult row;
    row.flows.resize(d);
    std::vector<FlowEstimate> incoming;
    incoming.reserve(d - 1);
    for (std::size_t j = 0; j < d; ++j) {
        if (j == target) continue;
        if (opts.mode == Mode::Multivariate) {
            incoming.push_back(pairwise_estimate(data, sys, fit, j));
        } else {
            const auto xi = set.values.row(static_cast<Eigen::Index>(target));
            const auto xj = set.values.row(static_cast<Eigen::Index>(j));
            const std::vector<double> a(xi.begin(), xi.end());
            const std::vector<double> b(xj.begin(), xj.end());
            auto est = flow_bivariate(a, b, set.dt, opts.k);
            est.source = j;
            est.target = target;
            incoming.push_back(est);
        }
    }
    auto self = self_estimate(sys, fit);
    if (opts.normalize) row.noise_share = normalize_flows(incoming, self, fit).noise_share;
    for (auto& f : incoming) row.flows[*f.source] = std::move(f);
    row.flows[target] = std::move(self);
    return row;
}

}  // namespace detail

/**
 * One linear fit per target, then every incoming flow, the self term and
 * their significance. Targets are spread over a bounded worker pool; each
 * row depends only on read-only shared data, so output is identical for
 * any worker count.
 *
 * In bivariate mode each off-diagonal entry comes from the two-variable
 * closed form; the diagonal, noise term and normalization still use the
 * full fit of the target.
 */
inline FlowMatrix all_pairs(const TimeSeriesSet& set, const AllPairsOptions& opts = {}) {
    const std::size_t d = set.dim();
    if (d < 2) throw Error(ErrorCode::InvalidArgument, "all_pairs needs at least two variables");
    const auto data = detail::centered_data(set, opts.k);
    const auto sys = detail::scaled_system(data.C);

    std::vector<detail::RowResult> rows(d);
    std::vector<std::exception_ptr> errors(d);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next.fetch_add(1); i < d; i = next.fetch_add(1)) {
            try {
                rows[i] = detail::flow_row(set, data, sys, i, opts);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::size_t workers = opts.workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : opts.workers;
    workers = std::min(workers, d);
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    for (std::size_t i = 0; i < d; ++i) {
        if (!errors[i]) continue;
        try {
            std::rethrow_exception(errors[i]);
        } catch (const Error& e) {
            throw Error(e.code(), "target '" + set.names[i] + "': " + e.what());
        }
    }

    FlowMatrix fm;
    fm.names = set.names;
    fm.k = opts.k;
    fm.dt = set.dt;
    fm.alpha = opts.alpha;
    fm.mode = opts.mode;
    const auto n = static_cast<Eigen::Index>(d);
    fm.T.resize(n, n);
    fm.P.resize(n, n);
    fm.SE.resize(n, n);
    if (opts.normalize) {
        fm.TAU = Matrix(n, n);
        fm.noise_share = Vector(n);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto& f = rows[static_cast<std::size_t>(i)].flows[static_cast<std::size_t>(j)];
            fm.T(i, j) = f.value;
            fm.P(i, j) = f.p_value;
            fm.SE(i, j) = f.std_err;
            if (opts.normalize) (*fm.TAU)(i, j) = f.normalized.value_or(0.0);
        }
        if (opts.normalize) (*fm.noise_share)(i) = rows[static_cast<std::size_t>(i)].noise_share;
    }
    return fm;
}

struct Edge {
    std::size_t source = 0;
    std::size_t target = 0;
    double T = 0.0;
    std::optional<double> tau;
    double p = 1.0;
};

struct SelfLoop {
    std::size_t node = 0;
    double value = 0.0;
    std::optional<double> tau;
    double p = 1.0;
};

struct CausalGraph {
    std::vector<std::string> nodes;
    std::vector<Edge> edges;  // ordered by target, then source
    std::vector<SelfLoop> self_loops;
    double alpha = 0.05;
};

struct GraphOptions {
    double alpha = 0.05;
    std::optional<double> min_tau;
    bool bonferroni = false;  // divide alpha by the d² tests
};

/// Keeps pairs with p < alpha (every pair when alpha >= 1), and |tau| >=
/// min_tau when given. Self-loops are filtered by the same rule.
inline CausalGraph build_graph(const FlowMatrix& fm, const GraphOptions& opts = {}) {
    if (opts.min_tau && !fm.TAU) throw Error(ErrorCode::InvalidArgument, "min_tau needs a normalized flow matrix");
    const std::size_t d = fm.dim();
    double alpha = opts.alpha;
    if (opts.bonferroni && alpha < 1.0) alpha /= static_cast<double>(d * d);

    CausalGraph g;
    g.nodes = fm.names;
    g.alpha = alpha;
    auto keep = [&](Eigen::Index i, Eigen::Index j) {
        if (!(alpha >= 1.0 || fm.P(i, j) < alpha)) return false;
        return !opts.min_tau || std::abs((*fm.TAU)(i, j)) >= *opts.min_tau;
    };
    auto tau_at = [&](Eigen::Index i, Eigen::Index j) -> std::optional<double> {
        if (fm.TAU) return (*fm.TAU)(i, j);
        return std::nullopt;
    };
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(d); ++i) {
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(d); ++j) {
            if (!keep(i, j)) continue;
            if (i == j) {
                g.self_loops.push_back({static_cast<std::size_t>(i), fm.T(i, i), tau_at(i, i), fm.P(i, i)});
            } else {
                g.edges.push_back(
                    {static_cast<std::size_t>(j), static_cast<std::size_t>(i), fm.T(i, j), tau_at(i, j), fm.P(i, j)});
            }
        }
    }
    return g;
}

namespace detail {

inline std::string dot_id(const std::string& name) {
    const bool plain = !name.empty() && !std::isdigit(static_cast<unsigned char>(name.front())) &&
                       std::all_of(name.begin(), name.end(), [](char c) {
                           return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
                       });
    if (plain) return name;
    std::string out = "\"";
    for (char c : name) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}

inline std::string sig4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

inline std::string dot_label(double value, const std::optional<double>& tau, double p) {
    return "T=" + sig4(value) + " tau=" + (tau ? sig4(*tau) : std::string("NA")) + " p=" + sig4(p);
}

}  // namespace detail

/// Graphviz digraph; labels carry T, tau and p at 4 significant digits.
[[nodiscard]] inline std::string emit_dot(const CausalGraph& g) {
    std::string out = "digraph G {\n";
    for (const auto& n : g.nodes) out += "  " + detail::dot_id(n) + ";\n";
    for (const auto& e : g.edges) {
        out += "  " + detail::dot_id(g.nodes[e.source]) + " -> " + detail::dot_id(g.nodes[e.target]) +
               " [label=\"" + detail::dot_label(e.T, e.tau, e.p) + "\"];\n";
    }
    for (const auto& s : g.self_loops) {
        const auto id = detail::dot_id(g.nodes[s.node]);
        out += "  " + id + " -> " + id + " [label=\"" + detail::dot_label(s.value, s.tau, s.p) + "\"];\n";
    }
    out += "}\n";
    return out;
}

namespace detail {

using ojson = nlohmann::ordered_json;

inline ojson matrix_json(const Matrix& m) {
    ojson rows = ojson::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        ojson row = ojson::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j, std::size_t d, const char* field) {
    if (!j.is_array() || j.size() != d) throw Error(ErrorCode::Malformed, std::string(field) + " has wrong shape");
    Matrix m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t r = 0; r < d; ++r) {
        if (!j[r].is_array() || j[r].size() != d) throw Error(ErrorCode::Malformed, std::string(field) + " has wrong shape");
        for (std::size_t c = 0; c < d; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
    return m;
}

}  // namespace detail

/**
 * {"orientation","names","dt","k","alpha","mode","T","P","TAU","SE","noise_share"}
 * TAU and noise_share are null unless normalized. Doubles are written in
 * shortest round-trip form.
 */
[[nodiscard]] inline std::string emit_json(const FlowMatrix& fm) {
    detail::ojson j;
    j["orientation"] = kOrientation;
    j["names"] = fm.names;
    j["dt"] = fm.dt;
    j["k"] = fm.k;
    j["alpha"] = fm.alpha;
    j["mode"] = to_string(fm.mode);
    j["T"] = detail::matrix_json(fm.T);
    j["P"] = detail::matrix_json(fm.P);
    j["TAU"] = fm.TAU ? detail::matrix_json(*fm.TAU) : detail::ojson(nullptr);
    j["SE"] = detail::matrix_json(fm.SE);
    if (fm.noise_share) {
        j["noise_share"] = std::vector<double>(fm.noise_share->begin(), fm.noise_share->end());
    } else {
        j["noise_share"] = nullptr;
    }
    return j.dump(2) + "\n";
}

[[nodiscard]] inline FlowMatrix flow_matrix_from_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
        if (j.at("orientation").get<std::string>() != kOrientation) {
            throw Error(ErrorCode::Malformed, "unsupported orientation");
        }
        FlowMatrix fm;
        fm.names = j.at("names").get<std::vector<std::string>>();
        const std::size_t d = fm.names.size();
        fm.dt = j.at("dt").get<double>();
        fm.k = j.at("k").get<std::size_t>();
        fm.alpha = j.at("alpha").get<double>();
        fm.mode = parse_mode(j.at("mode").get<std::string>());
        fm.T = detail::matrix_from_json(j.at("T"), d, "T");
        fm.P = detail::matrix_from_json(j.at("P"), d, "P");
        fm.SE = detail::matrix_from_json(j.at("SE"), d, "SE");
        if (!j.at("TAU").is_null()) fm.TAU = detail::matrix_from_json(j.at("TAU"), d, "TAU");
        if (!j.at("noise_share").is_null()) {
            const auto v = j.at("noise_share").get<std::vector<double>>();
            if (v.size() != d) throw Error(ErrorCode::Malformed, "noise_share has wrong length");
            fm.noise_share = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(d));
        }
        return fm;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Malformed, e.what());
    }
}

[[nodiscard]] inline std::string emit_json(const CausalGraph& g) {
    detail::ojson j;
    j["orientation"] = kOrientation;
    j["nodes"] = g.nodes;
    j["alpha"] = g.alpha;
    auto tau_json = [](const std::optional<double>& t) { return t ? detail::ojson(*t) : detail::ojson(nullptr); };
    j["edges"] = detail::ojson::array();
    for (const auto& e : g.edges) {
        j["edges"].push_back({{"source", g.nodes[e.source]},
                              {"target", g.nodes[e.target]},
                              {"T", e.T},
                              {"tau", tau_json(e.tau)},
                              {"p", e.p}});
    }
    j["self_loops"] = detail::ojson::array();
    for (const auto& s : g.self_loops) {
        j["self_loops"].push_back(
            {{"node", g.nodes[s.node]}, {"value", s.value}, {"tau", tau_json(s.tau)}, {"p", s.p}});
    }
    return j.dump(2) + "\n";
}

}  // namespace infoflow
