#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "boundary.hpp"
#include "exploration.hpp"
#include "graph.hpp"
#include "measures.hpp"
#include "sampler.hpp"
#include "stats.hpp"

namespace gibbs {

using json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

// Largest log|xi| whose field beta J xi still fits a double with room for neighbour sums.
inline constexpr double kLogBudget = 690.0;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------------------------
// worker pool

inline int worker_count()
{
    int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (const char* e = std::getenv("GIBBS_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(e, &end, 10);
        if (end != e && v >= 1)
            return static_cast<int>(std::min<long>(v, hw));
    }
    return hw;
}

// Runs f(i) for i in [0, n); results land in slot i so the reduce order never depends on scheduling.
template <class R, class F>
std::vector<R> parallel_cells(int n, F f)
{
    std::vector<R> out(n);
    const int T = std::min(worker_count(), n);
    if (T <= 1) {
        for (int i = 0; i < n; ++i)
            out[i] = f(i);
        return out;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errs(n);
    std::vector<std::thread> pool;
    for (int t = 0; t < T; ++t)
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    out[i] = f(i);
                } catch (...) {
                    errs[i] = std::current_exception();
                }
            }
        });
    for (auto& th : pool)
        th.join();
    for (auto& e : errs)
        if (e)
            std::rethrow_exception(e);
    return out;
}

// ---------------------------------------------------------------------------------------------
// config

namespace cfg {

inline const json& need(const json& j, const char* key)
{
    if (!j.is_object() || !j.contains(key))
        throw ConfigError(std::string("missing key '") + key + "'");
    return j.at(key);
}

inline double num(const json& j, const char* key)
{
    const json& v = need(j, key);
    if (!v.is_number())
        throw ConfigError(std::string("key '") + key + "' must be a number");
    double d = v.get<double>();
    if (!std::isfinite(d))
        throw ConfigError(std::string("key '") + key + "' must be finite");
    return d;
}

inline double num(const json& j, const char* key, double dflt) { return j.contains(key) ? num(j, key) : dflt; }

inline long long integer(const json& j, const char* key)
{
    const json& v = need(j, key);
    if (!v.is_number_integer())
        throw ConfigError(std::string("key '") + key + "' must be an integer");
    return v.get<long long>();
}

inline long long integer(const json& j, const char* key, long long dflt)
{
    return j.contains(key) ? integer(j, key) : dflt;
}

inline std::string str(const json& j, const char* key)
{
    const json& v = need(j, key);
    if (!v.is_string())
        throw ConfigError(std::string("key '") + key + "' must be a string");
    return v.get<std::string>();
}

inline std::string str(const json& j, const char* key, const std::string& dflt)
{
    return j.contains(key) ? str(j, key) : dflt;
}

inline bool flag(const json& j, const char* key, bool dflt)
{
    if (!j.contains(key))
        return dflt;
    if (!j.at(key).is_boolean())
        throw ConfigError(std::string("key '") + key + "' must be a boolean");
    return j.at(key).get<bool>();
}

inline std::vector<double> reals(const json& j)
{
    if (!j.is_array())
        throw ConfigError("expected an array of numbers");
    std::vector<double> v;
    for (auto& e : j) {
        if (!e.is_number())
            throw ConfigError("expected an array of numbers");
        v.push_back(e.get<double>());
    }
    return v;
}

// Unknown keys are configuration errors, so typos never silently fall back to defaults.
inline void allow(const json& j, std::initializer_list<const char*> keys, const char* where)
{
    if (!j.is_object())
        throw ConfigError(std::string(where) + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (auto k : keys)
            ok = ok || it.key() == k;
        if (!ok)
            throw ConfigError(std::string("unknown key '") + it.key() + "' in " + where);
    }
}

}  // namespace cfg

inline Graph scale_couplings(Graph g, double k)
{
    for (auto& row : g.coupling)
        for (auto& e : row)
            e.J *= k;
    return g;
}

struct GraphSpec {
    std::string kind = "path";
    int L = 0, d = 1;
    Graph graph;
};

inline GraphSpec graph_from_json(const json& j, const std::filesystem::path& base = {})
{
    cfg::allow(j, {"kind", "L", "d", "degree", "depth", "n", "extra", "seed", "file", "J"}, "graph");
    GraphSpec s;
    s.kind = cfg::str(j, "kind");
    double J = cfg::num(j, "J", 1.0);
    if (!(J > 0.0))
        throw ConfigError("graph coupling scale J must be positive");
    if (s.kind == "path") {
        s.L = static_cast<int>(cfg::integer(j, "L"));
        s.graph = with_nearest_neighbour(make_path(s.L));
    } else if (s.kind == "box") {
        s.d = static_cast<int>(cfg::integer(j, "d"));
        s.L = static_cast<int>(cfg::integer(j, "L"));
        s.graph = with_nearest_neighbour(make_box(s.d, s.L));
    } else if (s.kind == "tree") {
        s.graph = with_nearest_neighbour(
            make_regular_tree(static_cast<int>(cfg::integer(j, "degree")), static_cast<int>(cfg::integer(j, "depth"))));
    } else if (s.kind == "random") {
        s.graph = with_nearest_neighbour(make_random_connected(static_cast<int>(cfg::integer(j, "n")),
                                                               static_cast<int>(cfg::integer(j, "extra", 0)),
                                                               static_cast<std::uint64_t>(cfg::integer(j, "seed", 1))));
    } else if (s.kind == "edge_list") {
        auto p = std::filesystem::path(cfg::str(j, "file"));
        if (p.is_relative() && !base.empty())
            p = base / p;
        s.graph = load_edge_list(p.string());
    } else {
        throw ConfigError("unknown graph kind '" + s.kind + "'");
    }
    if (J != 1.0)
        s.graph = scale_couplings(s.graph, J);
    return s;
}

// {kind, coefficients, tilt: {b, n}, shift: B}
inline Measure measure_from_json(const json& j)
{
    cfg::allow(j, {"kind", "coefficients", "tilt", "shift"}, "measure");
    const std::string kind = cfg::str(j, "kind");
    const json& c = cfg::need(j, "coefficients");
    Measure m = Measure::gaussian(1.0);
    try {
        if (kind == "atomic") {
            if (!c.is_array())
                throw ConfigError("atomic coefficients must be [[location, mass], ...]");
            std::vector<std::pair<double, double>> at;
            for (auto& p : c) {
                auto v = cfg::reals(p);
                if (v.size() != 2)
                    throw ConfigError("atomic coefficients must be [[location, mass], ...]");
                at.emplace_back(v[0], v[1]);
            }
            m = Measure::atomic(at);
        } else {
            auto v = cfg::reals(c);
            auto want = [&](std::size_t k) {
                if (v.size() != k)
                    throw ConfigError(kind + " takes " + std::to_string(k) + " coefficients");
            };
            if (kind == "pure_tail") {
                want(2);
                m = Measure::pure_tail(v[0], v[1]);
            } else if (kind == "gaussian") {
                want(1);
                m = Measure::gaussian(v[0]);
            } else if (kind == "phi4") {
                want(2);
                m = Measure::phi4(v[0], v[1]);
            } else if (kind == "poly") {
                m = Measure::poly_potential(v);
            } else {
                throw ConfigError("unknown measure kind '" + kind + "'");
            }
        }
        double b = 0.0, n = 2.0;
        if (j.contains("tilt")) {
            cfg::allow(j.at("tilt"), {"b", "n"}, "tilt");
            b = cfg::num(j.at("tilt"), "b");
            n = cfg::num(j.at("tilt"), "n");
        }
        if (j.contains("shift"))
            return m.shift_truncated(b, n, cfg::num(j, "shift"));
        if (j.contains("tilt"))
            return m.tilted(b, n);
        return m;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("measure: ") + e.what());
    }
}

struct BoundarySpec {
    BoundaryField field;
    bool one_sided = false;   // path only: zero on the vertices left of the origin
    double left_scale = 1.0;  // path only: left side multiplied by this (negative gives mixed signs)
};

inline BoundarySpec boundary_from_json(const json& j)
{
    cfg::allow(j, {"family", "K", "n", "rate", "C", "lambda", "M", "r", "values", "one_sided", "left_scale"}, "boundary");
    BoundarySpec b;
    const std::string f = cfg::str(j, "family");
    try {
        if (f == "constant")
            b.field = BoundaryField::constant(cfg::num(j, "K", 0.0));
        else if (f == "double_exponential")
            b.field = BoundaryField::double_exponential(cfg::num(j, "K"), cfg::num(j, "n"), cfg::num(j, "rate", 1.0));
        else if (f == "exponential")
            b.field = BoundaryField::exponential(cfg::num(j, "C"), cfg::num(j, "lambda"));
        else if (f == "kernel_growth")
            b.field = BoundaryField::kernel_growth(cfg::num(j, "M"), cfg::num(j, "r"));
        else if (f == "xi_plus")
            b.field = BoundaryField::xi_plus();
        else if (f == "xi_minus")
            b.field = BoundaryField::xi_minus();
        else if (f == "table")
            b.field = BoundaryField::table(cfg::reals(cfg::need(j, "values")));
        else
            throw ConfigError("unknown boundary family '" + f + "'");
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("boundary: ") + e.what());
    }
    b.one_sided = cfg::flag(j, "one_sided", false);
    b.left_scale = cfg::num(j, "left_scale", 1.0);
    return b;
}

// (sign, log|xi|) per vertex after the one-sided / mixed modifications.
inline std::pair<std::vector<int>, std::vector<double>> boundary_logs(const BoundarySpec& b, const Graph& g)
{
    auto la = b.field.log_abs(g);
    auto sg = b.field.sign(g);
    if (b.one_sided || b.left_scale != 1.0) {
        for (int x = 0; x < g.origin; ++x) {
            if (b.one_sided) {
                la[x] = kNegInf;
                continue;
            }
            if (b.left_scale == 0.0) {
                la[x] = kNegInf;
            } else {
                la[x] += std::log(std::fabs(b.left_scale));
                if (b.left_scale < 0.0)
                    sg[x] = -sg[x];
            }
        }
    }
    return {sg, la};
}

inline std::vector<double> boundary_values(const BoundarySpec& b, const Graph& g)
{
    auto [sg, la] = boundary_logs(b, g);
    std::vector<double> v(g.size());
    for (int x = 0; x < g.size(); ++x)
        v[x] = sg[x] * std::exp(la[x]);
    return v;
}

struct Budget {
    long long sweeps = 20000;
    long long burn_in = 1000;
    int thinning = 1;
    int replicas = 1;
    long long outer_draws = 50;
};

struct Thresholds {
    double se_rule = 3.0;      // k-SE rule for means and probabilities
    double drift_se = 2.0;     // tightness: last-third drift
    double growth_se = 5.0;    // tightness: divergence
    double dkw_alpha = 0.01;   // 99% bands
};

struct ExperimentConfig {
    std::string name;
    json raw;
    GraphSpec graph;
    Measure measure = Measure::gaussian(1.0);
    double beta = 0.0;
    BoundarySpec boundary;
    std::vector<int> volumes;          // radii of nested volumes around the origin
    std::string volume_shape = "ball"; // ball (graph distance) or cube (sup norm on boxes)
    Budget budget;
    Thresholds thresholds;
    std::uint64_t seed = 1;
    json params = json::object();      // experiment-specific block
    std::string output;
};

inline const std::vector<std::string>& experiment_names()
{
    static const std::vector<std::string> n{"tightness_scan", "anti_tightness_cascade", "regularity_ratio_check",
                                            "domination_suite", "plus_measure_suite"};
    return n;
}

// Model-only configs (sample, explore) carry no experiment name and may list observables.
inline ExperimentConfig config_from_json(const json& j, const std::filesystem::path& base = {},
                                         bool require_experiment = true)
{
    cfg::allow(j,
               {"experiment", "graph", "measure", "beta", "boundary", "volumes", "volume_shape", "budget", "thresholds",
                "seed", "params", "output", "observables"},
               "config");
    ExperimentConfig c;
    c.raw = j;
    if (require_experiment || j.contains("experiment")) {
        c.name = cfg::str(j, "experiment");
        auto& names = experiment_names();
        if (std::find(names.begin(), names.end(), c.name) == names.end())
            throw ConfigError("unknown experiment '" + c.name + "'");
    }
    c.graph = graph_from_json(cfg::need(j, "graph"), base);
    c.measure = measure_from_json(cfg::need(j, "measure"));
    c.beta = cfg::num(j, "beta");
    if (!(c.beta >= 0.0))
        throw ConfigError("beta must be >= 0");
    c.boundary = j.contains("boundary") ? boundary_from_json(j.at("boundary")) : BoundarySpec{};
    if ((c.boundary.one_sided || c.boundary.left_scale != 1.0) && c.graph.kind != "path")
        throw ConfigError("one-sided and mixed boundaries are defined on paths only");
    for (double v : cfg::reals(cfg::need(j, "volumes"))) {
        if (v != std::floor(v) || v < 0)
            throw ConfigError("volume radii must be non-negative integers");
        c.volumes.push_back(static_cast<int>(v));
    }
    if (c.volumes.empty())
        throw ConfigError("volume schedule is empty");
    for (std::size_t i = 1; i < c.volumes.size(); ++i)
        if (c.volumes[i] <= c.volumes[i - 1])
            throw ConfigError("volume schedule must be strictly increasing");
    c.volume_shape = cfg::str(j, "volume_shape", "ball");
    if (c.volume_shape != "ball" && c.volume_shape != "cube")
        throw ConfigError("volume_shape must be ball or cube");
    if (c.volume_shape == "cube" && c.graph.kind != "box" && c.graph.kind != "path")
        throw ConfigError("cube volumes need a box graph");
    if (j.contains("budget")) {
        const json& b = j.at("budget");
        cfg::allow(b, {"sweeps", "burn_in", "thinning", "replicas", "outer_draws"}, "budget");
        c.budget.sweeps = cfg::integer(b, "sweeps", c.budget.sweeps);
        c.budget.burn_in = cfg::integer(b, "burn_in", c.budget.burn_in);
        c.budget.thinning = static_cast<int>(cfg::integer(b, "thinning", c.budget.thinning));
        c.budget.replicas = static_cast<int>(cfg::integer(b, "replicas", c.budget.replicas));
        c.budget.outer_draws = cfg::integer(b, "outer_draws", c.budget.outer_draws);
    }
    if (!(c.budget.sweeps > c.budget.burn_in) || c.budget.burn_in < 0 || c.budget.thinning < 1 ||
        c.budget.replicas < 1 || c.budget.outer_draws < 1)
        throw ConfigError("budget needs sweeps > burn_in >= 0, thinning >= 1, replicas >= 1, outer_draws >= 1");
    if (j.contains("thresholds")) {
        const json& t = j.at("thresholds");
        cfg::allow(t, {"se_rule", "drift_se", "growth_se", "dkw_alpha"}, "thresholds");
        c.thresholds.se_rule = cfg::num(t, "se_rule", c.thresholds.se_rule);
        c.thresholds.drift_se = cfg::num(t, "drift_se", c.thresholds.drift_se);
        c.thresholds.growth_se = cfg::num(t, "growth_se", c.thresholds.growth_se);
        c.thresholds.dkw_alpha = cfg::num(t, "dkw_alpha", c.thresholds.dkw_alpha);
        if (!(c.thresholds.dkw_alpha > 0.0 && c.thresholds.dkw_alpha < 1.0))
            throw ConfigError("dkw_alpha must lie in (0, 1)");
    }
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer())
            throw ConfigError("seed must be a non-negative integer");
        c.seed = j.at("seed").get<std::uint64_t>();
    }
    if (j.contains("params")) {
        if (!j.at("params").is_object())
            throw ConfigError("params must be an object");
        c.params = j.at("params");
    }
    c.output = cfg::str(j, "output", "");
    return c;
}

inline ExperimentConfig load_config(const std::string& path, bool require_experiment = true)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("parse error: ") + e.what());
    }
    return config_from_json(j, std::filesystem::path(path).parent_path(), require_experiment);
}

// Nested volume of radius r around the origin.
inline Region volume(const ExperimentConfig& c, int r)
{
    const Graph& g = c.graph.graph;
    if (c.volume_shape == "ball" || c.graph.kind == "path")
        return ball_region(g, g.origin, r);
    const int L = c.graph.L, d = c.graph.d;
    std::vector<int> oc(d);
    for (int i = 0, v = g.origin; i < d; ++i, v /= L)
        oc[i] = v % L;
    Region R;
    R.in.assign(g.size(), 0);
    for (int x = 0; x < g.size(); ++x) {
        bool ok = true;
        for (int i = 0, v = x; i < d; ++i, v /= L)
            ok = ok && std::abs(v % L - oc[i]) <= r;
        R.in[x] = ok;
    }
    return R;
}

// {"kind": "site"|"abs"|"product"|"indicator_ge", "x", "y", "u"}; origin when x is absent.
inline std::vector<Observable> observables_from_json(const ExperimentConfig& c)
{
    const int o = c.graph.graph.origin, N = c.graph.graph.size();
    if (!c.raw.contains("observables"))
        return {obs_site(o), obs_abs(o)};
    const json& arr = c.raw.at("observables");
    if (!arr.is_array() || arr.empty())
        throw ConfigError("observables must be a non-empty array");
    std::vector<Observable> out;
    for (auto& e : arr) {
        cfg::allow(e, {"kind", "x", "y", "u"}, "observable");
        const std::string k = cfg::str(e, "kind");
        int x = static_cast<int>(cfg::integer(e, "x", o));
        if (x < 0 || x >= N)
            throw ConfigError("observable vertex out of range");
        if (k == "site")
            out.push_back(obs_site(x));
        else if (k == "abs")
            out.push_back(obs_abs(x));
        else if (k == "product") {
            int y = static_cast<int>(cfg::integer(e, "y"));
            if (y < 0 || y >= N)
                throw ConfigError("observable vertex out of range");
            out.push_back(obs_product(x, y));
        } else if (k == "indicator_ge")
            out.push_back(obs_indicator_ge(x, cfg::num(e, "u")));
        else
            throw ConfigError("unknown observable kind '" + k + "'");
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// report

struct Verdict {
    std::string name;
    bool pass = false;
    std::string rule;     // what was compared
    double statistic = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

struct ExperimentReport {
    std::string experiment;
    json provenance;
    std::vector<std::string> notes;
    json data = json::object();
    std::vector<Verdict> verdicts;

    bool passed() const
    {
        return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
    }

    json to_json() const
    {
        json j;
        j["experiment"] = experiment;
        j["provenance"] = provenance;
        j["notes"] = notes;
        j["data"] = data;
        json vs = json::array();
        for (auto& v : verdicts)
            vs.push_back({{"name", v.name},
                          {"pass", v.pass},
                          {"rule", v.rule},
                          {"statistic", v.statistic},
                          {"tolerance", v.tolerance},
                          {"detail", v.detail}});
        j["verdicts"] = vs;
        j["passed"] = passed();
        return j;
    }
};

inline std::uint64_t fnv1a(const std::string& s)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline ExperimentReport new_report(const ExperimentConfig& c)
{
    ExperimentReport r;
    r.experiment = c.name;
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(c.raw.dump())));
    r.provenance = {{"config_hash", hash},
                    {"seed", c.seed},
                    {"version", kVersion},
                    {"compiler", __VERSION__},
                    {"thresholds",
                     {{"se_rule", c.thresholds.se_rule},
                      {"drift_se", c.thresholds.drift_se},
                      {"growth_se", c.thresholds.growth_se},
                      {"dkw_alpha", c.thresholds.dkw_alpha}}}};
    return r;
}

// ---------------------------------------------------------------------------------------------
// shared chain plumbing

struct PooledRun {
    std::vector<std::vector<double>> samples;  // per observable, replicas concatenated
    long long order_violations = 0;
};

inline ChainOptions chain_options(const ExperimentConfig& c, std::uint64_t stream)
{
    ChainOptions o;
    o.sweeps = c.budget.sweeps;
    o.burn_in = c.budget.burn_in;
    o.thinning = c.budget.thinning;
    o.seed = c.seed;
    o.stream = stream;
    o.keep_samples = true;
    return o;
}

// One chain per replica, each on stream (cell * 1024 + replica); concatenation is in replica order.
inline PooledRun pooled_chain(const ExperimentConfig& c, const ModelSpec& s, const std::vector<Observable>& obs,
                              std::uint64_t cell)
{
    PooledRun p;
    p.samples.resize(obs.size());
    for (int r = 0; r < c.budget.replicas; ++r) {
        auto cs = run_chain(s, chain_options(c, cell * 1024 + r), obs);
        for (std::size_t k = 0; k < obs.size(); ++k)
            p.samples[k].insert(p.samples[k].end(), cs.observables[k].samples.begin(), cs.observables[k].samples.end());
    }
    return p;
}

inline double effective_n(const std::vector<double>& xs)
{
    if (xs.size() < 64)
        return static_cast<double>(xs.size());
    auto st = batch_means(xs);
    return std::max(1.0, st.ess);
}

// Empirical P[x >= u] with a batch-means standard error.
inline std::pair<double, double> tail_probability(const std::vector<double>& xs, double u)
{
    std::vector<double> ind(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
        ind[i] = xs[i] >= u ? 1.0 : 0.0;
    auto st = batch_means(ind);
    return {st.mean, st.stderr_};
}

// sup_u (F_ref(u) - F_emp(u)) over the sample points: how far the sample sits above the reference.
inline double excess_over_cdf(std::vector<double> xs, const std::function<double(double)>& ref_cdf)
{
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i)
        d = std::max(d, ref_cdf(xs[i]) - static_cast<double>(i) / n);
    return d;
}

inline bool is_path_graph(const Graph& g)
{
    if (!g.nearest_neighbour || g.max_degree() > 2 || !connected(g))
        return false;
    for (int x = 0; x + 1 < g.size(); ++x)
        if (g.J(x, x + 1) == 0.0)
            return false;
    return true;
}

// log|xi| of the exterior neighbours of a region; +inf marks a volume outside the double range.
inline double exterior_log_max(const Graph& g, const Region& L, const std::vector<double>& la)
{
    double m = kNegInf;
    for (int x = 0; x < g.size(); ++x)
        if (L.in[x])
            for (auto& e : g.coupling[x])
                if (!L.in[e.to])
                    m = std::max(m, la[e.to] + std::log(std::fabs(e.J)));
    return m;
}

// ---------------------------------------------------------------------------------------------
// tightness scan

struct TightnessRow {
    int radius = 0;
    bool feasible = true;
    double mean = 0, mean_se = 0;
    QuantileEstimate q90, q99;
    double ess = 0;
};

inline std::string classify_tightness(const std::vector<QuantileEstimate>& q, const Thresholds& t, double& drift_stat,
                                      double& growth_stat)
{
    const int nv = static_cast<int>(q.size());
    drift_stat = 0.0;
    growth_stat = 0.0;
    if (nv < 2)
        return "inconclusive";
    const int m = std::min(nv, std::max(3, (nv + 2) / 3));
    for (int i = nv - m; i < nv; ++i)
        for (int k = i + 1; k < nv; ++k) {
            double se = std::sqrt(q[i].stderr_ * q[i].stderr_ + q[k].stderr_ * q[k].stderr_);
            double z = se > 0.0 ? std::fabs(q[k].value - q[i].value) / se
                                : (q[k].value == q[i].value ? 0.0 : std::numeric_limits<double>::infinity());
            drift_stat = std::max(drift_stat, z);
        }
    bool monotone = true;
    for (int i = 0; i + 1 < nv; ++i)
        monotone = monotone && q[i + 1].value > q[i].value;
    double se = std::sqrt(q.front().stderr_ * q.front().stderr_ + q.back().stderr_ * q.back().stderr_);
    growth_stat = se > 0.0 ? (q.back().value - q.front().value) / se : 0.0;
    if (monotone && growth_stat > t.growth_se)
        return "diverging";
    if (drift_stat < t.drift_se)
        return "tight-consistent";
    return "inconclusive";
}

inline ExperimentReport tightness_scan(const ExperimentConfig& c)
{
    cfg::allow(c.params, {"expect"}, "params");
    const std::string expect = cfg::str(c.params, "expect", "");
    if (!expect.empty() && expect != "tight" && expect != "diverging")
        throw ConfigError("params.expect must be tight or diverging");
    ExperimentReport rep = new_report(c);
    const Graph& g = c.graph.graph;
    auto [sg, la] = boundary_logs(c.boundary, g);
    std::vector<double> xi(g.size());
    for (int x = 0; x < g.size(); ++x)
        xi[x] = sg[x] * std::exp(la[x]);
    const int o = g.origin;
    const int nv = static_cast<int>(c.volumes.size());

    auto rows = parallel_cells<TightnessRow>(nv, [&](int i) {
        TightnessRow row;
        row.radius = c.volumes[i];
        Region L = volume(c, row.radius);
        if (exterior_log_max(g, L, la) > kLogBudget) {
            row.feasible = false;
            return row;
        }
        ModelSpec s = make_spec(g, L, c.beta, c.measure, xi);
        auto p = pooled_chain(c, s, {obs_abs(o)}, static_cast<std::uint64_t>(i));
        auto st = batch_means(p.samples[0]);
        row.mean = st.mean;
        row.mean_se = st.stderr_;
        row.ess = st.ess;
        row.q90 = batch_quantile(p.samples[0], 0.9);
        row.q99 = batch_quantile(p.samples[0], 0.99);
        return row;
    });

    json vols = json::array();
    std::vector<QuantileEstimate> q99;
    for (auto& r : rows) {
        if (!r.feasible) {
            rep.notes.push_back("radius " + std::to_string(r.radius) +
                                " skipped: boundary values exceed the double range");
            vols.push_back({{"radius", r.radius}, {"feasible", false}});
            continue;
        }
        q99.push_back(r.q99);
        vols.push_back({{"radius", r.radius},
                        {"feasible", true},
                        {"mean_abs_phi_o", r.mean},
                        {"mean_se", r.mean_se},
                        {"q90", r.q90.value},
                        {"q90_se", r.q90.stderr_},
                        {"q99", r.q99.value},
                        {"q99_se", r.q99.stderr_},
                        {"ess", r.ess}});
    }
    rep.data["volumes"] = vols;
    double drift = 0, growth = 0;
    std::string cls = classify_tightness(q99, c.thresholds, drift, growth);
    rep.data["classification"] = cls;
    rep.data["drift_stat"] = drift;
    rep.data["growth_stat"] = growth;
    if (q99.size() < 3)
        rep.notes.push_back("fewer than three feasible volumes");
    if (expect == "tight")
        rep.verdicts.push_back({"tight-consistent", cls == "tight-consistent",
                                "max pairwise |dq99| over the last third of volumes < drift_se pooled SE", drift,
                                c.thresholds.drift_se, cls});
    else if (expect == "diverging")
        rep.verdicts.push_back({"diverging", cls == "diverging",
                                "q99 strictly increasing and (q99_last - q99_first) > growth_se pooled SE", growth,
                                c.thresholds.growth_se, cls});
    else
        rep.verdicts.push_back({"classified", cls != "inconclusive", "classification is not inconclusive", drift,
                                c.thresholds.drift_se, cls});
    return rep;
}

// ---------------------------------------------------------------------------------------------
// anti-tightness cascade

// log D_j for j = 0..m, backward from log D_m = log xi_z with D_j = (alpha D_{j+1})^(1/(n-1)).
inline std::vector<double> cascade_log_levels(double log_xi_z, int m, double alpha, double n)
{
    if (m < 0 || !(n > 2.0) || !(alpha > 0.0))
        throw std::invalid_argument("cascade needs m >= 0, n > 2, alpha > 0");
    std::vector<double> ld(m + 1);
    ld[m] = log_xi_z;
    for (int j = m - 1; j >= 0; --j)
        ld[j] = (std::log(alpha) + ld[j + 1]) / (n - 1.0);
    return ld;
}

// log prod_{j<m} D_j / (D_j + 1) = -sum log1p(1/D_j).
inline double cascade_log_bound(const std::vector<double>& log_levels)
{
    double s = 0.0;
    for (std::size_t j = 0; j + 1 < log_levels.size(); ++j)
        s -= std::log1p(std::exp(-log_levels[j]));
    return s;
}

inline double cascade_alpha(double beta, double a_tilde, double n)
{
    return beta / (a_tilde * n * std::pow(2.0, n - 1.0));
}

inline ExperimentReport anti_tightness_cascade(const ExperimentConfig& c)
{
    cfg::allow(c.params, {"mixed", "evaluate_last"}, "params");
    const bool mixed = cfg::flag(c.params, "mixed", c.boundary.left_scale < 0.0);
    const int eval_last = static_cast<int>(cfg::integer(c.params, "evaluate_last", 2));
    const Graph& g = c.graph.graph;
    if (!is_path_graph(g))
        throw ConfigError("the cascade runs on a nearest-neighbour path");
    const Measure& rho = c.measure;
    if (rho.kind() != Measure::Kind::pure_tail || rho.truncated() || rho.shift() != 0.0)
        throw ConfigError("the cascade needs rho = exp(-a|u|^n) du (pure_tail)");
    const double at = rho.inner_terms().at(0).coef, n = rho.tail_exponent();
    if (!(c.beta > 0.0))
        throw ConfigError("the cascade needs beta > 0");
    const double J = g.J(g.origin, g.origin + 1);
    // the proof takes unit couplings; a uniform J rescales beta
    const double alpha = cascade_alpha(c.beta * J, at, n);
    ExperimentReport rep = new_report(c);
    rep.data["alpha"] = alpha;
    rep.data["mixed"] = mixed;
    auto [sg, la] = boundary_logs(c.boundary, g);
    for (int x = 0; x < g.size(); ++x)
        if (!mixed && la[x] > kNegInf && sg[x] < 0)
            throw ConfigError("one-sided cascade needs non-negative boundary values (set params.mixed)");
    std::vector<double> xi(g.size());
    for (int x = 0; x < g.size(); ++x)
        xi[x] = sg[x] * std::exp(la[x]);
    const int o = g.origin;

    struct Level {
        int m = 0;
        bool feasible = true;
        int side = 1;        // +1: cascade towards o+m, -1: towards o-m
        int target = 0;      // vertex whose level is tested
        std::vector<double> logD;
        double log_bound = 0.0, bound = 0.0, factor = 1.0;
        bool derivative_ok = true;
        double p = 0.0, se = 0.0;
        bool evaluated = false;
    };
    std::vector<Level> lv;
    for (int m : c.volumes) {
        Level L;
        L.m = m;
        if (m < 1 || o + m >= g.size() || o - m < 0)
            throw ConfigError("cascade distances must satisfy 1 <= m < path half-length");
        int zp = o + m, zm = o - m;
        double lz = la[zp];
        int steps = m;
        L.target = o;
        if (mixed) {
            // the side whose sign event has probability >= 1/2, then m - 1 steps down to o +- 1
            bool neg = sg[zm] < 0 && la[zm] > la[zp];
            L.side = neg ? -1 : 1;
            lz = neg ? la[zm] : la[zp];
            steps = m - 1;
            L.target = o + L.side;
            L.factor = 0.5;
        }
        if (lz == kNegInf) {
            throw ConfigError("cascade needs xi_z != 0 at distance " + std::to_string(m));
        }
        if (std::max(la[zp], la[zm]) + std::log(J * c.beta) > kLogBudget) {
            L.feasible = false;
            lv.push_back(L);
            continue;
        }
        L.logD = cascade_log_levels(lz, steps, alpha, n);
        L.log_bound = cascade_log_bound(L.logD) + std::log(L.factor);
        L.bound = std::exp(L.log_bound);
        const double kink = 1.0 - std::pow(2.0, 1.0 - n);
        for (int j = 0; j + 1 < static_cast<int>(L.logD.size()); ++j)
            L.derivative_ok = L.derivative_ok && c.beta * J * std::exp(L.logD[j + 1]) * kink >= 1.0;
        lv.push_back(L);
    }
    std::vector<int> feas;
    for (int i = 0; i < static_cast<int>(lv.size()); ++i)
        if (lv[i].feasible)
            feas.push_back(i);
    if (feas.size() < lv.size())
        rep.notes.push_back("largest feasible distance m = " +
                            (feas.empty() ? std::string("none") : std::to_string(lv[feas.back()].m)) +
                            "; larger distances exceed the double range");
    std::vector<int> eval(feas.end() - std::min<std::size_t>(feas.size(), static_cast<std::size_t>(eval_last)),
                          feas.end());
    auto res = parallel_cells<std::pair<double, double>>(static_cast<int>(eval.size()), [&](int k) {
        Level& L = lv[eval[k]];
        Region R = ball_region(g, o, L.m - 1);
        ModelSpec s = make_spec(g, R, c.beta, rho, xi);
        const double thr = std::exp(L.logD[0]);
        const int y = L.target, sd = L.side;
        Observable ob{"cascade_event", [y, sd, thr](const std::vector<double>& p) { return sd * p[y] >= thr ? 1.0 : 0.0; }};
        auto p = pooled_chain(c, s, {ob}, static_cast<std::uint64_t>(eval[k]));
        auto st = batch_means(p.samples[0]);
        return std::make_pair(st.mean, st.stderr_);
    });
    for (std::size_t k = 0; k < eval.size(); ++k) {
        lv[eval[k]].p = res[k].first;
        lv[eval[k]].se = res[k].second;
        lv[eval[k]].evaluated = true;
    }
    // growth of xi_z^((n-1)^-m): bounded means no divergence claim
    std::vector<double> rate;
    json levels = json::array();
    for (auto& L : lv) {
        json e{{"m", L.m}, {"feasible", L.feasible}};
        if (L.feasible) {
            e["side"] = L.side;
            e["log_D"] = L.logD;
            e["D0"] = std::exp(L.logD[0]);
            e["log_bound"] = L.log_bound;
            e["bound"] = L.bound;
            e["derivative_condition"] = L.derivative_ok;
            rate.push_back(L.logD.back() * std::pow(n - 1.0, -L.m));
            if (L.evaluated) {
                e["mc_probability"] = L.p;
                e["mc_se"] = L.se;
            }
        }
        levels.push_back(e);
    }
    rep.data["levels"] = levels;
    bool growing = rate.size() >= 2 && rate.back() > rate.front();
    if (!growing) {
        rep.notes.push_back("xi_z^((n-1)^-m) does not grow over the schedule: D_0 stays bounded, no divergence claim");
        rep.data["divergence_claim"] = false;
    } else {
        rep.data["divergence_claim"] = true;
    }
    for (int i : eval) {
        auto& L = lv[i];
        double stat = L.p - (L.bound - c.thresholds.se_rule * L.se);
        rep.verdicts.push_back({"cascade m=" + std::to_string(L.m), stat >= 0.0,
                                "P[phi >= D_0] >= prod D/(D+1) - se_rule SE", stat, c.thresholds.se_rule,
                                "p=" + std::to_string(L.p) + " se=" + std::to_string(L.se) +
                                    " bound=" + std::to_string(L.bound) +
                                    (L.derivative_ok ? "" : " (derivative condition fails at this size)")});
    }
    if (eval.empty())
        rep.verdicts.push_back({"cascade", false, "at least one feasible distance", 0.0, 1.0, "none feasible"});
    return rep;
}

// ---------------------------------------------------------------------------------------------
// regularity ratio

struct RegularityParams {
    double a = 0.5;
    double alpha0 = 0.0;  // 0: default grid value
    double b_target = 0.5;
    double lambda = 0.0;  // n = 2 only; 0: a / (4 beta M_f)
    double C = 0.0, C_tilde = 0.0;  // > 0 overrides
    double alpha2 = 0.0;
    int bins = 40;
    long long min_count = 100;
};

inline RegularityParams regularity_params(const json& p)
{
    RegularityParams r;
    r.a = cfg::num(p, "a", r.a);
    r.alpha0 = cfg::num(p, "alpha0", r.alpha0);
    r.b_target = cfg::num(p, "b_target", r.b_target);
    r.lambda = cfg::num(p, "lambda", r.lambda);
    r.C = cfg::num(p, "C", r.C);
    r.C_tilde = cfg::num(p, "C_tilde", r.C_tilde);
    r.alpha2 = cfg::num(p, "alpha2", r.alpha2);
    r.bins = static_cast<int>(cfg::integer(p, "bins", r.bins));
    r.min_count = cfg::integer(p, "min_count", r.min_count);
    if (!(r.a > 0.0) || r.bins < 2 || r.min_count < 1)
        throw ConfigError("regularity params need a > 0, bins >= 2, min_count >= 1");
    return r;
}

struct ResolvedConstants {
    double C = 1.0, C_tilde = 0.0, lambda = 1.0, M_f = 0.0;
    bool overridden = false;
    json to_json() const
    {
        return {{"C", C}, {"C_tilde", C_tilde}, {"lambda", lambda}, {"M_f", M_f}, {"overridden", overridden}};
    }
};

inline ResolvedConstants resolve_constants(const Graph& g, const Measure& rho, double beta, double n,
                                           const RegularityParams& rp)
{
    ResolvedConstants k;
    RegularityInputs in;
    in.beta = beta;
    in.a = rp.a;
    in.n = n;
    in.alpha0 = rp.alpha0 > 0.0 ? rp.alpha0 : default_alpha0(rho, rp.a, n);
    in.b_target = rp.b_target;
    in.alpha2_override = rp.alpha2;
    auto rc = regularity_constants(g, rho, in);
    k.C = rc.C;
    k.C_tilde = rc.C_tilde;
    k.M_f = rc.M_f;
    if (rp.C > 0.0) {
        k.C = rp.C;
        k.overridden = true;
    }
    if (rp.C_tilde > 0.0) {
        k.C_tilde = rp.C_tilde;
        k.overridden = true;
    }
    if (n == 2.0) {
        k.lambda = rp.lambda > 0.0 ? rp.lambda : (beta > 0.0 ? rp.a / (4.0 * beta * k.M_f) : 1.0e300);
        if (!(k.lambda >= 1.0))
            throw ConfigError("n = 2 needs lambda = a / (4 beta M_f) >= 1; raise a");
        k.lambda = std::min(k.lambda, 1.0e300);
    }
    return k;
}

inline ExperimentReport regularity_ratio_check(const ExperimentConfig& c)
{
    cfg::allow(c.params, {"a", "alpha0", "b_target", "lambda", "C", "C_tilde", "alpha2", "bins", "min_count", "sites"},
               "params");
    auto rp = regularity_params(c.params);
    const Graph& g = c.graph.graph;
    const Measure& rho = c.measure;
    if (rho.is_atomic())
        throw ConfigError("atomic single-site laws are excluded from the regularity check");
    const double n = rho.tail_exponent() > 2.0 ? rho.tail_exponent() : 2.0;
    if (!rho.tilt_finite(rp.a, n))
        throw ConfigError("rho_a is not finite for the configured a");
    std::vector<int> sites{g.origin};
    if (c.params.contains("sites")) {
        sites.clear();
        for (double v : cfg::reals(c.params.at("sites")))
            sites.push_back(static_cast<int>(v));
    }
    if (sites.empty() || sites.size() > 2)
        throw ConfigError("the regularity check takes |Lambda'| = 1 or 2");
    for (int x : sites)
        if (x < 0 || x >= g.size())
            throw ConfigError("site out of range");
    ExperimentReport rep = new_report(c);
    auto k = resolve_constants(g, rho, c.beta, n, rp);
    rep.data["constants"] = k.to_json();
    if (k.overridden)
        rep.notes.push_back("constants overridden by config");
    Density half(rho.tilted(rp.a / 2.0, n));
    auto [sg, la] = boundary_logs(c.boundary, g);
    std::vector<double> xi(g.size());
    for (int x = 0; x < g.size(); ++x)
        xi[x] = sg[x] * std::exp(la[x]);

    struct Row {
        int radius = 0;
        bool feasible = true;
        std::vector<double> logA;
        double log_weight = 0.0;  // sum_x C~ A_x^n
        int kept = 0, dropped = 0;
        double worst = -1e300;    // max over kept bins of (p - bound) / se
        bool pass = true;
        double sup_ratio = 0.0, sup_ratio_se = 0.0;
        json bins = json::array();
    };
    const int nv = static_cast<int>(c.volumes.size());
    auto rows = parallel_cells<Row>(nv, [&](int i) {
        Row row;
        row.radius = c.volumes[i];
        Region L = volume(c, row.radius);
        for (int x : sites)
            if (!L.in[x])
                throw ConfigError("Lambda' must lie inside every volume");
        if (exterior_log_max(g, L, la) > kLogBudget) {
            row.feasible = false;
            return row;
        }
        auto prof = compute_A(g, L, la, sg, k.C, n, k.lambda);
        for (int x : sites) {
            row.logA.push_back(prof.logA[x]);
            row.log_weight += k.C_tilde * std::exp(n * prof.logA[x]);
        }
        ModelSpec s = make_spec(g, L, c.beta, rho, xi);
        std::vector<Observable> obs;
        for (int x : sites)
            obs.push_back(obs_site(x));
        auto p = pooled_chain(c, s, obs, static_cast<std::uint64_t>(i));
        const std::size_t N = p.samples[0].size();
        double tau = 1.0;
        for (auto& xs : p.samples)
            tau = std::max(tau, batch_means(xs).tau);
        // equal-width bins per axis over the sampled range
        const int B = rp.bins;
        std::vector<double> lo, w;
        for (auto& xs : p.samples) {
            auto [mn, mx] = std::minmax_element(xs.begin(), xs.end());
            double span = std::max(*mx - *mn, 1e-12);
            lo.push_back(*mn);
            w.push_back(span / B * (1.0 + 1e-12));
        }
        const int D = static_cast<int>(sites.size());
        std::vector<long long> counts(D == 1 ? B : B * B, 0);
        for (std::size_t t = 0; t < N; ++t) {
            int idx = 0;
            for (int d = D - 1; d >= 0; --d) {
                int b = std::clamp(static_cast<int>((p.samples[d][t] - lo[d]) / w[d]), 0, B - 1);
                idx = idx * B + b;
            }
            counts[idx]++;
        }
        for (std::size_t idx = 0; idx < counts.size(); ++idx) {
            if (counts[idx] < rp.min_count) {
                if (counts[idx] > 0)
                    ++row.dropped;
                continue;
            }
            ++row.kept;
            double log_mass = row.log_weight;
            std::vector<double> edges;
            for (int d = 0, r = static_cast<int>(idx); d < D; ++d, r /= B) {
                double a0 = lo[d] + w[d] * (r % B), a1 = a0 + w[d];
                log_mass += half.log_mass(a0, a1) - half.log_normalization();
                edges.push_back(a0);
                edges.push_back(a1);
            }
            const double ph = static_cast<double>(counts[idx]) / N;
            const double se = std::sqrt(ph * (1.0 - ph) * tau / N);
            const double bound = std::exp(std::min(log_mass, 700.0));
            double z = se > 0.0 ? (ph - bound) / se : (ph > bound ? 1e300 : -1e300);
            row.worst = std::max(row.worst, z);
            if (ph > bound + c.thresholds.se_rule * se)
                row.pass = false;
            double ratio = std::exp(std::log(ph) - log_mass), ratio_se = ph > 0.0 ? ratio * se / ph : 0.0;
            if (ratio > row.sup_ratio) {
                row.sup_ratio = ratio;
                row.sup_ratio_se = ratio_se;
            }
            row.bins.push_back({{"edges", edges}, {"count", counts[idx]}, {"log_bound_mass", log_mass}});
        }
        return row;
    });
    json vols = json::array();
    bool all_ok = true;
    double worst = -1e300;
    std::vector<const Row*> ok;
    for (auto& r : rows) {
        if (!r.feasible) {
            rep.notes.push_back("radius " + std::to_string(r.radius) + " skipped: boundary outside the double range");
            vols.push_back({{"radius", r.radius}, {"feasible", false}});
            continue;
        }
        if (r.dropped > 0)
            rep.notes.push_back("radius " + std::to_string(r.radius) + ": dropped " + std::to_string(r.dropped) +
                                " bins with fewer than " + std::to_string(rp.min_count) + " counts");
        all_ok = all_ok && r.pass && r.kept > 0;
        worst = std::max(worst, r.worst);
        ok.push_back(&r);
        vols.push_back({{"radius", r.radius},
                        {"feasible", true},
                        {"logA", r.logA},
                        {"log_weight", r.log_weight},
                        {"kept_bins", r.kept},
                        {"dropped_bins", r.dropped},
                        {"sup_ratio", r.sup_ratio},
                        {"sup_ratio_se", r.sup_ratio_se},
                        {"bins", r.bins}});
    }
    rep.data["volumes"] = vols;
    rep.verdicts.push_back({"histogram below bound", all_ok && !ok.empty(),
                            "every kept bin: empirical mass <= bound mass + se_rule SE (max z reported)", worst,
                            c.thresholds.se_rule, ""});
    double trend = -1e300;
    bool mono = true;
    for (std::size_t i = 0; i + 1 < ok.size(); ++i) {
        double se = std::hypot(ok[i]->sup_ratio_se, ok[i + 1]->sup_ratio_se);
        double z = se > 0.0 ? (ok[i + 1]->sup_ratio - ok[i]->sup_ratio) / se : 0.0;
        trend = std::max(trend, z);
        mono = mono && ok[i + 1]->sup_ratio <= ok[i]->sup_ratio + c.thresholds.se_rule * se;
    }
    rep.verdicts.push_back({"sup-bin ratio non-increasing", mono,
                            "sup ratio at the next volume <= current + se_rule pooled SE", ok.size() > 1 ? trend : 0.0,
                            c.thresholds.se_rule, ""});
    return rep;
}

// ---------------------------------------------------------------------------------------------
// domination suite

// B_x = sqrt((2/a)(C~ A_x^2 + log rho_a(R) - log rho_{a/2}(R))), n = 2 constants.
inline std::vector<double> domination_shifts(const Graph& g, const Region& L, const std::vector<double>& la,
                                             const std::vector<int>& sg, const Measure& rho, double a,
                                             const ResolvedConstants& k, const std::vector<int>& sites)
{
    auto prof = compute_A(g, L, la, sg, k.C, 2.0, k.lambda);
    std::vector<double> B;
    for (int x : sites)
        B.push_back(zeta_shift_at(rho, a, k.C_tilde, std::exp(prof.logA[x])));
    return B;
}

inline ExperimentReport domination_suite(const ExperimentConfig& c)
{
    cfg::allow(c.params,
               {"a", "alpha0", "b_target", "lambda", "C", "C_tilde", "alpha2", "xi_shift", "J_factor", "u_grid",
                "sites"},
               "params");
    auto rp = regularity_params(c.params);
    const Graph& g = c.graph.graph;
    const Measure& rho = c.measure;
    if (!g.ferromagnetic())
        throw ConfigError("the domination suite needs ferromagnetic couplings");
    const double xi_shift = cfg::num(c.params, "xi_shift", 1.0);
    const double J_factor = cfg::num(c.params, "J_factor", 2.0);
    if (!(xi_shift >= 0.0) || !(J_factor >= 1.0))
        throw ConfigError("domination needs xi_shift >= 0 and J_factor >= 1");
    std::vector<double> grid{0.0, 0.5, 1.0, 1.5, 2.0};
    if (c.params.contains("u_grid"))
        grid = cfg::reals(c.params.at("u_grid"));
    std::vector<int> sites{g.origin};
    if (c.params.contains("sites")) {
        sites.clear();
        for (double v : cfg::reals(c.params.at("sites")))
            sites.push_back(static_cast<int>(v));
    }
    ExperimentReport rep = new_report(c);
    auto [sg, la] = boundary_logs(c.boundary, g);
    std::vector<double> xi(g.size()), xi2(g.size());
    bool nonneg = true;
    for (int x = 0; x < g.size(); ++x) {
        xi[x] = sg[x] * std::exp(la[x]);
        xi2[x] = xi[x] + xi_shift;
        nonneg = nonneg && xi[x] >= 0.0;
    }
    const Region L = volume(c, c.volumes.back());
    for (int x : sites)
        if (x < 0 || x >= g.size() || !L.in[x])
            throw ConfigError("domination sites must lie in the largest volume");
    if (exterior_log_max(g, L, la) > kLogBudget)
        throw ConfigError("boundary values exceed the double range on the largest volume");
    const double alpha = c.thresholds.dkw_alpha;
    const int o = sites.front();

    // (a) xi <= xi' pathwise; (b) xi' = xi identical laws; (c) J <= J' distributional; (d) zeta domination
    ModelSpec base = make_spec(g, L, c.beta, rho, xi);
    ModelSpec up = make_spec(g, L, c.beta, rho, xi2);
    Graph gJ = scale_couplings(g, J_factor);
    ModelSpec strong = make_spec(gJ, L, c.beta, rho, xi);

    struct Cell {
        std::vector<std::vector<double>> a, b;
        long long violations = 0;
    };
    auto cells = parallel_cells<Cell>(4, [&](int k) {
        Cell cell;
        std::vector<Observable> obs;
        for (int x : sites)
            obs.push_back(obs_site(x));
        if (k == 0) {
            auto r = coupled_run(base, up, chain_options(c, 0), obs);
            cell.violations = r.order_violations + r.interior_violations;
            for (auto& ob : r.low.observables)
                cell.a.push_back(ob.samples);
            for (auto& ob : r.high.observables)
                cell.b.push_back(ob.samples);
        } else if (k == 1) {
            cell.a = pooled_chain(c, base, obs, 1).samples;
        } else if (k == 2) {
            cell.a = pooled_chain(c, base, obs, 2).samples;
        } else {
            cell.a = pooled_chain(c, strong, obs, 3).samples;
        }
        return cell;
    });
    const auto& base_s = cells[1].a;
    // (a)
    rep.verdicts.push_back({"xi-ordered coupling", cells[0].violations == 0,
                            "pathwise phi <= phi' at every update (count)", static_cast<double>(cells[0].violations), 0.0,
                            "xi' = xi + " + std::to_string(xi_shift)});
    // (b) identical laws from independent streams: two-sided KS within the band
    {
        const auto& x1 = cells[1].a[0];
        const auto& x2 = cells[2].a[0];
        double na = effective_n(x1), nb = effective_n(x2);
        double d = std::max(one_sided_ks(x1, x2), one_sided_ks(x2, x1));
        double eps = one_sided_ks_critical(static_cast<long long>(na), static_cast<long long>(nb), alpha / 2.0);
        rep.verdicts.push_back({"identical boundary", d <= eps, "two-sample sup |F - F'| <= band (effective sizes)", d,
                                eps, ""});
    }
    // (c) J <= J': P'[phi_x >= u] >= P[phi_x >= u] - band on the grid
    if (!nonneg || !rho.even()) {
        rep.notes.push_back("J-monotonicity skipped: needs xi >= 0 and even rho");
    } else {
        double worst = -1e300;
        double eps = 0.0;
        json rows = json::array();
        for (std::size_t s = 0; s < sites.size(); ++s) {
            const auto& x1 = base_s[s];
            const auto& x2 = cells[3].a[s];
            eps = one_sided_ks_critical(static_cast<long long>(effective_n(x1)), static_cast<long long>(effective_n(x2)),
                                        alpha);
            for (double u : grid) {
                if (u < 0.0)
                    continue;
                double p1 = tail_probability(x1, u).first, p2 = tail_probability(x2, u).first;
                worst = std::max(worst, p1 - p2);
                rows.push_back({{"site", sites[s]}, {"u", u}, {"P_J", p1}, {"P_J_prime", p2}});
            }
        }
        rep.data["J_monotonicity"] = rows;
        rep.verdicts.push_back({"J-ordered tails", worst <= eps,
                                "max_u (P_J[phi >= u] - P_J'[phi >= u]) <= one-sided band", worst, eps,
                                "J' = " + std::to_string(J_factor) + " J"});
    }
    // (d) zeta domination at the n = 2 constants
    {
        if (!rho.tilt_finite(rp.a, 2.0))
            throw ConfigError("rho_a (n = 2 tilt) is not finite; lower a");
        if (c.beta > 0.0) {
            double Mf = validate_interactions(g, 2.0).M_f_certified;
            if (rp.a < 4.0 * c.beta * Mf)
                throw ConfigError("zeta domination needs a >= 4 beta M_f");
        }
        auto k = resolve_constants(g, rho, c.beta, 2.0, rp);
        rep.data["constants"] = k.to_json();
        auto B = domination_shifts(g, L, la, sg, rho, rp.a, k, sites);
        double worst = -1e300, eps = 0.0;
        json rows = json::array();
        for (std::size_t s = 0; s < sites.size(); ++s) {
            Measure z = shift_truncate(rho, rp.a, 2.0, B[s]);
            Density dz(z);
            const auto& xs = base_s[s];
            double d = excess_over_cdf(xs, [&](double u) { return u < B[s] ? 0.0 : dz.cdf(u); });
            eps = dkw_epsilon(static_cast<long long>(effective_n(xs)), alpha);
            worst = std::max(worst, d);
            json q = json::array();
            for (double lvl : {0.5, 0.9, 0.99})
                q.push_back({{"level", lvl}, {"nu", empirical_quantile(xs, lvl)}, {"zeta", dz.quantile(lvl)}});
            rows.push_back({{"site", sites[s]}, {"B", B[s]}, {"quantiles", q}});
        }
        rep.data["zeta_domination"] = rows;
        rep.verdicts.push_back({"zeta domination", worst <= eps, "sup_u (F_zeta(u) - F_nu(u)) <= DKW band", worst, eps,
                                ""});
    }
    rep.data["sites"] = sites;
    rep.data["radius"] = c.volumes.back();
    (void)o;
    return rep;
}

// ---------------------------------------------------------------------------------------------
// plus-measure constructions

struct PlusParams {
    double a = 0.0;          // 0: a = 8 beta D, floored at a_min
    double a_min = 0.5;
    double B = 0.0;          // > 0 overrides the shift
    double event_u = 1.0;
    int r_threshold = 1;
    double beta_factor = 1.5;
    RegularityParams reg;
};

inline double plus_tilt(const Graph& g, double beta, const PlusParams& pp)
{
    if (pp.a > 0.0)
        return pp.a;
    return std::max(8.0 * beta * g.max_degree(), pp.a_min);
}

inline ExperimentReport plus_measure_suite(const ExperimentConfig& c)
{
    cfg::allow(c.params,
               {"a", "a_min", "B", "event_u", "r_threshold", "beta_factor", "alpha0", "b_target", "C", "C_tilde",
                "alpha2"},
               "params");
    PlusParams pp;
    pp.a = cfg::num(c.params, "a", 0.0);
    pp.a_min = cfg::num(c.params, "a_min", pp.a_min);
    pp.B = cfg::num(c.params, "B", 0.0);
    pp.event_u = cfg::num(c.params, "event_u", pp.event_u);
    pp.r_threshold = static_cast<int>(cfg::integer(c.params, "r_threshold", pp.r_threshold));
    pp.beta_factor = cfg::num(c.params, "beta_factor", pp.beta_factor);
    const Graph& g = c.graph.graph;
    const Measure& rho = c.measure;
    if (!g.nearest_neighbour || !g.ferromagnetic())
        throw ConfigError("plus-measure constructions need ferromagnetic nearest-neighbour couplings");
    if (!rho.even())
        throw ConfigError("plus-measure constructions need an even rho");
    if (!(pp.beta_factor > 1.0))
        throw ConfigError("beta_factor must exceed 1");
    ExperimentReport rep = new_report(c);
    rep.notes.push_back("extremality among regular Gibbs measures cannot be certified in finite volume; only the "
                        "monotone and domination consequences are tested");
    const double a = plus_tilt(g, c.beta, pp);
    if (pp.a == 0.0 && 8.0 * c.beta * g.max_degree() < pp.a_min)
        rep.notes.push_back("a = 8 beta D is below a_min; using a_min");
    if (!rho.tilt_finite(a, 2.0))
        throw ConfigError("rho_a with a = 8 beta D is not finite");
    double B = pp.B;
    json consts;
    if (!(B > 0.0)) {
        RegularityParams rp;
        rp.a = a;
        rp.alpha0 = cfg::num(c.params, "alpha0", 0.0);
        rp.b_target = cfg::num(c.params, "b_target", 0.5);
        rp.C = cfg::num(c.params, "C", 0.0);
        rp.C_tilde = cfg::num(c.params, "C_tilde", 0.0);
        rp.alpha2 = cfg::num(c.params, "alpha2", 0.0);
        rp.lambda = 1.0;
        auto k = resolve_constants(g, rho, c.beta, 2.0, rp);
        consts = k.to_json();
        B = plus_zeta_shift(rho, a, k.C_tilde);
    }
    rep.data["a"] = a;
    rep.data["B"] = B;
    rep.data["constants"] = consts;
    const int o = g.origin;
    const int nv = static_cast<int>(c.volumes.size());
    if (nv < 2)
        throw ConfigError("plus-measure suite needs at least two volumes");
    for (int r : c.volumes)
        if (r < 1)
            throw ConfigError("plus-measure volumes need radius >= 1 so that the interior is non-empty");
    // volume pairs whose boundary distance exceeds the r-threshold
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < nv; ++i)
        for (int k = i + 1; k < nv; ++k)
            if (c.volumes[k] - c.volumes[i] > pp.r_threshold)
                pairs.emplace_back(i, k);
    if (pairs.empty())
        throw ConfigError("volume schedule too shallow for the r-threshold");
    auto xi_plus = BoundaryField::xi_plus().values_on(g);

    // cells: (volume, construction) with construction 0 = xi+, 1 = rho~, 2 = random b.c., 3 = rho~ at beta'
    struct Cell {
        std::vector<std::vector<double>> s;
        long long violations = 0, interior = 0;
    };
    auto cells = parallel_cells<Cell>(nv * 3 + 1, [&](int id) {
        Cell cell;
        if (id == nv * 3) {
            Region L = volume(c, c.volumes.back());
            ModelSpec lo = rho_tilde_spec(g, L, c.beta, rho, a, B);
            ModelSpec hi = rho_tilde_spec(g, L, c.beta * pp.beta_factor, rho, a, B);
            auto bd = boundary_of(g, L).vertices();
            std::vector<Observable> obs;
            for (int x : bd)
                obs.push_back(obs_site(x));
            auto r = coupled_run(lo, hi, chain_options(c, 9000), obs, bd);
            cell.violations = r.order_violations;
            cell.interior = r.interior_violations;
            for (std::size_t k = 0; k < obs.size(); ++k) {
                cell.s.push_back(r.low.observables[k].samples);
                cell.s.push_back(r.high.observables[k].samples);
            }
            return cell;
        }
        const int vi = id / 3, kind = id % 3;
        Region L = volume(c, c.volumes[vi]);
        std::vector<Observable> obs{obs_site(o)};
        if (kind == 0) {
            // F^c indicators for every smaller volume of the schedule
            for (int w = 0; w < vi; ++w) {
                Region Lp = volume(c, c.volumes[w]);
                std::vector<int> shell;
                for (int x = 0; x < g.size(); ++x)
                    if (L.in[x] && !Lp.in[x])
                        shell.push_back(x);
                obs.push_back({"Fc_" + std::to_string(w), [shell, &xi_plus](const std::vector<double>& p) {
                                   for (int x : shell)
                                       if (std::fabs(p[x]) > xi_plus[x])
                                           return 1.0;
                                   return 0.0;
                               }});
            }
            ModelSpec s = make_spec(g, L, c.beta, rho, xi_plus);
            cell.s = pooled_chain(c, s, obs, static_cast<std::uint64_t>(id)).samples;
        } else if (kind == 1) {
            ModelSpec s = rho_tilde_spec(g, L, c.beta, rho, a, B);
            cell.s = pooled_chain(c, s, obs, static_cast<std::uint64_t>(id)).samples;
        } else {
            auto rb = random_bc_spec(g, L, c.beta, rho, a, std::vector<double>(g.size(), B));
            RandomBCOptions ro;
            ro.outer_draws = c.budget.outer_draws;
            ro.chain = chain_options(c, static_cast<std::uint64_t>(id));
            // the total budget is split over the boundary draws
            ro.chain.sweeps = std::max<long long>(c.budget.burn_in + 10,
                                                  c.budget.burn_in + (c.budget.sweeps - c.budget.burn_in) *
                                                                         c.budget.replicas / c.budget.outer_draws);
            auto cs = sample_random_bc(rb, ro, obs);
            for (auto& ob : cs.observables)
                cell.s.push_back(ob.samples);
        }
        return cell;
    });

    json vols = json::array();
    const char* names[3] = {"xi_plus", "rho_tilde", "random_bc"};
    std::vector<std::array<SeriesStats, 3>> means(nv);
    for (int vi = 0; vi < nv; ++vi) {
        json e{{"radius", c.volumes[vi]}};
        for (int k = 0; k < 3; ++k) {
            const auto& xs = cells[vi * 3 + k].s[0];
            means[vi][k] = batch_means(xs);
            auto tp = tail_probability(xs, pp.event_u);
            e[names[k]] = {{"mean_phi_o", means[vi][k].mean},
                           {"se", means[vi][k].stderr_},
                           {"P_event", tp.first},
                           {"P_event_se", tp.second},
                           {"ess", means[vi][k].ess}};
        }
        vols.push_back(e);
    }
    // (1) agreement at the largest volume
    {
        double worst = 0.0;
        for (int p = 0; p < 3; ++p)
            for (int q = p + 1; q < 3; ++q) {
                auto& A = means[nv - 1][p];
                auto& Bq = means[nv - 1][q];
                double se = std::hypot(A.stderr_, Bq.stderr_);
                worst = std::max(worst, se > 0.0 ? std::fabs(A.mean - Bq.mean) / se : 0.0);
            }
        rep.verdicts.push_back({"constructions agree", worst <= c.thresholds.se_rule,
                                "max pairwise |<phi_o>_p - <phi_o>_q| / pooled SE at the largest volume", worst,
                                c.thresholds.se_rule, ""});
    }
    // (2) random-b.c. increasing event non-increasing in volume, one-sided
    {
        double worst = -1e300, eps_used = 0.0;
        json rows = json::array();
        bool ok = true;
        for (auto [i, k] : pairs) {
            const auto& xs = cells[i * 3 + 2].s[0];
            const auto& ys = cells[k * 3 + 2].s[0];
            double pi = tail_probability(xs, pp.event_u).first, pk = tail_probability(ys, pp.event_u).first;
            double eps = one_sided_ks_critical(static_cast<long long>(effective_n(xs)),
                                               static_cast<long long>(effective_n(ys)), c.thresholds.dkw_alpha);
            double d = pk - pi;
            if (d - eps > worst - eps_used) {
                worst = d;
                eps_used = eps;
            }
            ok = ok && d <= eps;
            rows.push_back({{"small", c.volumes[i]}, {"large", c.volumes[k]}, {"P_small", pi}, {"P_large", pk},
                            {"band", eps}});
        }
        rep.data["volume_monotonicity"] = rows;
        rep.verdicts.push_back({"random b.c. volume monotone", ok,
                                "P_large[phi_o >= u] - P_small[phi_o >= u] <= one-sided band, gap > r_threshold", worst,
                                eps_used, "u = " + std::to_string(pp.event_u)});
    }
    // (3) beta monotonicity of rho~ on the boundary of the largest volume, distributional and one-sided
    {
        const Cell& bc = cells[nv * 3];
        double worst = -1e300, eps = 0.0;
        for (std::size_t k = 0; k + 1 < bc.s.size(); k += 2) {
            double d = one_sided_ks(bc.s[k + 1], bc.s[k]);  // sup (F_beta' - F_beta) > 0 contradicts
            double e = one_sided_ks_critical(static_cast<long long>(effective_n(bc.s[k])),
                                             static_cast<long long>(effective_n(bc.s[k + 1])), c.thresholds.dkw_alpha);
            if (d - e > worst - eps) {
                worst = d;
                eps = e;
            }
        }
        rep.data["beta_coupling"] = {{"beta", c.beta},
                                     {"beta_prime", c.beta * pp.beta_factor},
                                     {"boundary_order_violations", bc.violations},
                                     {"interior_order_violations", bc.interior}};
        rep.verdicts.push_back({"rho-tilde beta monotone on boundary", worst <= eps,
                                "sup_u (F_beta'(u) - F_beta(u)) <= one-sided band per boundary vertex", worst, eps, ""});
    }
    // (4) P[F^c] non-increasing in Lambda' for every Lambda of the schedule
    {
        json rows = json::array();
        bool ok = true;
        for (int vi = 1; vi < nv; ++vi) {
            const auto& s = cells[vi * 3].s;
            double prev = 2.0;
            json e{{"radius", c.volumes[vi]}};
            json pr = json::array();
            for (int w = 0; w < vi; ++w) {
                double p = batch_means(s[w + 1]).mean;
                ok = ok && p <= prev;
                prev = p;
                pr.push_back({{"inner_radius", c.volumes[w]}, {"P_Fc", p}});
            }
            e["P_Fc"] = pr;
            rows.push_back(e);
        }
        rep.data["F_complement"] = rows;
        rep.verdicts.push_back({"P[F^c] decreasing in Lambda'", ok, "P[F^c_{Lambda,Lambda'}] non-increasing in Lambda'",
                                0.0, 0.0, ""});
    }
    rep.data["volumes"] = vols;
    return rep;
}

// ---------------------------------------------------------------------------------------------
// dispatch

inline ExperimentReport run_experiment(const ExperimentConfig& c)
{
    if (c.name == "tightness_scan")
        return tightness_scan(c);
    if (c.name == "anti_tightness_cascade")
        return anti_tightness_cascade(c);
    if (c.name == "regularity_ratio_check")
        return regularity_ratio_check(c);
    if (c.name == "domination_suite")
        return domination_suite(c);
    if (c.name == "plus_measure_suite")
        return plus_measure_suite(c);
    throw ConfigError("unknown experiment '" + c.name + "'");
}

inline void write_json(const std::string& path, const json& j)
{
    auto p = std::filesystem::path(path);
    if (p.has_parent_path())
        std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

struct RunAllResult {
    json summary;
    int exit_code = 0;
};

// Manifest: {"configs": [paths relative to the manifest], "output_dir": "..."}.
inline RunAllResult run_all(const std::string& manifest_path, const std::string& out_dir_override = "")
{
    RunAllResult res;
    res.summary = {{"manifest", manifest_path}, {"experiments", json::array()}};
    json m;
    try {
        std::ifstream in(manifest_path);
        if (!in)
            throw ConfigError("cannot open manifest");
        m = json::parse(in);
        cfg::allow(m, {"configs", "output_dir"}, "manifest");
        if (m.contains("configs") && !m.at("configs").is_array())
            throw ConfigError("manifest configs must be an array");
    } catch (const std::exception& e) {
        res.summary["error"] = e.what();
        res.exit_code = 2;
        return res;
    }
    const auto base = std::filesystem::path(manifest_path).parent_path();
    std::string out_dir = out_dir_override;
    if (out_dir.empty() && m.contains("output_dir") && m.at("output_dir").is_string())
        out_dir = (base / m.at("output_dir").get<std::string>()).string();
    bool all_ok = true;
    if (m.contains("configs")) {
        for (auto& entry : m.at("configs")) {
            json row;
            std::string path = entry.is_string() ? (base / entry.get<std::string>()).string() : "";
            row["config"] = path;
            try {
                if (path.empty())
                    throw ConfigError("manifest entries must be strings");
                auto c = load_config(path);
                auto rep = run_experiment(c);
                row["experiment"] = c.name;
                row["passed"] = rep.passed();
                json vs = json::array();
                for (auto& v : rep.verdicts)
                    vs.push_back({{"name", v.name}, {"pass", v.pass}});
                row["verdicts"] = vs;
                if (!out_dir.empty()) {
                    std::string rp = (std::filesystem::path(out_dir) /
                                      (std::filesystem::path(path).stem().string() + ".report.json"))
                                         .string();
                    write_json(rp, rep.to_json());
                    row["report"] = rp;
                }
                all_ok = all_ok && rep.passed();
            } catch (const ConfigError& e) {
                row["passed"] = false;
                row["error"] = std::string("config: ") + e.what();
                all_ok = false;
            } catch (const std::exception& e) {
                row["passed"] = false;
                row["error"] = e.what();
                all_ok = false;
            }
            res.summary["experiments"].push_back(row);
        }
    }
    res.summary["passed"] = all_ok;
    if (!out_dir.empty())
        write_json((std::filesystem::path(out_dir) / "summary.json").string(), res.summary);
    res.exit_code = all_ok ? 0 : 1;
    return res;
}

}  // namespace gibbs
