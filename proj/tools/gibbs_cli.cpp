#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gibbs/experiments.hpp"

using namespace gibbs;

namespace {

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep))
        out.push_back(item);
    return out;
}

double to_real(const std::string& s)
{
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw ConfigError("not a number: '" + s + "'");
    }
    if (used != s.size())
        throw ConfigError("not a number: '" + s + "'");
    return v;
}

int to_int(const std::string& s)
{
    double v = to_real(s);
    if (v != static_cast<int>(v))
        throw ConfigError("not an integer: '" + s + "'");
    return static_cast<int>(v);
}

// path:L, box:d:L, tree:degree:depth, random:n:extra:seed, or an edge-list file
GraphSpec parse_graph(const std::string& spec)
{
    auto p = split(spec, ':');
    json j;
    if (p[0] == "path" && p.size() == 2)
        j = {{"kind", "path"}, {"L", to_int(p[1])}};
    else if (p[0] == "box" && p.size() == 3)
        j = {{"kind", "box"}, {"d", to_int(p[1])}, {"L", to_int(p[2])}};
    else if (p[0] == "tree" && p.size() == 3)
        j = {{"kind", "tree"}, {"degree", to_int(p[1])}, {"depth", to_int(p[2])}};
    else if (p[0] == "random" && p.size() == 4)
        j = {{"kind", "random"}, {"n", to_int(p[1])}, {"extra", to_int(p[2])}, {"seed", to_int(p[3])}};
    else
        j = {{"kind", "edge_list"}, {"file", spec}};
    return graph_from_json(j);
}

// all, ball:r, list:x,y,...
Region parse_region(const Graph& g, const std::string& spec)
{
    auto p = split(spec, ':');
    if (p[0] == "all")
        return Region::all(g.size());
    if (p[0] == "ball" && p.size() == 2)
        return ball_region(g, g.origin, to_int(p[1]));
    if (p[0] == "list" && p.size() == 2) {
        std::vector<int> v;
        for (auto& t : split(p[1], ',')) {
            int x = to_int(t);
            if (x < 0 || x >= g.size())
                throw ConfigError("region vertex out of range");
            v.push_back(x);
        }
        return Region::of(g.size(), v);
    }
    throw ConfigError("region must be all, ball:<r> or list:<x,y,...>");
}

// family:params in the order of the boundary config keys
BoundaryField parse_xi(const std::string& spec)
{
    auto p = split(spec, ':');
    const std::string& f = p[0];
    std::vector<double> v;
    for (std::size_t i = 1; i < p.size(); ++i)
        v.push_back(to_real(p[i]));
    auto want = [&](std::size_t lo, std::size_t hi) {
        if (v.size() < lo || v.size() > hi)
            throw ConfigError("wrong parameter count for xi family " + f);
    };
    if (f == "constant") {
        want(1, 1);
        return BoundaryField::constant(v[0]);
    }
    if (f == "double_exponential") {
        want(2, 3);
        return BoundaryField::double_exponential(v[0], v[1], v.size() > 2 ? v[2] : 1.0);
    }
    if (f == "exponential") {
        want(2, 2);
        return BoundaryField::exponential(v[0], v[1]);
    }
    if (f == "kernel_growth") {
        want(2, 2);
        return BoundaryField::kernel_growth(v[0], v[1]);
    }
    if (f == "xi_plus") {
        want(0, 0);
        return BoundaryField::xi_plus();
    }
    if (f == "xi_minus") {
        want(0, 0);
        return BoundaryField::xi_minus();
    }
    if (f == "table")
        return BoundaryField::table(v);
    throw ConfigError("unknown xi family '" + f + "'");
}

std::string real(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_out(const std::string& path)
{
    auto p = std::filesystem::path(path);
    if (p.has_parent_path())
        std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    return out;
}

int analyze_bc(const std::string& graph, const std::string& region, const std::string& xi, double C, double n,
               double lambda, const std::string& out_path)
{
    auto gs = parse_graph(graph);
    const Graph& g = gs.graph;
    Region R = parse_region(g, region);
    BoundaryField f = parse_xi(xi);
    auto A = compute_A(g, R, f, C, n, lambda);
    auto At = compute_A_tilde(g, R, f, C, n, lambda);
    auto out = open_out(out_path);
    out << "vertex,logA,logAtilde\n";
    for (int x : R.vertices())
        out << x << "," << real(A.logA[x]) << "," << real(At.logA[x]) << "\n";
    if (At.divergence_flag)
        std::cerr << "note: A~ depends on the truncation shell (xi may lie outside Xi)\n";
    return 0;
}

int sample(const std::string& config, std::uint64_t seed, long long sweeps, long long burn_in,
           const std::string& out_path)
{
    auto c = load_config(config, false);
    auto obs = observables_from_json(c);
    auto xi = boundary_values(c.boundary, c.graph.graph);
    Region L = volume(c, c.volumes.back());
    ModelSpec s = make_spec(c.graph.graph, L, c.beta, c.measure, xi);
    ChainOptions o;
    o.sweeps = sweeps;
    o.burn_in = burn_in;
    o.thinning = c.budget.thinning;
    o.seed = seed;
    if (!(sweeps > burn_in) || burn_in < 0)
        throw ConfigError("need sweeps > burn-in >= 0");
    auto st = run_chain(s, o, obs);
    json j;
    j["seed"] = seed;
    j["sweeps"] = sweeps;
    j["burn_in"] = burn_in;
    j["radius"] = c.volumes.back();
    json ob = json::object();
    for (auto& os : st.observables)
        ob[os.name] = {{"mean", os.stats.mean},
                       {"stderr", os.stats.stderr_},
                       {"ess", os.stats.ess},
                       {"histogram", {{"edges", os.histogram.edges}, {"counts", os.histogram.counts}}}};
    j["observables"] = ob;
    write_json(out_path, j);
    return 0;
}

int explore(const std::string& config, long long runs, const std::string& out_path)
{
    auto c = load_config(config, false);
    cfg::allow(c.params, {"a", "n", "C", "alpha0", "b_target", "seeds"}, "params");
    const Graph& g = c.graph.graph;
    const double a = cfg::num(c.params, "a", 0.5);
    const double n = cfg::num(c.params, "n", std::max(2.0, c.measure.tail_exponent()));
    double C = cfg::num(c.params, "C", 0.0);
    if (!(C > 0.0)) {
        RegularityInputs in;
        in.beta = c.beta;
        in.a = a;
        in.n = n;
        in.alpha0 = cfg::num(c.params, "alpha0", default_alpha0(c.measure, a, n));
        in.b_target = cfg::num(c.params, "b_target", 0.5);
        C = regularity_constants(g, c.measure, in).C;
    }
    std::vector<int> seeds{g.origin};
    if (c.params.contains("seeds")) {
        seeds.clear();
        for (double v : cfg::reals(c.params.at("seeds")))
            seeds.push_back(static_cast<int>(v));
    }
    Region L = volume(c, c.volumes.back());
    for (int x : seeds)
        if (x < 0 || x >= g.size() || !L.in[x])
            throw ConfigError("exploration seeds must lie in the volume");
    auto pm = p_matrix(g, c.measure, a, n, C);
    Rng rng(c.seed);
    auto out = open_out(out_path);
    out << "run,|W|,generations\n";
    std::vector<char> scratch;
    for (long long r = 0; r < runs; ++r) {
        auto tr = simulate_exploration(g, L, seeds, pm, rng, &scratch);
        out << r << "," << tr.total << "," << tr.generations() << "\n";
    }
    std::cerr << "C = " << real(C) << ", b = " << real(pm.b) << "\n";
    return 0;
}

int progeny(double b, int k, int nmax, const std::string& out_path)
{
    OffspringLaw X(b);
    auto p = progeny_pmf(X, k, nmax);
    auto out = open_out(out_path);
    out << "n,pmf\n";
    for (int m = k; m <= nmax; ++m)
        out << m << "," << real(p.pmf[m]) << "\n";
    std::cerr << "residual mass " << real(p.residual) << ", truncation error " << real(p.truncation_error) << "\n";
    return 0;
}

int experiment(const std::string& name, const std::string& config, const std::string& out_override)
{
    auto c = load_config(config);
    if (c.name != name)
        throw ConfigError("config describes '" + c.name + "', not '" + name + "'");
    auto rep = run_experiment(c);
    std::string out = out_override.empty() ? c.output : out_override;
    if (out.empty())
        out = std::filesystem::path(config).stem().string() + ".report.json";
    write_json(out, rep.to_json());
    for (auto& v : rep.verdicts)
        std::cout << (v.pass ? "PASS " : "FAIL ") << v.name << "  (" << real(v.statistic) << " vs "
                  << real(v.tolerance) << ")\n";
    for (auto& n : rep.notes)
        std::cout << "note: " << n << "\n";
    std::cout << "report: " << out << "\n";
    return rep.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"gibbs: finite-volume continuous-spin Gibbs measures"};
    app.require_subcommand(1);

    std::string graph, region = "all", xi, out, config, name, manifest;
    double C = 1.0, n = 4.0, lambda = 1.0, b = 0.5;
    std::uint64_t seed = 1;
    long long sweeps = 10000, burn_in = 1000, runs = 1000;
    int k = 1, nmax = 100;

    auto* abc = app.add_subcommand("analyze-bc", "growth profiles A and A~ on a region");
    abc->add_option("--graph", graph, "path:L | box:d:L | tree:deg:depth | random:n:extra:seed | edge-list file")
        ->required();
    abc->add_option("--region", region, "all | ball:r | list:x,y,...");
    abc->add_option("--xi", xi, "family:params, e.g. double_exponential:1.5:4")->required();
    abc->add_option("--C", C)->required();
    abc->add_option("--n", n)->required();
    abc->add_option("--lambda", lambda);
    abc->add_option("--out", out)->required();

    auto* smp = app.add_subcommand("sample", "heat-bath chain on the largest configured volume");
    smp->add_option("--config", config)->required()->check(CLI::ExistingFile);
    smp->add_option("--seed", seed);
    smp->add_option("--sweeps", sweeps);
    smp->add_option("--burn-in", burn_in);
    smp->add_option("--out", out)->required();

    auto* exp = app.add_subcommand("explore", "exploration process runs");
    exp->add_option("--config", config)->required()->check(CLI::ExistingFile);
    exp->add_option("--runs", runs);
    exp->add_option("--out", out)->required();

    auto* prg = app.add_subcommand("progeny", "total-progeny pmf of the dominating branching process");
    prg->add_option("--b", b)->required();
    prg->add_option("--k", k);
    prg->add_option("--nmax", nmax);
    prg->add_option("--out", out)->required();

    auto* ex = app.add_subcommand("experiment", "run one named experiment");
    ex->add_option("name", name)->required()->check(CLI::IsMember(experiment_names()));
    ex->add_option("--config", config)->required()->check(CLI::ExistingFile);
    ex->add_option("--out", out);

    auto* all = app.add_subcommand("run-all", "run every config of a manifest");
    all->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
    all->add_option("--out-dir", out);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*abc)
            return analyze_bc(graph, region, xi, C, n, lambda, out);
        if (*smp)
            return sample(config, seed, sweeps, burn_in, out);
        if (*exp)
            return explore(config, runs, out);
        if (*prg)
            return progeny(b, k, nmax, out);
        if (*ex)
            return experiment(name, config, out);
        if (*all) {
            auto r = run_all(manifest, out);
            std::cout << r.summary.dump(2) << "\n";
            return r.exit_code;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
