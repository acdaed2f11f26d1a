#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <boost/multiprecision/cpp_int.hpp>

#include "gibbs/experiments.hpp"

using namespace gibbs;
using Catch::Approx;
using boost::multiprecision::cpp_rational;

namespace {

json base_config(const std::string& name)
{
    return json{{"experiment", name},
                {"graph", {{"kind", "path"}, {"L", 65}}},
                {"measure", {{"kind", "pure_tail"}, {"coefficients", {1.0, 4.0}}}},
                {"beta", 1.0},
                {"boundary", {{"family", "double_exponential"}, {"K", 1.5}, {"n", 4.0}, {"rate", 1.3}}},
                {"volumes", {1, 2, 3, 4}},
                {"budget", {{"sweeps", 20000}, {"burn_in", 500}}},
                {"seed", 7}};
}

std::filesystem::path scratch_dir(const std::string& tag)
{
    auto d = std::filesystem::temp_directory_path() / ("gibbs_test_" + tag);
    std::filesystem::remove_all(d);
    std::filesystem::create_directories(d);
    return d;
}

void write(const std::filesystem::path& p, const std::string& s)
{
    std::ofstream(p) << s;
}

double to_double(const cpp_rational& r) { return static_cast<double>(r); }

}  // namespace

TEST_CASE("cascade alpha for n = 4, unit tail coefficient and beta = 1")
{
    CHECK(cascade_alpha(1.0, 1.0, 4.0) == 1.0 / 32.0);
}

TEST_CASE("cascade levels: hand-checked chain")
{
    // xi_z = 1e4, m = 2, n = 4, alpha = 1/32
    auto ld = cascade_log_levels(std::log(1e4), 2, 1.0 / 32.0, 4.0);
    REQUIRE(ld.size() == 3);
    const double d1 = std::cbrt(1e4 / 32.0);
    const double d0 = std::cbrt(d1 / 32.0);
    CHECK(std::exp(ld[2]) == Approx(1e4).epsilon(1e-14));
    CHECK(std::exp(ld[1]) == Approx(d1).epsilon(1e-13));
    CHECK(std::exp(ld[0]) == Approx(d0).epsilon(1e-13));
    CHECK(std::exp(cascade_log_bound(ld)) == Approx(d0 / (d0 + 1.0) * d1 / (d1 + 1.0)).epsilon(1e-13));
}

TEST_CASE("cascade product matches exact rational arithmetic")
{
    // forward from a rational D_0: D_{j+1} = D_j^(n-1) / alpha is exact in Q
    const cpp_rational alpha(1, 32);
    for (auto [num, den] : {std::pair{3, 2}, std::pair{5, 3}, std::pair{7, 4}, std::pair{2, 1}}) {
        for (int m = 1; m <= 4; ++m) {
            std::vector<cpp_rational> D{cpp_rational(num, den)};
            for (int j = 0; j < m; ++j)
                D.push_back(D[j] * D[j] * D[j] / alpha);
            cpp_rational prod = 1;
            for (int j = 0; j < m; ++j)
                prod *= D[j] / (D[j] + 1);
            // log of an exact rational without overflowing the double range
            auto logq = [](const cpp_rational& q) {
                auto n = boost::multiprecision::numerator(q), d = boost::multiprecision::denominator(q);
                auto lg = [](boost::multiprecision::cpp_int v) {
                    long sh = 0;
                    while (v > boost::multiprecision::cpp_int(1) << 60) {
                        v >>= 30;
                        sh += 30;
                    }
                    return std::log(static_cast<double>(v)) + sh * std::log(2.0);
                };
                return lg(n) - lg(d);
            };
            auto ld = cascade_log_levels(logq(D[m]), m, 1.0 / 32.0, 4.0);
            INFO("D0 = " << num << "/" << den << ", m = " << m);
            for (int j = 0; j <= m; ++j)
                CHECK(ld[j] == Approx(logq(D[j])).epsilon(1e-12).margin(1e-12));
            CHECK(std::exp(cascade_log_bound(ld)) == Approx(to_double(prod)).epsilon(1e-12));
        }
    }
}

TEST_CASE("cascade recursion holds for random parameters")
{
    Rng rng(99);
    for (int t = 0; t < 500; ++t) {
        double n = 2.5 + 4.0 * rng.uniform();
        double alpha = std::exp(-6.0 * rng.uniform());
        double lz = 600.0 * rng.uniform();
        int m = 1 + static_cast<int>(8 * rng.uniform());
        auto ld = cascade_log_levels(lz, m, alpha, n);
        for (int j = 0; j < m; ++j)
            CHECK((n - 1.0) * ld[j] == Approx(std::log(alpha) + ld[j + 1]).margin(1e-9));
        double lb = cascade_log_bound(ld);
        CHECK(lb <= 0.0);
        // dropping the last factor can only raise the product
        std::vector<double> shorter(ld.begin() + 1, ld.end());
        CHECK(cascade_log_bound(shorter) >= lb - 1e-15);
    }
    CHECK_THROWS(cascade_log_levels(1.0, 2, 1.0 / 32.0, 2.0));
}

TEST_CASE("tightness classification on synthetic quantiles")
{
    Thresholds t;
    double drift = 0, growth = 0;
    std::vector<QuantileEstimate> flat{{1.5, 0.01}, {1.40, 0.01}, {1.41, 0.01}, {1.405, 0.01}};
    CHECK(classify_tightness(flat, t, drift, growth) == "tight-consistent");
    CHECK(drift < 2.0);
    std::vector<QuantileEstimate> up{{1.0, 0.01}, {1.2, 0.01}, {1.5, 0.01}, {2.0, 0.01}};
    CHECK(classify_tightness(up, t, drift, growth) == "diverging");
    CHECK(growth > 5.0);
    std::vector<QuantileEstimate> noisy{{1.0, 0.01}, {1.2, 0.01}, {1.1, 0.01}, {1.3, 0.01}};
    CHECK(classify_tightness(noisy, t, drift, growth) == "inconclusive");
}

TEST_CASE("beta = 0: every volume sees the single-site law")
{
    json j = base_config("tightness_scan");
    j["beta"] = 0.0;
    j["measure"] = {{"kind", "gaussian"}, {"coefficients", {0.5}}};
    j["params"] = {{"expect", "tight"}};
    auto rep = tightness_scan(config_from_json(j));
    CHECK(rep.data["classification"] == "tight-consistent");
    // |N(0,1)| 0.99-quantile
    for (auto& v : rep.data["volumes"])
        CHECK(v["q99"].get<double>() == Approx(2.5758293035489).margin(5 * v["q99_se"].get<double>()));
}

TEST_CASE("beta = 0 domination: coupled chains coincide")
{
    json j = base_config("domination_suite");
    j["beta"] = 0.0;
    j["measure"] = {{"kind", "phi4"}, {"coefficients", {1.0, -0.5}}};
    j["boundary"] = {{"family", "constant"}, {"K", 0.0}};
    j["volumes"] = {3};
    j["params"] = {{"a", 1.0}};
    auto rep = domination_suite(config_from_json(j));
    for (auto& v : rep.verdicts) {
        INFO(v.name << " " << v.statistic << " " << v.tolerance);
        CHECK(v.pass);
    }
}

TEST_CASE("tightness verdict is stable under a doubled budget")
{
    for (double rate : {0.5, 1.3}) {
        json j = base_config("tightness_scan");
        j["boundary"]["rate"] = rate;
        j["volumes"] = rate < 1.0 ? json{1, 4, 8, 12} : json{1, 2, 3, 4};
        j["params"] = {{"expect", rate < 1.0 ? "tight" : "diverging"}};
        j["budget"] = {{"sweeps", 30000}, {"burn_in", 500}};
        auto r1 = tightness_scan(config_from_json(j));
        j["budget"] = {{"sweeps", 60000}, {"burn_in", 500}};
        auto r2 = tightness_scan(config_from_json(j));
        INFO("rate " << rate);
        CHECK(r1.data["classification"] == r2.data["classification"]);
        CHECK(r1.passed());
        CHECK(r2.passed());
    }
}

TEST_CASE("reports are reproducible from config and seed")
{
    json j = base_config("anti_tightness_cascade");
    j["volumes"] = {2, 3, 4};
    auto c = config_from_json(j);
    auto a = run_experiment(c).to_json();
    auto b = run_experiment(c).to_json();
    CHECK(a.dump() == b.dump());
    setenv("GIBBS_THREADS", "1", 1);
    auto s = run_experiment(c).to_json();
    unsetenv("GIBBS_THREADS");
    CHECK(a.dump() == s.dump());
    j["seed"] = 8;
    auto d = run_experiment(config_from_json(j)).to_json();
    CHECK(a["provenance"]["config_hash"] != d["provenance"]["config_hash"]);
}

TEST_CASE("cascade on the shipped-style path passes with a recorded bound")
{
    auto rep = anti_tightness_cascade(config_from_json(base_config("anti_tightness_cascade")));
    CHECK(rep.verdicts.size() == 2);
    CHECK(rep.passed());
    for (auto& l : rep.data["levels"])
        if (l.contains("mc_probability"))
            CHECK(l["mc_probability"].get<double>() >= l["bound"].get<double>() - 3 * l["mc_se"].get<double>());
}

TEST_CASE("cascade with bounded xi flags no divergence claim")
{
    json j = base_config("anti_tightness_cascade");
    j["boundary"] = {{"family", "constant"}, {"K", 3.0}};
    auto rep = anti_tightness_cascade(config_from_json(j));
    CHECK(rep.data["divergence_claim"] == false);
    CHECK(rep.passed());
}

TEST_CASE("regularity check at beta = 0 and xi = 0")
{
    json j = base_config("regularity_ratio_check");
    j["beta"] = 0.0;
    j["boundary"] = {{"family", "constant"}, {"K", 0.0}};
    j["volumes"] = {0, 1, 2};
    j["params"] = {{"a", 0.5}};
    auto rep = regularity_ratio_check(config_from_json(j));
    CHECK(rep.passed());
    // with no interaction the ratio is the same at every volume
    auto& v = rep.data["volumes"];
    CHECK(v[0]["sup_ratio"].get<double>() == Approx(v[2]["sup_ratio"].get<double>()).epsilon(0.2));
}

TEST_CASE("config validation")
{
    auto bad = [](auto edit) {
        json j = base_config("tightness_scan");
        edit(j);
        return j;
    };
    CHECK_THROWS_AS(config_from_json(bad([](json& j) { j["volumes"] = {1, 1, 2}; })), ConfigError);
    CHECK_THROWS_AS(config_from_json(bad([](json& j) { j["volumes"] = json::array(); })), ConfigError);
    CHECK_THROWS_AS(config_from_json(bad([](json& j) { j["beta"] = -1.0; })), ConfigError);
    CHECK_THROWS_AS(config_from_json(bad([](json& j) { j["bogus"] = 1; })), ConfigError);
    CHECK_THROWS_AS(config_from_json(bad([](json& j) { j["measure"]["kind"] = "cauchy"; })), ConfigError);
    CHECK_THROWS_AS(config_from_json(bad([](json& j) { j["measure"]["coefficients"] = {1.0, 2.0}; })), ConfigError);
    CHECK_THROWS_AS(config_from_json(bad([](json& j) { j["experiment"] = "nope"; })), ConfigError);
    CHECK_THROWS_AS(config_from_json(bad([](json& j) { j["budget"]["sweeps"] = 10; })), ConfigError);
    CHECK_NOTHROW(config_from_json(base_config("tightness_scan")));

    json atomic = base_config("regularity_ratio_check");
    atomic["measure"] = {{"kind", "atomic"}, {"coefficients", {{-1.0, 0.5}, {1.0, 0.5}}}};
    CHECK_THROWS_AS(regularity_ratio_check(config_from_json(atomic)), ConfigError);

    json shallow = base_config("plus_measure_suite");
    shallow["measure"] = {{"kind", "phi4"}, {"coefficients", {1.0, -0.5}}};
    shallow["volumes"] = {1, 2};
    shallow["params"] = {{"r_threshold", 3}};
    CHECK_THROWS_AS(plus_measure_suite(config_from_json(shallow)), ConfigError);
}

TEST_CASE("run_all: empty manifest, malformed config, report files")
{
    auto d = scratch_dir("runall");
    write(d / "empty.json", R"({"configs": []})");
    CHECK(run_all((d / "empty.json").string()).exit_code == 0);

    write(d / "broken.json", R"({"experiment": "tightness_scan", "graph": )");
    write(d / "m1.json", R"({"configs": ["broken.json"]})");
    auto r = run_all((d / "m1.json").string());
    CHECK(r.exit_code != 0);
    CHECK(r.summary["experiments"][0].contains("error"));

    write(d / "not_json.json", "configs = [");
    CHECK(run_all((d / "not_json.json").string()).exit_code != 0);

    json ok = base_config("anti_tightness_cascade");
    ok["volumes"] = {2, 3};
    write(d / "ok.json", ok.dump());
    write(d / "m2.json", R"({"configs": ["ok.json"], "output_dir": "out"})");
    auto r2 = run_all((d / "m2.json").string());
    CHECK(r2.exit_code == 0);
    CHECK(std::filesystem::exists(d / "out" / "summary.json"));
    CHECK(std::filesystem::exists(d / "out" / "ok.report.json"));

    // one failure among passes still fails the batch
    write(d / "m3.json", R"({"configs": ["ok.json", "broken.json"]})");
    CHECK(run_all((d / "m3.json").string()).exit_code != 0);
    std::filesystem::remove_all(d);
}

TEST_CASE("plus-measure suite records the limitation and agrees at small scale")
{
    json j = base_config("plus_measure_suite");
    j["measure"] = {{"kind", "phi4"}, {"coefficients", {1.0, -0.5}}};
    j["beta"] = 0.2;
    j["boundary"] = {{"family", "constant"}, {"K", 0.0}};
    j["volumes"] = {2, 4, 8};
    j["budget"] = {{"sweeps", 15000}, {"burn_in", 500}, {"outer_draws", 20}};
    auto rep = plus_measure_suite(config_from_json(j));
    REQUIRE(!rep.notes.empty());
    CHECK(rep.notes.front().find("extremality") != std::string::npos);
    CHECK(rep.verdicts.size() == 4);
    for (auto& v : rep.verdicts) {
        INFO(v.name << " " << v.statistic << " " << v.tolerance);
        CHECK(v.pass);
    }
}
