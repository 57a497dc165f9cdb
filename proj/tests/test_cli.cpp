#include "doctest.h"

#include "mrlab/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace mrlab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("mrlab_test_cli_" + name);
    fs::remove_all(p);
    return p;
}

ExperimentConfig config(const std::string& kind, const std::string& toml, const std::string& dir) {
    Json over = Json::object();
    over["out_dir"] = dir;
    return make_config(kind, parse_toml(toml), over);
}

}  // namespace

TEST_CASE("toml subset") {
    const char* text = R"(# experiment
experiment = "lw-check"
seed = 7          # trailing comment
ratio = -2.5e-3
big = 1_000
flags = [true, false]
nested = [[1.0, 2, 0],
          [0.5, 0, 2],]   # multi-line, trailing comma
name = 'lit\eral'
quoted = "a\"b\n"
inline = { a = 1, b.c = "x" }
dotted.key = inf

[family]
n = 3
codims = [1, 0]

[[surface]]
preset = "flat"
[surface.submanifold]
codim = 1

[[surface]]
preset = "paraboloid"
[surface.submanifold]
codim = 0
)";
    const Json j = parse_toml(text);
    CHECK(j["experiment"] == "lw-check");
    CHECK(j["seed"] == 7);
    CHECK(j["ratio"].get<double>() == -2.5e-3);
    CHECK(j["big"] == 1000);
    CHECK(j["flags"] == Json::array({true, false}));
    CHECK(j["nested"].size() == 2);
    CHECK(j["nested"][1][0].get<double>() == 0.5);
    CHECK(j["nested"][1][2] == 2);
    CHECK(j["name"] == "lit\\eral");
    CHECK(j["quoted"] == "a\"b\n");
    CHECK(j["inline"]["b"]["c"] == "x");
    CHECK(std::isinf(j["dotted"]["key"].get<double>()));
    CHECK(j["family"]["codims"] == Json::array({1, 0}));
    REQUIRE(j["surface"].size() == 2);
    CHECK(j["surface"][0]["submanifold"]["codim"] == 1);
    CHECK(j["surface"][1]["preset"] == "paraboloid");
    CHECK(j["surface"][1]["submanifold"]["codim"] == 0);

    CHECK_THROWS_AS(parse_toml("a = 1\na = 2\n"), InvalidArgument);
    CHECK_THROWS_AS(parse_toml("[t]\n[t]\n"), InvalidArgument);
    CHECK_THROWS_AS(parse_toml("a = [1, 2\n"), InvalidArgument);
    CHECK_THROWS_AS(parse_toml("a = 1x\n"), InvalidArgument);
    CHECK_THROWS_AS(parse_toml("a = \"open\n"), InvalidArgument);
    try {
        parse_toml("x = 1\n\ny = oops\n");
        FAIL("no throw");
    } catch (const InvalidArgument& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("numbers and CSV round trip") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-30.0, 30.0);
    for (int i = 0; i < 1000; ++i) {
        const double v = std::ldexp(u(rng), int(u(rng) * 10));
        CHECK(parse_number(format_number(v)) == v);
    }
    CHECK(format_number(0.5) == "0.5");
    CHECK(std::isnan(parse_number(format_number(std::nan("")))));
    CHECK(parse_number(format_number(-INFINITY)) == -INFINITY);
    CHECK_THROWS_AS(parse_number("1.0abc"), InvalidArgument);

    CsvTable t;
    t.header = {"a", "b,c", "d"};
    t.add_row({"1", "x\"y", ""});
    t.add_row({"", "multi\nline", "3"});
    const CsvTable back = CsvTable::parse(t.str());
    CHECK(back.header == t.header);
    CHECK(back.rows == t.rows);
    CHECK_THROWS_AS(t.add_row({"1"}), InvalidArgument);
    CHECK_THROWS_AS(CsvTable::parse("a,b\n1\n"), InvalidArgument);
}

TEST_CASE("plot data") {
    PlotSeries s;
    std::mt19937_64 rng(11);
    std::lognormal_distribution<double> d;
    for (int i = 0; i < 20; ++i) {
        s.x.push_back(d(rng));
        s.y.push_back(d(rng));
        s.y_lo.push_back(s.y.back() * 0.5);
        s.y_hi.push_back(s.y.back() * 2.0);
    }
    s.reference_slope = 1.0 / 3.0;
    const CsvTable t = emit_plot_data(s);
    CHECK(t.header == std::vector<std::string>{"x", "y", "y_lo", "y_hi", "reference_slope"});
    CHECK(parse_plot_data(CsvTable::parse(t.str())) == s);
    CHECK_THROWS_AS(emit_plot_data(PlotSeries{}), InvalidArgument);

    GainCurve g;
    g.mu = {0.25, 0.125};
    g.A_hat = {1.0, 0.7};
    g.mean = {0.8, 0.5};
    g.reference = 0.5;
    const PlotSeries gs = plot_series(g);
    CHECK(gs.y_lo == g.mean);
    CHECK(gs.reference_slope == 0.5);

    DecayEstimate fit;
    fit.radii = {1.0, 2.0};
    fit.magnitudes = {1.0, 0.8};
    TypeResult type;
    type.finite = true;
    type.order = 4;
    CHECK(plot_series(fit, type).reference_slope == 0.25);
    type.finite = false;
    CHECK(plot_series(fit, type).reference_slope == 0.0);
}

TEST_CASE("config merging and validation") {
    const Json file = parse_toml("experiment = \"lw-check\"\nseed = 3\nn = 3\nk = 2\n");
    Json over = Json::object();
    over["seed"] = 9;
    over["trials"] = 4;
    const auto cfg = make_config("", file, over);
    CHECK(cfg.kind == "lw-check");
    CHECK(cfg.seed == 9);
    CHECK(cfg.params["trials"] == 4);
    CHECK(cfg.params.contains("n"));
    CHECK_FALSE(cfg.params.contains("seed"));
    CHECK(cfg.run_id().size() == 16);
    CHECK(cfg.run_id() == make_config("lw-check", file, over).run_id());
    validate(cfg);

    CHECK_THROWS_AS(make_config("constant-sweep", file, Json::object()), InvalidArgument);
    CHECK_THROWS_AS(make_config("bogus", Json::object(), Json::object()), InvalidArgument);
    CHECK_THROWS_AS(validate(make_config("lw-check", parse_toml("trails = 3\n"), Json::object())), InvalidArgument);
    CHECK_THROWS_AS(validate(make_config("lw-check", parse_toml("box = [4, 4]\n"), Json::object())), InvalidArgument);
    CHECK_THROWS_AS(validate(make_config("eps-removal", parse_toml("C = 1.5\n"), Json::object())), InvalidArgument);
    CHECK_THROWS_AS(validate(make_config("decay-fit", parse_toml("surface = \"cone\"\n"), Json::object())),
                    InvalidArgument);
    // every kind validates with its defaults except sparse-cover, which needs cubes
    for (const auto& kind : experiment_kinds()) {
        if (kind == "sparse-cover") {
            CHECK_THROWS_AS(validate(make_config(kind, Json::object(), Json::object())), InvalidArgument);
            continue;
        }
        CHECK_NOTHROW(validate(make_config(kind, Json::object(), Json::object())));
    }
}

TEST_CASE("runner: determinism and exit codes") {
    std::ostringstream log;
    SUBCASE("minimal lw-check, seed 7, run twice gives identical bytes") {
        const auto a = scratch("lw_a"), b = scratch("lw_b");
        const std::string toml = "seed = 7\nn = 3\nk = 3\nbox = 4\ntrials = 5\nout = \"lw.csv\"\n";
        const auto s1 = run(config("lw-check", toml, a.string()), log);
        const auto s2 = run(config("lw-check", toml, b.string()), log);
        REQUIRE(s1.exit_code == 0);
        REQUIRE(s2.exit_code == 0);
        const std::string c1 = slurp((a / "lw.csv").string()), c2 = slurp((b / "lw.csv").string());
        CHECK(c1 == c2);
        const CsvTable t = CsvTable::parse(c1);
        CHECK(t.header == std::vector<std::string>{"trial", "lhs", "rhs", "ratio"});
        CHECK(t.rows.size() == 5);
        for (const auto& r : t.rows) CHECK(parse_number(r[3]) <= 1.0 + 1e-9);
        const Json m = Json::parse(slurp((a / "lw.manifest.json").string()));
        CHECK(m["config"]["seed"] == 7);
        CHECK(m["config"]["params"]["trials"] == 5);
        CHECK(m.contains("version"));
        CHECK(m["wall_time_seconds"].get<double>() >= 0.0);
        // a different seed changes the data
        const auto c = scratch("lw_c");
        REQUIRE(run(config("lw-check", "seed = 8\nn = 3\nk = 3\nbox = 4\ntrials = 5\nout = \"lw.csv\"\n",
                           c.string()), log).exit_code == 0);
        CHECK(slurp((c / "lw.csv").string()) != c1);
    }
    SUBCASE("jobs do not change the bytes") {
        const auto a = scratch("jobs_a"), b = scratch("jobs_b");
        auto c1 = config("lw-check", "n = 4\nk = 2\nsplits = [[3], [2]]\ntrials = 6\nout = \"x.csv\"\n", a.string());
        auto c2 = c1;
        c2.out_dir = b.string();
        c2.jobs = 3;
        REQUIRE(run(c1, log).exit_code == 0);
        REQUIRE(run(c2, log).exit_code == 0);
        CHECK(slurp((a / "x.csv").string()) == slurp((b / "x.csv").string()));
    }
    SUBCASE("invalid k > n exits 1 naming the precondition") {
        const auto d = scratch("bad");
        const auto s = run(config("lw-check", "n = 3\nk = 4\n", d.string()), log);
        CHECK(s.exit_code == 1);
        CHECK(s.message.find("k <= n") != std::string::npos);
        const auto f = run(config("constant-sweep", "[family]\nn = 2\ncodims = [0, 0, 0]\n", d.string()), log);
        CHECK(f.exit_code == 1);
        CHECK(f.message.find("k <= n") != std::string::npos);
        CHECK(s.files.empty());
    }
    SUBCASE("resolution refusal exits 2") {
        const auto d = scratch("res");
        const auto s = run(config("constant-sweep",
                                  "R = [8.0]\ntrials = 1\ndelta = 1e9\nresolution = 2\n[family]\nn = 2\ncodims = [0, 0]\n",
                                  d.string()),
                           log);
        CHECK(s.exit_code == 2);
    }
}

TEST_CASE("runner: constant-sweep ledger") {
    const auto d = scratch("sweep");
    std::ostringstream log;
    const auto s = run(config("constant-sweep",
                              "R = [8, 16, 32]\ntrials = 2\ndelta = 1e9\noversample = 1.5\nout = \"ledger.csv\"\n"
                              "[family]\nn = 2\ncodims = [0, 0]\nhalf_width = 1.0\n",
                              d.string()),
                       log);
    REQUIRE(s.exit_code == 0);
    const CsvTable t = CsvTable::parse(slurp((d / "ledger.csv").string()));
    CHECK(t.header == std::vector<std::string>{"R", "delta", "mu_1", "mu_2", "A_hat", "trials", "seed_best"});
    REQUIRE(t.rows.size() == 4);
    CHECK(t.rows[3][0] == "fit");
    // independent least-squares slope of log A_hat against log R over the three rows
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < 3; ++i) {
        const double x = std::log(parse_number(t.rows[i][0])), y = std::log(parse_number(t.rows[i][4]));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        CHECK(t.rows[i][5] == "2");
    }
    const double slope = (3 * sxy - sx * sy) / (3 * sxx - sx * sx);
    CHECK(parse_number(t.rows[3][4]) == doctest::Approx(slope).epsilon(1e-9));
    const PlotSeries p = parse_plot_data(CsvTable::parse(slurp((d / "ledger.plot.csv").string())));
    CHECK(p.x == std::vector<double>{8, 16, 32});
}

TEST_CASE("runner: plot references") {
    std::ostringstream log;
    SUBCASE("localization sweep reference c/2") {
        const auto d = scratch("loc");
        const auto s = run(config("localization-sweep",
                                  "mu = [0.25, 0.125]\ntrials = 2\ndelta = 1e9\noversample = 1.5\nout = \"g.csv\"\n"
                                  "[family]\nn = 3\ncodims = [1, 0]\nhalf_width = 2.0\n",
                                  d.string()),
                           log);
        REQUIRE(s.exit_code == 0);
        const PlotSeries p = parse_plot_data(CsvTable::parse(slurp((d / "g.plot.csv").string())));
        CHECK(p.reference_slope == 0.5);
        CHECK(p.x == std::vector<double>{0.25, 0.125});
    }
    SUBCASE("decay fit reference 1/l") {
        const auto d = scratch("decay");
        const auto s = run(config("decay-fit", "surface = \"monomial:4\"\nout = \"q.csv\"\n", d.string()), log);
        REQUIRE(s.exit_code == 0);
        const CsvTable t = CsvTable::parse(slurp((d / "q.csv").string()));
        CHECK(t.header == std::vector<std::string>{"r", "magnitude", "running_slope"});
        const PlotSeries p = parse_plot_data(CsvTable::parse(slurp((d / "q.plot.csv").string())));
        CHECK(p.reference_slope == 0.25);
    }
}

TEST_CASE("runner: arithmetic and sparse kinds") {
    std::ostringstream log;
    const auto d = scratch("misc");
    SUBCASE("eps removal") {
        const auto s = run(config("eps-removal", "out = \"e.csv\"\n", d.string()), log);
        REQUIRE(s.exit_code == 0);
        const Json m = Json::parse(slurp((d / "e.manifest.json").string()));
        CHECK(m["summary"]["chain_mismatches"] == 0);
        const CsvTable chain = CsvTable::parse(slurp((d / "e.chain.csv").string()));
        CHECK(chain.rows.size() == 1000);
    }
    SUBCASE("sparse cover from a file") {
        const fs::path cubes = d / "cubes.txt";
        fs::create_directories(d);
        {
            std::ofstream f(cubes);
            f << "# x, y\n0.5, 0.5\n1.5 0.5\n40.5,0.5\n\n-30.5, 12.5\n";
        }
        auto cfg = config("sparse-cover", "depth = 2\nout = \"s.csv\"\n", d.string());
        cfg.params["cubes"] = cubes.string();
        const auto s = run(cfg, log);
        REQUIRE(s.exit_code == 0);
        const Json m = Json::parse(slurp((d / "s.manifest.json").string()));
        CHECK(m["summary"]["covers"] == true);
        CHECK(m["summary"]["all_sparse"] == true);
        const CsvTable t = CsvTable::parse(slurp((d / "s.csv").string()));
        CHECK(t.header == std::vector<std::string>{"collection_id", "radius", "center_1", "center_2"});
    }
    SUBCASE("partition check") {
        const auto s = run(config("partition-check", "dim = 2\ngrid = 8\nout = \"p.csv\"\n", d.string()), log);
        REQUIRE(s.exit_code == 0);
        const CsvTable t = CsvTable::parse(slurp((d / "p.csv").string()));
        CHECK(t.rows.size() == 64);
        for (const auto& r : t.rows) CHECK(parse_number(r[2]) <= 1e-8);
    }
    SUBCASE("transversality") {
        const auto s = run(config("transversality", "samples = 4\nout = \"t.csv\"\n[family]\nn = 3\ncodims = [0, 0]\n",
                                  d.string()),
                           log);
        REQUIRE(s.exit_code == 0);
        const CsvTable t = CsvTable::parse(slurp((d / "t.csv").string()));
        CHECK(t.rows.size() == 3);
        CHECK(parse_number(t.rows.back()[1]) == doctest::Approx(1.0).epsilon(1e-12));
    }
}
