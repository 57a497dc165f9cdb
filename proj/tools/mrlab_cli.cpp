// mrlab: batch runner for the multilinear restriction experiments.

#include "mrlab/cli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <sstream>

namespace {

using mrlab::Json;

enum class Kind { Number, Integer, Numbers, Integers, Text };

struct FlagSpec {
    const char* flag;  // without the leading dashes
    const char* key;   // config key it overrides
    Kind kind;
    const char* help;
};

Json convert(const std::string& raw, Kind kind, const std::string& flag) {
    auto parse_list = [&](bool integer) {
        Json arr = Json::array();
        std::string s = raw;
        for (char& c : s)
            if (c == ',') c = ' ';
        std::istringstream in(s);
        std::string tok;
        while (in >> tok) arr.push_back(convert(tok, integer ? Kind::Integer : Kind::Number, flag));
        if (arr.empty()) throw mrlab::InvalidArgument("--" + flag + ": empty list");
        return arr;
    };
    switch (kind) {
        case Kind::Number: return mrlab::parse_number(raw);
        case Kind::Integer: {
            std::size_t pos = 0;
            long long v = 0;
            try {
                v = std::stoll(raw, &pos);
            } catch (const std::exception&) {
                pos = 0;
            }
            if (pos == 0 || pos != raw.size()) throw mrlab::InvalidArgument("--" + flag + ": not an integer: " + raw);
            return v;
        }
        case Kind::Numbers: return parse_list(false);
        case Kind::Integers: return parse_list(true);
        case Kind::Text: return raw;
    }
    return raw;
}

const std::map<std::string, std::vector<FlagSpec>>& subcommand_flags() {
    static const std::map<std::string, std::vector<FlagSpec>> flags{
        {"transversality", {{"samples", "samples", Kind::Integer, "largest sample count per surface"}}},
        {"decay-fit",
         {{"surface", "surface", Kind::Text, "preset: flat | paraboloid | monomial:l | sphere-cap:rho"},
          {"direction", "direction", Kind::Numbers, "direction omega (comma separated; normalised)"},
          {"radii-min", "radii_min", Kind::Number, "smallest radius"},
          {"radii-max", "radii_max", Kind::Number, "largest radius"},
          {"octaves", "octaves", Kind::Integer, "number of octaves above radii-min (overrides radii-max)"},
          {"per-octave", "per_octave", Kind::Integer, "radii per octave"}}},
        {"lw-check",
         {{"n", "n", Kind::Integer, "ambient lattice dimension"},
          {"k", "k", Kind::Integer, "number of functions"},
          {"box", "box", Kind::Integers, "box side, or one side per axis"},
          {"splits", "splits", Kind::Text, "H'' axes per function, e.g. \"3;2\""},
          {"trials", "trials", Kind::Integer, "random instances"}}},
        {"partition-check",
         {{"dim", "dim", Kind::Integer, "dimension"},
          {"scale", "scale", Kind::Number, "lattice scale r"},
          {"order", "order", Kind::Integer, "profile smoothness order"},
          {"truncation", "truncation", Kind::Number, "truncation T"},
          {"grid", "grid", Kind::Integer, "grid points per axis"}}},
        {"constant-sweep",
         {{"R", "R", Kind::Numbers, "R ladder"},
          {"delta", "delta", Kind::Number, "delta"},
          {"trials", "trials", Kind::Integer, "trials per rung"},
          {"resolution", "resolution", Kind::Integer, "evaluation points per axis (0 = automatic)"},
          {"oversample", "oversample", Kind::Number, "Nyquist oversampling factor"}}},
        {"localization-sweep",
         {{"mu", "mu", Kind::Numbers, "mu ladder"},
          {"R", "R", Kind::Number, "cube side (default 1 / min mu)"},
          {"delta", "delta", Kind::Number, "delta"},
          {"trials", "trials", Kind::Integer, "trials per rung"},
          {"resolution", "resolution", Kind::Integer, "evaluation points per axis (0 = automatic)"},
          {"oversample", "oversample", Kind::Number, "Nyquist oversampling factor"}}},
        {"recursion-check",
         {{"R", "R", Kind::Number, "inner scale R"},
          {"delta", "delta", Kind::Number, "delta"},
          {"trials", "trials", Kind::Integer, "trials"},
          {"kappa-rec", "kappa_rec", Kind::Number, "allowed ratio"}}},
        {"eps-removal",
         {{"p", "p", Kind::Number, "exponent p"},
          {"n", "n", Kind::Integer, "dimension n"},
          {"C", "C", Kind::Number, "constant C"},
          {"eps", "eps", Kind::Number, "epsilon"},
          {"log-inv-eps", "log_inv_eps", Kind::Number, "log(1/epsilon), alternative to --eps"},
          {"beta-grid", "beta_grid", Kind::Integer, "points of the chain-inequality grid"}}},
        {"sparse-cover",
         {{"cubes", "cubes", Kind::Text, "file of unit-cube centres, one per line"},
          {"depth", "depth", Kind::Integer, "number of scales N"},
          {"sep-exponent", "sep_exponent", Kind::Number, "separation exponent C"}}},
    };
    return flags;
}

const std::map<std::string, std::string>& descriptions() {
    static const std::map<std::string, std::string> d{
        {"transversality", "transversality constant nu of a family, refined by densifying; CSV (samples_per_surface, nu)"},
        {"decay-fit", "decay exponent of E psi along a direction; CSV (r, magnitude, running_slope)"},
        {"lw-check", "discrete Loomis-Whitney ratios on random instances; CSV (trial, lhs, rhs, ratio)"},
        {"partition-check", "partition-of-unity deviation on a grid; CSV (x..., deviation)"},
        {"constant-sweep", "best-constant ledger over an R ladder; CSV (R, delta, mu..., A_hat, trials, seed_best)"},
        {"localization-sweep", "localization gain curve over a mu ladder; CSV (mu, A_hat, mean)"},
        {"recursion-check", "two-scale recursion ratio and the iterated gain product"},
        {"eps-removal", "epsilon-removal exponents and the chain inequality; CSV (quantity, value)"},
        {"sparse-cover", "multi-scale sparse cover of unit cubes; CSV (collection_id, radius, center...)"},
    };
    return d;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multilinear restriction experiment runner"};
    app.require_subcommand(1);
    std::string config_path, out_dir, out;
    std::int64_t seed = -1, jobs = -1;
    bool verbose = false;
    app.add_option("--config", config_path, "TOML experiment file");
    app.add_option("--seed", seed, "random seed")->check(CLI::NonNegativeNumber);
    app.add_option("--jobs", jobs, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    app.add_option("--out-dir", out_dir, "output directory");
    app.add_flag("--verbose,-v", verbose, "progress messages on stderr");

    std::map<std::string, std::map<std::string, std::string>> raw;
    std::map<std::string, CLI::App*> subs;
    for (const auto& [name, flags] : subcommand_flags()) {
        CLI::App* sub = app.add_subcommand(name, descriptions().at(name));
        sub->fallthrough();
        sub->add_option("--out", out, "main CSV output (relative to --out-dir)");
        for (const auto& f : flags) sub->add_option(std::string("--") + f.flag, raw[name][f.flag], f.help);
        subs[name] = sub;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    std::string kind;
    for (const auto& [name, sub] : subs)
        if (sub->parsed()) kind = name;

    mrlab::ExperimentConfig cfg;
    try {
        Json file = config_path.empty() ? Json::object() : mrlab::load_toml_file(config_path);
        Json overrides = Json::object();
        if (seed >= 0) overrides["seed"] = seed;
        if (jobs >= 0) overrides["jobs"] = jobs;
        if (!out_dir.empty()) overrides["out_dir"] = out_dir;
        if (!out.empty()) overrides["out"] = out;
        if (verbose) overrides["verbose"] = true;
        for (const auto& f : subcommand_flags().at(kind))
            if (subs[kind]->count(std::string("--") + f.flag) > 0)
                overrides[f.key] = convert(raw[kind][f.flag], f.kind, f.flag);
        cfg = mrlab::make_config(kind, file, overrides);
    } catch (...) {
        std::string msg;
        const int code = mrlab::exit_code_for_current_exception(msg);
        std::cerr << "mrlab " << kind << ": " << msg << '\n';
        return code;
    }

    const mrlab::RunStatus st = mrlab::run(cfg, std::cerr);
    if (st.exit_code != 0) {
        std::cerr << "mrlab " << kind << ": " << st.message << '\n';
        return st.exit_code;
    }
    for (const auto& f : st.files) std::cout << f << '\n';
    return 0;
}
