#pragma once

#include "mrlab/experiments.hpp"
#include "mrlab/oscillation.hpp"
#include "mrlab/toml.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mrlab {

/// Shortest decimal text that parses back to the same double.
std::string format_number(double v);
double parse_number(std::string_view s);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row);
    [[nodiscard]] std::string str() const;
    static CsvTable parse(std::string_view text);
};

/// One plottable curve: columns x, y, y_lo, y_hi, reference_slope.
struct PlotSeries {
    std::vector<double> x, y, y_lo, y_hi;
    double reference_slope = 0.0;

    bool operator==(const PlotSeries&) const = default;
};

/// Gain curve: x = mu, y = best constant, band [trial mean, best], reference c/2.
PlotSeries plot_series(const GainCurve& curve);
/// Decay fit: x = r, y = |E psi(r omega)|, reference 1/l (0 when the type is not finite).
PlotSeries plot_series(const DecayEstimate& fit, const TypeResult& type);
/// Constant ledger: x = R, y = best constant, band [worst trial, best], reference 0 (boundedness).
PlotSeries plot_series(const ConstantLedger& ledger);

/// Throws InvalidArgument on an empty series.
CsvTable emit_plot_data(const PlotSeries& s);
PlotSeries parse_plot_data(const CsvTable& t);

const std::vector<std::string>& experiment_kinds();

struct ExperimentConfig {
    std::string kind;
    Json params = Json::object();  // kind-specific parameters
    std::uint64_t seed = 1;
    std::size_t jobs = 1;
    std::string out_dir = ".";
    std::string out;  // main CSV path (relative to out_dir); empty: <kind>-<run id>.csv
    bool verbose = false;

    /// Stable hash of kind, seed and parameters.
    [[nodiscard]] std::string run_id() const;
    /// Effective configuration as written to the manifest.
    [[nodiscard]] Json echo() const;
};

/// Builds a configuration from a parsed config file and command-line overrides (both may
/// carry the global keys seed, jobs, out_dir, out, verbose, experiment). Override values win.
ExperimentConfig make_config(const std::string& kind, const Json& file, const Json& overrides);

struct ExperimentOutput {
    std::vector<std::pair<std::string, CsvTable>> tables;  // (suffix, table); the main table has suffix ""
    Json summary = Json::object();
};

/// Parses and validates every parameter (constructing the geometry) without computing.
void validate(const ExperimentConfig& cfg);
ExperimentOutput run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr);

struct RunStatus {
    int exit_code = 0;  // 0 ok, 1 invalid configuration, 2 resolution refusal, 3 numeric failure
    std::string message;
    std::vector<std::string> files;
};

/// Runs the experiment and writes the CSV files plus <main>.manifest.json.
RunStatus run(const ExperimentConfig& cfg, std::ostream& log);

/// Exit code for the active exception (call inside a catch block).
int exit_code_for_current_exception(std::string& message);

}  // namespace mrlab
