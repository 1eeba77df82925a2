#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace greenlab
{
inline constexpr char const* tool_version = "1.0.0";
inline constexpr char const* schema_version = "1";

//! Experiment kinds accepted by run()
std::vector<std::string> const& experiment_kinds();

/*!
 * Flat key/value configuration.
 *
 * Keys are "seed", "workers", or "section.key" for the sections sequence,
 * observable and params. Every key is checked against the known set when
 * the config is built; values are parsed lazily by the experiment.
 */
struct ExperimentConfig
{
    std::string kind;
    std::uint64_t seed{1};
    std::size_t workers{1};
    std::map<std::string, std::string> values;

    bool has(std::string const& key) const { return values.count(key) > 0; }
    std::string get(std::string const& key, std::string const& fallback) const;
    double get_double(std::string const& key, double fallback) const;
    std::size_t get_size(std::string const& key, std::size_t fallback) const;
    int get_int(std::string const& key, int fallback) const;
    std::vector<std::size_t> get_sizes(
        std::string const& key, std::vector<std::size_t> const& fallback) const;
    std::vector<double> get_doubles(std::string const& key,
                                    std::vector<double> const& fallback) const;

    //! Set or override a key; ConfigError on unknown keys
    void set(std::string const& key, std::string const& value);
};

//! Parse INI text; ConfigError on unknown sections or keys
ExperimentConfig parse_config(std::string const& text, std::string const& kind);
ExperimentConfig load_config(std::filesystem::path const& path,
                             std::string const& kind);

//! Apply "section.key=value"
void apply_override(ExperimentConfig& config, std::string const& assignment);

struct CsvTable
{
    std::string name;  //!< file name, e.g. "clt.csv"
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row);
    std::string render() const;
};

//! Shortest round-trip decimal form of a double
std::string format_number(double v);

struct Verdict
{
    std::string name;
    bool pass{false};
    std::string artifact;
};

struct PlotSeries
{
    std::string name;  //!< file stem
    std::string x_label, y_label;
    std::vector<std::pair<double, double>> points;
};

struct RunReport
{
    std::string kind;
    ExperimentConfig config;
    //! deque: runners keep references to earlier tables while adding more
    std::deque<CsvTable> tables;
    std::vector<Verdict> verdicts;
    std::vector<PlotSeries> plots;
    nlohmann::json details = nlohmann::json::object();
    nlohmann::json samples = nlohmann::json::object();
    double wall_seconds{0.0};

    bool all_pass() const;
    nlohmann::json summary(bool include_timing) const;
};

//! Validate, dispatch to the owning module and collect tables and verdicts
RunReport run(ExperimentConfig const& config);

//! Write text to path through a temporary file and rename
void write_atomic(std::filesystem::path const& path, std::string const& text);

//! CSV tables and "<kind>_summary.json" under dir; returns written paths
std::vector<std::filesystem::path> write_report(
    RunReport const& report, std::filesystem::path const& dir,
    bool include_timing = false);

/*!
 * Two-column whitespace-separated files, one per plot series. A report
 * without verdicts produces no files and a warning on stderr.
 */
std::vector<std::filesystem::path> emit_plotdata(
    RunReport const& report, std::filesystem::path const& dir);

}  // namespace greenlab
