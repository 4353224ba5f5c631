#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "auf/decide.hpp"
#include "auf/flow.hpp"
#include "auf/olem.hpp"
#include "auf/scm.hpp"
#include "auf/synth.hpp"

namespace auf {

inline constexpr const char* k_tool_version = "0.3.0";
inline constexpr const char* k_results_format = "1";

// Provenance block written next to every result table. Holds no wall-clock
// state: two runs from the same manifest must produce byte-identical files,
// so everything here is a pure function of config and seed.
struct RunManifest {
    std::string tool;  // subcommand that produced the results
    uint64_t config_hash = 0;
    uint64_t master_seed = 0;
    std::string version = k_tool_version;
    std::string results_format = k_results_format;
    std::vector<uint64_t> task_seeds;
    nlohmann::json extra;  // bench-specific provenance (mappings, flags)

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
};

struct ResultRow {
    std::string setting;
    std::string method;
    std::string metric;
    double mean = 0.0;
    double std_dev = 0.0;
    size_t n_runs = 0;
};

struct ResultTable {
    std::vector<ResultRow> rows;

    void validate() const;  // std_dev >= 0, n_runs >= 1
    bool operator==(const ResultTable& other) const;
};

// Parses a JSON config file, mapping parse failures to diagnostics that
// name the file and the 1-based line of the offending byte.
nlohmann::json load_config_json(const std::string& path);

// Sweep over (d, density, linearity, noise) cells; scalar fields are shared
// by every cell.
struct OrderBenchSweep {
    std::vector<size_t> dims = {10};
    std::vector<double> densities = {0.3};
    std::vector<double> linearities = {1.0};
    std::vector<NoiseFamily> noises = {NoiseFamily::gaussian};
    size_t n = 2000;
    size_t epochs = 5;
    size_t tasks_per_epoch = 4;
    size_t n_anchor = 256;
    size_t knn_k = 1;
    PruneConfig prune;

    void validate() const;
    nlohmann::json to_json() const;  // canonical form used for config_hash
    static OrderBenchSweep from_json(const nlohmann::json& j);
};

struct OrderBenchResult {
    ResultTable table;
    RunManifest manifest;
    // Per cell, per instance (epoch-major): learned-order divergence.
    // Exposed so seed-isolation and calibration properties are testable.
    std::vector<std::vector<double>> cell_divs;
    std::vector<std::vector<double>> cell_random_divs;
};

// Per cell: epochs x tasks_per_epoch instances at n samples each, order
// learning plus pruning, DIV/SHD/SID against the true graph aggregated as
// mean +/- std over epoch means, plus a shuffled-order DIV calibration row.
OrderBenchResult run_order_bench(const OrderBenchSweep& cfg, uint64_t seed,
                                 size_t jobs = 1);

// One decision-benchmark setting. The label defaults to the
// linear/noise-derived family name; override it for distinctly-labeled
// synthetic stand-ins of real datasets.
struct AufBenchSetting {
    AufBenchConfig gen;
    std::string label;  // empty -> derived
    size_t knn_k = 1;
    TrainConfig flow;
    OptConfig opt;
    bool run_oracle = true;  // exact-conditional pipeline, linear models only

    std::string effective_label() const;
    void validate() const;
    nlohmann::json to_json() const;
    static AufBenchSetting from_json(const nlohmann::json& j);
};

struct AufBenchResult {
    ResultTable table;
    RunManifest manifest;
    // Per-task mean true success per method, for isolation tests.
    std::vector<double> task_olem;
    std::vector<double> task_noop;
    std::vector<double> task_oracle;  // empty when the oracle is skipped
};

// Per task: observational data, one fitted pipeline, then per round a fresh
// context from the observational marginal, a decision from each method, and
// ground-truth evaluation through the true model. Methods: olem-rh, no-op
// (alterables at observational means), oracle-rh (decision search on the
// exact conditional sampler; linear models only).
AufBenchResult run_auf_bench(const AufBenchSetting& cfg, uint64_t seed,
                             size_t jobs = 1);

// Fraction of `trials` interventional simulations whose outcomes land in
// the task region.
double true_success(const StructuralModel& m, const AufTask& task,
                    const std::vector<double>& x,
                    const std::vector<double>& z_a, size_t trials,
                    uint64_t seed);

struct SachsData {
    DataMatrix data;
    Dag truth;
    std::vector<std::string> names;  // canonical, column-aligned
    nlohmann::json column_map;       // raw csv header -> column index
    size_t raw_rows = 0;
    bool log_transform = false;
    bool standardize = false;
};

// Reads the flow-cytometry CSV and the ground-truth edge list. Header names
// are normalized through an alias table (praf -> Raf and so on); malformed
// rows are reported with their 1-based line number. Row count and width are
// checked against the expected 853 x 11 and only warned about.
SachsData ingest_sachs(const std::string& csv_path,
                       const std::string& truth_path,
                       bool log_transform = false, bool standardize = false);

struct SachsBenchConfig {
    size_t runs = 10;
    size_t knn_k = 1;
    PruneConfig prune;

    void validate() const;
    nlohmann::json to_json() const;
    static SachsBenchConfig from_json(const nlohmann::json& j);
};

struct SachsBenchResult {
    ResultTable table;
    RunManifest manifest;
    std::vector<double> run_divs;  // per shuffled run
};

// Per run: shuffle rows, learn an order, prune, score DIV/SHD/SID against
// the reference graph; aggregate over runs.
SachsBenchResult run_sachs_bench(const SachsData& data,
                                 const SachsBenchConfig& cfg, uint64_t seed,
                                 size_t jobs = 1);

// Serialization. CSV renders floats at 6 significant digits under the fixed
// header, with the manifest in a leading comment line. JSON keeps full
// double precision so a round-trip reproduces the table exactly.
nlohmann::json results_to_json(const ResultTable& table,
                               const RunManifest& manifest);
std::pair<ResultTable, RunManifest> results_from_json(
    const nlohmann::json& j);
std::string results_to_csv(const ResultTable& table,
                           const RunManifest& manifest);
void emit_results(const ResultTable& table, const RunManifest& manifest,
                  const std::string& path, const std::string& format);

}  // namespace auf
