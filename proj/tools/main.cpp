#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "auf/harness.hpp"

namespace {

struct CommonOpts {
    std::string config;
    std::string out;
    std::string format = "csv";
    uint64_t seed = 0;
    size_t jobs = 1;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool config_required) {
    auto* c = cmd->add_option("--config", o.config, "JSON config file");
    if (config_required) c->required();
    cmd->add_option("--seed", o.seed, "master seed")->capture_default_str();
    cmd->add_option("--out", o.out, "result file path")->required();
    cmd->add_option("--format", o.format, "output format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
    cmd->add_option("--jobs", o.jobs, "worker threads")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"order-based rehearsal learning benchmarks"};
    app.require_subcommand(1);

    CommonOpts ob, ab, sc;
    std::string sachs_data = "data/sachs.csv";
    std::string sachs_truth = "data/sachs_truth.edges";
    bool log_transform = false;
    bool standardize = false;

    CLI::App* order_cmd = app.add_subcommand(
        "order-bench", "synthetic order-learning sweep (DIV/SHD/SID)");
    add_common(order_cmd, ob, true);

    CLI::App* auf_cmd = app.add_subcommand(
        "auf-bench", "decision benchmark against no-op and oracle pipelines");
    add_common(auf_cmd, ab, true);

    CLI::App* sachs_cmd = app.add_subcommand(
        "sachs", "order learning on the flow-cytometry dataset");
    add_common(sachs_cmd, sc, false);
    sachs_cmd->add_option("--data", sachs_data, "flow-cytometry CSV")
        ->capture_default_str();
    sachs_cmd->add_option("--truth", sachs_truth, "reference edge list")
        ->capture_default_str();
    sachs_cmd->add_flag("--log-transform", log_transform,
                        "log-transform all columns before learning");
    sachs_cmd->add_flag("--standardize", standardize,
                        "standardize all columns before learning");

    CLI11_PARSE(app, argc, argv);

    try {
        if (order_cmd->parsed()) {
            auto cfg = auf::OrderBenchSweep::from_json(
                auf::load_config_json(ob.config));
            auto res = auf::run_order_bench(cfg, ob.seed, ob.jobs);
            auf::emit_results(res.table, res.manifest, ob.out, ob.format);
        } else if (auf_cmd->parsed()) {
            auto cfg = auf::AufBenchSetting::from_json(
                auf::load_config_json(ab.config));
            auto res = auf::run_auf_bench(cfg, ab.seed, ab.jobs);
            auf::emit_results(res.table, res.manifest, ab.out, ab.format);
        } else if (sachs_cmd->parsed()) {
            auf::SachsBenchConfig cfg;
            if (!sc.config.empty())
                cfg = auf::SachsBenchConfig::from_json(
                    auf::load_config_json(sc.config));
            auf::SachsData data = auf::ingest_sachs(sachs_data, sachs_truth,
                                                    log_transform, standardize);
            auto res = auf::run_sachs_bench(data, cfg, sc.seed, sc.jobs);
            auf::emit_results(res.table, res.manifest, sc.out, sc.format);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
