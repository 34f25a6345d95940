#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "retbias/common.hpp"
#include "retbias/config.hpp"
#include "retbias/pipeline.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> only;
};

void add_config_option(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("-c,--config", args.config_path, "Experiment config JSON file")
        ->required()
        ->type_name("FILE");
}

void add_only_option(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--only", args.only,
                    "Restrict to these configured query set names (repeatable)")
        ->type_name("NAME");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Retrievability bias toolkit: index a corpus, build query sets, "
                 "score document retrievability, and report inequality metrics"};
    app.set_version_flag("--version", retbias::kToolVersion);
    app.require_subcommand(1);

    CommonArgs index_args;
    CLI::App* index_cmd = app.add_subcommand("index", "Build the index snapshot from the corpus");
    add_config_option(index_cmd, index_args);

    CommonArgs gen_args;
    CLI::App* gen_cmd =
        app.add_subcommand("gen-queries", "Generate or filter the configured query sets");
    add_config_option(gen_cmd, gen_args);
    add_only_option(gen_cmd, gen_args);

    CommonArgs run_args;
    bool resume = false;
    double k1_override = -1.0, b_override = -1.0;
    std::size_t cutoff_override = 0, workers_override = 0;
    CLI::App* run_cmd =
        app.add_subcommand("run", "Score query sets against the index snapshot");
    add_config_option(run_cmd, run_args);
    add_only_option(run_cmd, run_args);
    run_cmd->add_flag("--resume", resume, "Continue from a checkpoint when one exists");
    run_cmd->add_option("--k1", k1_override, "Override the configured BM25 k1");
    run_cmd->add_option("--b", b_override, "Override the configured BM25 b");
    run_cmd->add_option("--cutoff", cutoff_override, "Override the configured rank cutoff");
    run_cmd->add_option("--workers", workers_override, "Override the configured worker count");

    CommonArgs report_args;
    std::vector<std::string> vector_files;
    CLI::App* report_cmd = app.add_subcommand(
        "report", "Write bias reports, the Lorenz plot, and correlation matrices");
    add_config_option(report_cmd, report_args);
    report_cmd->add_option("--vectors", vector_files,
                           "Report on these vector files instead of the configured ones")
        ->type_name("FILE");

    CommonArgs validate_args;
    CLI::App* validate_cmd =
        app.add_subcommand("validate-config", "Parse and validate the config, then exit");
    add_config_option(validate_cmd, validate_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*index_cmd) {
            auto cfg = retbias::load_experiment_config(index_args.config_path);
            retbias::cmd_index(cfg, std::cout);
        } else if (*gen_cmd) {
            auto cfg = retbias::load_experiment_config(gen_args.config_path);
            retbias::cmd_gen_queries(cfg, gen_args.only, std::cout);
        } else if (*run_cmd) {
            auto cfg = retbias::load_experiment_config(run_args.config_path);
            if (k1_override > 0) cfg.bm25.k1 = k1_override;
            if (b_override >= 0) cfg.bm25.b = b_override;
            if (cutoff_override > 0) {
                cfg.cutoff = cutoff_override;
                cfg.utility.c = cutoff_override;
            }
            if (workers_override > 0) cfg.workers = workers_override;
            cfg.bm25.validate();
            cfg.utility.validate();
            retbias::cmd_run(cfg, run_args.only, resume, std::cout);
        } else if (*report_cmd) {
            auto cfg = retbias::load_experiment_config(report_args.config_path);
            retbias::cmd_report(cfg, vector_files, std::cout);
        } else if (*validate_cmd) {
            auto cfg = retbias::load_experiment_config(validate_args.config_path);
            std::cout << "config OK (fingerprint " << cfg.fingerprint() << ", "
                      << cfg.query_sets.size() << " query sets)\n";
        }
    } catch (const retbias::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const retbias::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
