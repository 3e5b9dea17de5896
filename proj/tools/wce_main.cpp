#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "wce/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Witsenhausen counterexample solver via deterministic annealing"};
    app.require_subcommand(1);

    // anneal
    auto* anneal = app.add_subcommand("anneal", "Run the annealing pipeline");
    std::string config_path;
    anneal->add_option("--config", config_path, "Run configuration (JSON)")->required();
    std::optional<std::uint64_t> seed;
    anneal->add_option("--seed", seed, "Override the configured RNG seed");
    std::optional<std::string> out_dir;
    anneal->add_option("--out", out_dir, "Output directory");
    std::optional<int> checkpoint_every;
    anneal->add_option("--checkpoint-every", checkpoint_every,
                       "Write a checkpoint every K cooling steps");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Re-certify a stored solution");
    std::string solution_path;
    evaluate->add_option("solution", solution_path, "Solution file")->required();
    std::optional<int> grid_points;
    evaluate->add_option("--grid-points", grid_points, "Certification grid points");

    // reproduce-table
    auto* table = app.add_subcommand("reproduce-table",
                                     "Recompute the benchmark cost table");
    bool no_run = false;
    table->add_flag("--no-run", no_run, "Fail instead of running missing entries");
    std::string table_out = "results";
    table->add_option("--out", table_out, "Output/cache directory");
    std::string config_dir;
    table->add_option("--config-dir", config_dir, "Reference config directory");

    // export
    auto* exp = app.add_subcommand("export", "Export CSV data");
    std::string input_path, kind, against, export_out = "results";
    exp->add_option("input", input_path, "Solution or checkpoint file")->required();
    exp->add_option("--kind", kind, "encoder | decoder | difference | history")
        ->required();
    exp->add_option("--against", against, "Second solution for kind=difference");
    exp->add_option("--out", export_out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : wce::kExitConfig;
    }

    if (anneal->parsed())
        return wce::cmd_anneal({config_path, seed, out_dir, checkpoint_every},
                               std::cout, std::cerr);
    if (evaluate->parsed())
        return wce::cmd_evaluate({solution_path, grid_points}, std::cout, std::cerr);
    if (table->parsed())
        return wce::cmd_reproduce_table({no_run, table_out, config_dir}, std::cout,
                                        std::cerr);
    if (exp->parsed())
        return wce::cmd_export({input_path, kind, against, export_out}, std::cout,
                               std::cerr);
    return wce::kExitConfig;
}
