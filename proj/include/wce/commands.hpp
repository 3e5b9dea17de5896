#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

#include "wce/solution_io.hpp"

namespace wce {

// Process exit codes shared by the CLI commands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;
inline constexpr int kExitCacheMiss = 4;

struct RunOutcome {
    StepSolution solution;
    AnnealState state;
    SolutionRecord record;
    Diagnostics diag;
};

/// Full pipeline: anneal, harden, polish (coarse then certification grids).
RunOutcome run_pipeline(const RunConfig& cfg);

struct AnnealArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed_override;
    std::optional<std::string> out_dir_override;
    std::optional<int> checkpoint_every_override;
};
int cmd_anneal(const AnnealArgs& args, std::ostream& out, std::ostream& err);

struct EvaluateArgs {
    std::string solution_path;
    std::optional<int> grid_points;
};
int cmd_evaluate(const EvaluateArgs& args, std::ostream& out, std::ostream& err);

struct ReproduceArgs {
    bool no_run = false;
    std::string out_dir = "results";
    std::string config_dir;  // defaults to the bundled configs
};
int cmd_reproduce_table(const ReproduceArgs& args, std::ostream& out,
                        std::ostream& err);

struct ExportArgs {
    std::string input_path;
    std::string kind;  // encoder | decoder | difference | history
    std::string against_path;  // second solution for kind=difference
    std::string out_dir = "results";
};
int cmd_export(const ExportArgs& args, std::ostream& out, std::ostream& err);

/// Row of the result table: achieved cost vs the reference value.
struct TableRow {
    std::string name;
    double achieved = 0.0;
    double reference = 0.0;
    double limit = 0.0;  // reference + tolerance; achieved must not exceed
    bool from_cache = false;
};

}  // namespace wce
