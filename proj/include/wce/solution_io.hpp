#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "wce/annealer.hpp"
#include "wce/extraction.hpp"
#include "wce/problem.hpp"

namespace wce {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GridConfig {
    double half_width_sigmas = 12.0;
    int optimize_points = 12001;
    int certify_points = 48001;
    double noise_half_width = 10.0;
};

struct PolishConfig {
    int coarse_sweeps = 200;
    int fine_sweeps = 6;
};

struct RunConfig {
    double k = 0.2;
    double sigma_x = 5.0;
    double noise_std = 1.0;
    GridConfig grid;
    AnnealConfig anneal;
    int target_steps = 3;  // -1: unbounded
    PolishConfig polish;
    std::string output_dir = "results";
    int checkpoint_every = 0;

    Problem optimize_problem() const;
    Problem certify_problem() const;
    /// Effective-model target handed to the annealer (2 models per step).
    int target_models() const { return target_steps < 0 ? 0 : 2 * target_steps; }
};

/// Strict parse: unknown keys anywhere are rejected with a precise path.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

/// FNV-1a over the canonical serialization of the semantically meaningful
/// fields (everything except output locations and checkpoint cadence).
std::string config_hash(const RunConfig& cfg);

struct SolutionRecord {
    int schema_version = 1;
    double k = 0.2, sigma_x = 5.0, noise_std = 1.0;
    GridConfig grid;
    std::vector<AffinePiece> pieces;
    bool odd_symmetric = false;
    std::string classification;
    CostReport costs;
    std::uint64_t seed = 0;
    std::string config_digest;
    std::string revision;
    std::string timestamp;
    int cooling_steps = 0;
    double final_T = 0.0, final_F = 0.0, final_D = 0.0, final_H = 0.0;
    std::vector<PhaseTransition> transitions;
    std::vector<std::string> diagnostics;

    PiecewiseAffine piecewise() const;
};

SolutionRecord make_record(const RunConfig& cfg, const StepSolution& sol,
                           const AnnealState& state, const Diagnostics& diag);

/// Serialized payload with deterministic key order and float formatting;
/// the timestamp is the only field that differs between identical runs.
std::string record_to_json_text(const SolutionRecord& rec);
SolutionRecord record_from_json_text(const std::string& text);

void write_record(const std::string& path, const SolutionRecord& rec);
SolutionRecord read_record(const std::string& path);

/// Soft-state snapshot: solution-record fields plus the association matrix
/// and temperature.
void write_checkpoint(const std::string& path, const RunConfig& cfg,
                      const AnnealState& state);

struct Checkpoint {
    double T = 0.0;
    ModelSet models;
    std::vector<int> partner;
    AssociationMatrix assoc;
    DecoderTable dec;
    std::vector<HistoryEntry> history;
    RunConfig config;
};
Checkpoint read_checkpoint(const std::string& path);

// CSV exports: comma-separated, header row, LF endings, 12 significant digits.
void export_encoder_csv(const std::string& path, const PiecewiseAffine& pw,
                        const Problem& p);
void export_decoder_csv(const std::string& path, const DecoderTable& dec,
                        const Problem& p);
void export_difference_csv(const std::string& path, const DifferenceReport& rep);
void export_history_csv(const std::string& path,
                        const std::vector<HistoryEntry>& history);

/// Atomic text write (temp file + rename).
void write_text_atomic(const std::string& path, const std::string& text);

}  // namespace wce
