#include "wce/solution_io.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

namespace wce {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

double number_or_auto(const json& v, const std::string& where) {
    if (v.is_string()) {
        if (v.get<std::string>() == "auto") return -1.0;
        throw ConfigError(where + ": expected a number or \"auto\"");
    }
    if (!v.is_number()) throw ConfigError(where + ": expected a number or \"auto\"");
    return v.get<double>();
}

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

std::string format_sig(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

json bound_to_json(double v) {
    if (v == kInf) return "inf";
    if (v == -kInf) return "-inf";
    return v;
}

double bound_from_json(const json& v) {
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s == "inf") return kInf;
        if (s == "-inf") return -kInf;
        throw ConfigError("bad interval bound: " + s);
    }
    return v.get<double>();
}

}  // namespace

Problem RunConfig::optimize_problem() const {
    return make_problem(k, sigma_x, grid.optimize_points, grid.half_width_sigmas,
                        grid.noise_half_width, noise_std);
}

Problem RunConfig::certify_problem() const {
    return make_problem(k, sigma_x, grid.certify_points, grid.half_width_sigmas,
                        grid.noise_half_width, noise_std);
}

RunConfig parse_run_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    RunConfig cfg;
    reject_unknown_keys(root,
                        {"schema_version", "problem", "grid", "anneal", "target_steps",
                         "polish", "output_dir", "checkpoint_every"},
                        "config root");
    if (root.contains("schema_version") && root.at("schema_version").get<int>() != 1)
        throw ConfigError("unsupported config schema_version");

    if (root.contains("problem")) {
        const json& pr = root.at("problem");
        reject_unknown_keys(pr, {"k", "sigma_x", "noise_std"}, "problem");
        read_field(pr, "k", cfg.k);
        read_field(pr, "sigma_x", cfg.sigma_x);
        read_field(pr, "noise_std", cfg.noise_std);
        if (!(cfg.k > 0.0) || !(cfg.sigma_x > 0.0) || !(cfg.noise_std > 0.0))
            throw ConfigError("problem: k, sigma_x, noise_std must be positive");
    }
    if (root.contains("grid")) {
        const json& gr = root.at("grid");
        reject_unknown_keys(gr,
                            {"half_width_sigmas", "optimize_points", "certify_points",
                             "noise_half_width"},
                            "grid");
        read_field(gr, "half_width_sigmas", cfg.grid.half_width_sigmas);
        read_field(gr, "optimize_points", cfg.grid.optimize_points);
        read_field(gr, "certify_points", cfg.grid.certify_points);
        read_field(gr, "noise_half_width", cfg.grid.noise_half_width);
        for (int n : {cfg.grid.optimize_points, cfg.grid.certify_points})
            if (n < 3 || n % 2 == 0)
                throw ConfigError("grid: point counts must be odd and >= 3");
    }
    if (root.contains("anneal")) {
        const json& an = root.at("anneal");
        reject_unknown_keys(an,
                            {"T_init", "cooling_factor", "T_min", "max_models",
                             "perturb_scale", "convergence_tol", "max_inner_iters",
                             "gradient_step", "merge_tol_a", "merge_tol_b", "rng_seed",
                             "symmetry"},
                            "anneal");
        if (an.contains("T_init")) cfg.anneal.T_init = number_or_auto(an.at("T_init"), "anneal.T_init");
        if (an.contains("T_min")) cfg.anneal.T_min = number_or_auto(an.at("T_min"), "anneal.T_min");
        if (an.contains("merge_tol_b"))
            cfg.anneal.merge_tol_b = number_or_auto(an.at("merge_tol_b"), "anneal.merge_tol_b");
        read_field(an, "cooling_factor", cfg.anneal.cooling_factor);
        read_field(an, "max_models", cfg.anneal.max_models);
        read_field(an, "perturb_scale", cfg.anneal.perturb_scale);
        read_field(an, "convergence_tol", cfg.anneal.convergence_tol);
        read_field(an, "max_inner_iters", cfg.anneal.max_inner_iters);
        read_field(an, "gradient_step", cfg.anneal.gradient_step);
        read_field(an, "merge_tol_a", cfg.anneal.merge_tol_a);
        read_field(an, "rng_seed", cfg.anneal.rng_seed);
        read_field(an, "symmetry", cfg.anneal.symmetry);
        if (!(cfg.anneal.cooling_factor > 0.0 && cfg.anneal.cooling_factor < 1.0))
            throw ConfigError("anneal.cooling_factor must be in (0,1)");
        if (cfg.anneal.T_init > 0.0 && cfg.anneal.T_min > 0.0 &&
            cfg.anneal.T_min >= cfg.anneal.T_init)
            throw ConfigError("anneal.T_min must be below T_init");
    }
    if (root.contains("target_steps")) {
        const json& t = root.at("target_steps");
        if (t.is_string()) {
            if (t.get<std::string>() != "unbounded")
                throw ConfigError("target_steps: expected a count or \"unbounded\"");
            cfg.target_steps = -1;
        } else {
            cfg.target_steps = t.get<int>();
            if (cfg.target_steps < 1) throw ConfigError("target_steps must be >= 1");
        }
    }
    if (root.contains("polish")) {
        const json& po = root.at("polish");
        reject_unknown_keys(po, {"coarse_sweeps", "fine_sweeps"}, "polish");
        read_field(po, "coarse_sweeps", cfg.polish.coarse_sweeps);
        read_field(po, "fine_sweeps", cfg.polish.fine_sweeps);
    }
    read_field(root, "output_dir", cfg.output_dir);
    read_field(root, "checkpoint_every", cfg.checkpoint_every);
    cfg.anneal.target_effective_models = cfg.target_models();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str());
}

namespace {

json semantic_config_json(const RunConfig& cfg) {
    json j;
    j["problem"] = {{"k", cfg.k}, {"sigma_x", cfg.sigma_x}, {"noise_std", cfg.noise_std}};
    j["grid"] = {{"half_width_sigmas", cfg.grid.half_width_sigmas},
                 {"optimize_points", cfg.grid.optimize_points},
                 {"certify_points", cfg.grid.certify_points},
                 {"noise_half_width", cfg.grid.noise_half_width}};
    j["anneal"] = {{"T_init", cfg.anneal.T_init},
                   {"cooling_factor", cfg.anneal.cooling_factor},
                   {"T_min", cfg.anneal.T_min},
                   {"max_models", cfg.anneal.max_models},
                   {"perturb_scale", cfg.anneal.perturb_scale},
                   {"convergence_tol", cfg.anneal.convergence_tol},
                   {"max_inner_iters", cfg.anneal.max_inner_iters},
                   {"gradient_step", cfg.anneal.gradient_step},
                   {"merge_tol_a", cfg.anneal.merge_tol_a},
                   {"merge_tol_b", cfg.anneal.merge_tol_b},
                   {"rng_seed", cfg.anneal.rng_seed},
                   {"symmetry", cfg.anneal.symmetry}};
    j["target_steps"] = cfg.target_steps;
    j["polish"] = {{"coarse_sweeps", cfg.polish.coarse_sweeps},
                   {"fine_sweeps", cfg.polish.fine_sweeps}};
    return j;
}

}  // namespace

std::string config_hash(const RunConfig& cfg) {
    const std::string text = semantic_config_json(cfg).dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
}

PiecewiseAffine SolutionRecord::piecewise() const {
    PiecewiseAffine pw;
    pw.pieces = pieces;
    pw.odd_symmetric = odd_symmetric;
    return pw;
}

SolutionRecord make_record(const RunConfig& cfg, const StepSolution& sol,
                           const AnnealState& state, const Diagnostics& diag) {
    SolutionRecord rec;
    rec.k = cfg.k;
    rec.sigma_x = cfg.sigma_x;
    rec.noise_std = cfg.noise_std;
    rec.grid = cfg.grid;
    rec.pieces = sol.pw.pieces;
    rec.odd_symmetric = sol.pw.odd_symmetric;
    rec.classification = sol.label;
    rec.costs = sol.certified;
    rec.seed = cfg.anneal.rng_seed;
    rec.config_digest = config_hash(cfg);
#ifdef WCE_REVISION
    rec.revision = WCE_REVISION;
#else
    rec.revision = "unknown";
#endif
    {
        std::time_t now = std::time(nullptr);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        rec.timestamp = buf;
    }
    rec.cooling_steps = std::max<int>(0, static_cast<int>(state.history.size()) - 1);
    if (!state.history.empty()) {
        rec.final_T = state.history.back().T;
        rec.final_F = state.history.back().F;
        rec.final_D = state.history.back().D;
        rec.final_H = state.history.back().H;
    }
    rec.transitions = detect_phase_transitions(state.history);
    rec.diagnostics = diag.warnings;
    return rec;
}

namespace {

json record_to_json(const SolutionRecord& rec) {
    json j;
    j["schema_version"] = rec.schema_version;
    j["kind"] = "solution";
    j["problem"] = {{"k", rec.k}, {"sigma_x", rec.sigma_x}, {"noise_std", rec.noise_std}};
    j["grid"] = {{"half_width_sigmas", rec.grid.half_width_sigmas},
                 {"optimize_points", rec.grid.optimize_points},
                 {"certify_points", rec.grid.certify_points},
                 {"noise_half_width", rec.grid.noise_half_width}};
    json pieces = json::array();
    for (const AffinePiece& q : rec.pieces)
        pieces.push_back({{"a", q.a},
                          {"b", q.b},
                          {"x_lo", bound_to_json(q.x_lo)},
                          {"x_hi", bound_to_json(q.x_hi)}});
    j["pieces"] = pieces;
    j["odd_symmetric"] = rec.odd_symmetric;
    j["classification"] = rec.classification;
    j["costs"] = {{"stage1", rec.costs.stage1},
                  {"stage2", rec.costs.stage2},
                  {"total", rec.costs.total}};
    j["provenance"] = {{"seed", rec.seed},
                       {"config_hash", rec.config_digest},
                       {"revision", rec.revision},
                       {"timestamp", rec.timestamp}};
    json transitions = json::array();
    for (const PhaseTransition& t : rec.transitions)
        transitions.push_back({{"T", t.T}, {"from", t.old_count}, {"to", t.new_count}});
    j["history_summary"] = {{"cooling_steps", rec.cooling_steps},
                            {"final_T", rec.final_T},
                            {"final_F", rec.final_F},
                            {"final_D", rec.final_D},
                            {"final_H", rec.final_H},
                            {"transitions", transitions},
                            {"diagnostics", rec.diagnostics}};
    return j;
}

SolutionRecord record_from_json(const json& j) {
    SolutionRecord rec;
    if (!j.contains("schema_version") || j.at("schema_version").get<int>() != 1)
        throw ConfigError("solution file: unsupported or missing schema_version");
    if (j.value("kind", "solution") != "solution")
        throw ConfigError("solution file: wrong kind");
    const json& pr = j.at("problem");
    rec.k = pr.at("k").get<double>();
    rec.sigma_x = pr.at("sigma_x").get<double>();
    rec.noise_std = pr.at("noise_std").get<double>();
    const json& gr = j.at("grid");
    rec.grid.half_width_sigmas = gr.at("half_width_sigmas").get<double>();
    rec.grid.optimize_points = gr.at("optimize_points").get<int>();
    rec.grid.certify_points = gr.at("certify_points").get<int>();
    rec.grid.noise_half_width = gr.at("noise_half_width").get<double>();
    for (const json& q : j.at("pieces"))
        rec.pieces.push_back({q.at("a").get<double>(), q.at("b").get<double>(),
                              bound_from_json(q.at("x_lo")),
                              bound_from_json(q.at("x_hi"))});
    rec.odd_symmetric = j.value("odd_symmetric", false);
    rec.classification = j.value("classification", "");
    const json& co = j.at("costs");
    rec.costs = {co.at("stage1").get<double>(), co.at("stage2").get<double>(),
                 co.at("total").get<double>()};
    const json& pv = j.at("provenance");
    rec.seed = pv.at("seed").get<std::uint64_t>();
    rec.config_digest = pv.value("config_hash", "");
    rec.revision = pv.value("revision", "");
    rec.timestamp = pv.value("timestamp", "");
    if (j.contains("history_summary")) {
        const json& hs = j.at("history_summary");
        rec.cooling_steps = hs.value("cooling_steps", 0);
        rec.final_T = hs.value("final_T", 0.0);
        rec.final_F = hs.value("final_F", 0.0);
        rec.final_D = hs.value("final_D", 0.0);
        rec.final_H = hs.value("final_H", 0.0);
        if (hs.contains("transitions"))
            for (const json& t : hs.at("transitions"))
                rec.transitions.push_back({t.at("T").get<double>(),
                                           t.at("from").get<int>(),
                                           t.at("to").get<int>()});
        if (hs.contains("diagnostics"))
            rec.diagnostics = hs.at("diagnostics").get<std::vector<std::string>>();
    }
    return rec;
}

}  // namespace

std::string record_to_json_text(const SolutionRecord& rec) {
    return record_to_json(rec).dump(2) + "\n";
}

SolutionRecord record_from_json_text(const std::string& text) {
    try {
        return record_from_json(json::parse(text));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("solution file: ") + e.what());
    }
}

void write_text_atomic(const std::string& path, const std::string& text) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << text;
    }
    fs::rename(tmp, target);
}

void write_record(const std::string& path, const SolutionRecord& rec) {
    write_text_atomic(path, record_to_json_text(rec));
}

SolutionRecord read_record(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open solution file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return record_from_json_text(ss.str());
}

void write_checkpoint(const std::string& path, const RunConfig& cfg,
                      const AnnealState& state) {
    json j;
    j["schema_version"] = 1;
    j["kind"] = "checkpoint";
    j["config"] = semantic_config_json(cfg);
    j["T"] = state.T;
    json models = json::array();
    for (const LocalModel& m : state.models.models)
        models.push_back({{"a", m.a}, {"b", m.b}});
    j["models"] = models;
    j["partner"] = state.partner;
    j["assoc"] = {{"n_x", state.assoc.n_x},
                  {"n_models", state.assoc.n_models},
                  {"p", state.assoc.p}};
    j["decoder"] = state.dec.h;
    json hist = json::array();
    for (const HistoryEntry& e : state.history)
        hist.push_back({{"T", e.T},
                        {"F", e.F},
                        {"D", e.D},
                        {"H", e.H},
                        {"effective_models", e.effective_models},
                        {"live_models", e.live_models},
                        {"inner_iters", e.inner_iters},
                        {"frozen", e.duplication_frozen}});
    j["history"] = hist;
    write_text_atomic(path, j.dump(2) + "\n");
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open checkpoint file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("checkpoint file: ") + e.what());
    }
    if (j.value("kind", "") != "checkpoint")
        throw ConfigError("checkpoint file: wrong kind");
    Checkpoint cp;
    cp.config = parse_run_config(
        json{{"problem", j.at("config").at("problem")},
             {"grid", j.at("config").at("grid")}}
            .dump());
    cp.T = j.at("T").get<double>();
    for (const json& m : j.at("models"))
        cp.models.models.push_back({m.at("a").get<double>(), m.at("b").get<double>()});
    cp.partner = j.at("partner").get<std::vector<int>>();
    cp.assoc.n_x = j.at("assoc").at("n_x").get<int>();
    cp.assoc.n_models = j.at("assoc").at("n_models").get<int>();
    cp.assoc.p = j.at("assoc").at("p").get<std::vector<double>>();
    cp.dec.h = j.at("decoder").get<std::vector<double>>();
    for (const json& e : j.at("history"))
        cp.history.push_back({e.at("T").get<double>(), e.at("F").get<double>(),
                              e.at("D").get<double>(), e.at("H").get<double>(),
                              e.at("effective_models").get<int>(),
                              e.at("live_models").get<int>(),
                              e.at("inner_iters").get<int>(),
                              e.at("frozen").get<bool>()});
    return cp;
}

void export_encoder_csv(const std::string& path, const PiecewiseAffine& pw,
                        const Problem& p) {
    std::ostringstream os;
    os << "x,f,g\n";
    for (double x : p.x_grid.points) {
        const double f = pw.eval(x);
        os << format_sig(x, 12) << ',' << format_sig(f, 12) << ','
           << format_sig(f - x, 12) << '\n';
    }
    write_text_atomic(path, os.str());
}

void export_decoder_csv(const std::string& path, const DecoderTable& dec,
                        const Problem& p) {
    std::ostringstream os;
    os << "y,h\n";
    for (int l = 0; l < p.y_grid.n_points; ++l)
        os << format_sig(p.y_grid.points[l], 12) << ',' << format_sig(dec.h[l], 12)
           << '\n';
    write_text_atomic(path, os.str());
}

void export_difference_csv(const std::string& path, const DifferenceReport& rep) {
    std::ostringstream os;
    os << "x,delta_f\n";
    for (size_t i = 0; i < rep.x.size(); ++i)
        os << format_sig(rep.x[i], 12) << ',' << format_sig(rep.delta_f[i], 12) << '\n';
    write_text_atomic(path, os.str());
}

void export_history_csv(const std::string& path,
                        const std::vector<HistoryEntry>& history) {
    std::ostringstream os;
    os << "step,T,F,D,H,effective_models\n";
    for (size_t s = 0; s < history.size(); ++s)
        os << s << ',' << format_sig(history[s].T, 12) << ','
           << format_sig(history[s].F, 12) << ',' << format_sig(history[s].D, 12) << ','
           << format_sig(history[s].H, 12) << ',' << history[s].effective_models << '\n';
    write_text_atomic(path, os.str());
}

}  // namespace wce
