#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "owlsim/core/json_io.hpp"
#include "owlsim/taskgen/task.hpp"

namespace owlsim::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Everything a subcommand may read. Flag > config file > default, field by field.
struct RunConfig {
    std::uint64_t seed = 0;
    std::string apps_dir = "data/apps";
    std::string pool;
    std::string out_dir = "out";
    int t_max = 15;
    int k_history = 3;
    int group_size = 8;
    std::string mode = "e2e";            // rollout/eval/pipeline: e2e | role | both
    std::string train_mode = "trpo_full";
    double tau_c = 0.75;
    double eps_clip = 0.2;
    double eps_adv = 1e-4;
    double delta = 0.1;
    std::string policy = "oracle";       // e2e policy backend
    std::string manager = "oracle";
    std::string worker = "oracle";
    std::string reflector = "oracle";
    std::string notetaker = "oracle";
    std::string critic = "oracle";
    std::string generator = "oracle";    // pipeline reasoning synthesis
    std::string checkpoint;              // parameters for "learned"
    int parallelism = 1;
    int iters = 20;
    std::optional<double> lr;            // command-specific default when unset
    int n_tasks = 20;
    int max_len = 10;
    std::string style = "explicit";
    int repeats = 1;
};

Json to_json(const RunConfig& c);
/// Overlays the keys present in `j`; unknown keys and wrong types raise ConfigError.
void apply_json(RunConfig& c, const Json& j);
/// Range checks, backend syntax, and existence of the paths the command reads.
void validate(const RunConfig& c, bool needs_pool);

struct EvalReport {
    Json json;
    std::string scaling_csv;  // empty unless a sweep ran
};

/// One judged episode per task (per repeat) under the configured policy or role backends.
EvalReport cmd_eval(const RunConfig& c, const std::vector<taskgen::TaskQuery>& pool, bool sweep);

/// Merges metrics CSVs into learning curves and a final-performance table; writes report_* files.
Json cmd_report(const std::vector<std::string>& files, const std::string& out_dir);

/// Full command line (without argv[0]). Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace owlsim::cli
