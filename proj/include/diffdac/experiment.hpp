#pragma once

#include "diffdac/envs.hpp"
#include "diffdac/net.hpp"
#include "diffdac/training.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace diffdac::experiment {

enum class Algorithm { DiffDac, CentAc, Tabular };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(std::string_view name);

struct TaskOverride {
    std::size_t agent = 0;
    envs::TaskParams params;
};

struct EnvConfig {
    envs::Family family = envs::Family::CartPoleBalance;
    bool use_grid = false; // "task_grid": "grid" assigns grid task k to agent k
    std::optional<envs::TaskParams> single_task_params; // replaces the family default
    std::vector<TaskOverride> task_overrides;
    envs::AngleEncoding swingup_encoding = envs::AngleEncoding::SinCos;
};

struct NetConfig {
    std::string topology = "geometric"; // geometric | ring | complete | file
    std::string preset;                 // named geometric network; overrides n/radius/seed
    std::size_t n_agents = 25;
    double radius = 0.2;
    std::uint64_t seed = 1;
    std::string file;
};

/// Tabular dual-ascent experiment on random or gridworld task sets.
struct TabularConfig {
    std::string source = "gridworld"; // gridworld | random | files
    std::size_t n_tasks = 2;
    std::size_t size = 3;      // gridworld side or number of random states
    std::size_t n_actions = 4; // random MDPs only
    double noise = 0.1;
    double discount = 0.9;
    std::vector<std::string> files;
    double step = 1.0;
    bool inverse_decay = false;
    std::size_t iters = 20000;
    double tol = 1e-6;
};

struct ExperimentConfig {
    std::string name = "experiment";
    Algorithm algorithm = Algorithm::DiffDac;
    EnvConfig env;
    NetConfig net;
    training::RunConfig run;
    TabularConfig tabular;
    std::filesystem::path output_dir = "runs";
    std::vector<std::uint64_t> seeds{1};

    /// Throws ConfigError naming the offending key.
    void validate() const;
};

/// Parses the JSON config; unknown keys are errors. Throws ConfigError.
ExperimentConfig parse_config(const std::string& json_text);
std::string serialize_config(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

/// DIFFDAC_SEED replaces the seed list, DIFFDAC_OUTPUT_DIR the output directory.
void apply_environment_overrides(ExperimentConfig& config);

std::vector<std::string> preset_names();
/// A preset expands to one or more experiments (e.g. the topology study gives three).
std::vector<ExperimentConfig> make_preset(std::string_view name);

net::Topology build_topology(const NetConfig& config);
/// Task of every agent, after grid assignment and per-agent overrides.
std::vector<envs::TaskParams> task_assignment(const ExperimentConfig& config, std::size_t n_agents);

struct SeedSummary {
    std::uint64_t seed = 0;
    std::filesystem::path directory;
    std::size_t episodes_per_agent = 0;
    double final_median = 0.0;
    bool reached_target = false;
};

/// Runs every seed, writing `<output_dir>/<name>/<algorithm>_seed<s>/` (metrics.csv,
/// checkpoints/) plus the resolved config.json, and prints one summary line per seed.
std::vector<SeedSummary> run_experiment(const ExperimentConfig& config, std::ostream& log);

// ---------------------------------------------------------------- tabular oracle

struct OracleCase {
    std::uint64_t seed = 0;
    std::size_t n_tasks = 0;
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    double error = 0.0; // ||v - v*||_inf
    std::size_t iterations = 0;
    bool passed = false;
};

struct OracleReport {
    std::vector<OracleCase> cases;
    double tolerance = 1e-2;
    bool passed() const;
};

/// Seeded task sets; `kind` is "gridworld" (2-task 3x3 noisy grids), "random"
/// (2-5 tasks, 9-25 states, 3-4 actions) or "identical" (one task repeated).
std::vector<std::vector<tabular::TabularMdp>> oracle_battery(std::string_view kind, std::size_t cases,
                                                             std::uint64_t base_seed = 1);

/// Tabular actor-critic vs value iteration on the averaged MDP of every task set.
OracleReport oracle_check(const std::vector<std::vector<tabular::TabularMdp>>& battery, double tolerance = 1e-2);

} // namespace diffdac::experiment
