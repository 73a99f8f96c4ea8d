#pragma once

#include "diffdac/envs.hpp"
#include "diffdac/net.hpp"
#include "diffdac/nn.hpp"
#include "diffdac/random.hpp"
#include "diffdac/stats.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace diffdac::training {

using nn::Matrix;
using nn::Vector;

enum class Optimizer { Adam, Sgd };

/// Bonus adds +coeff * H to the actor objective (loss gets -coeff * H); Penalty flips it.
enum class EntropySign { Bonus, Penalty };

/// Learning-rate sequence indexed by the 1-based learning step.
struct RateSchedule {
    enum class Kind { Constant, InverseDecay };
    double base = 0.0;
    Kind kind = Kind::Constant;

    double at(std::size_t step) const;
};

struct RunConfig {
    std::size_t max_episodes = 3000; // per agent
    int max_steps = 200;
    RateSchedule critic_rate{0.01};
    RateSchedule actor_rate{0.001};
    std::size_t episodes_per_step = 5;
    double discount = 0.99;
    double entropy_coeff = 0.0005;
    EntropySign entropy_sign = EntropySign::Bonus;
    Optimizer optimizer = Optimizer::Adam;
    bool gauss_seidel = false;
    std::vector<std::size_t> hidden{400, 400};
    double min_variance = 1e-6;
    bool identical_init = false; // every agent starts from agent 0's initialization

    std::size_t eval_every = 20; // episodes per agent; 0 evaluates only at the end
    std::size_t eval_episodes = 10;
    bool eval_designated = true;
    std::size_t checkpoint_every = 0; // episodes per agent; 0 = at every evaluation point
    std::optional<double> target_return;

    std::uint64_t seed = 1;
    std::size_t workers = 1;

    /// Throws ConfigError. Includes the actor-rate <= critic-rate check over every
    /// learning step the run can reach.
    void validate() const;
    std::size_t learning_steps() const;
    double signed_entropy_coeff() const;
};

/// One networked learner owning one task.
struct Agent {
    std::size_t index = 0;
    envs::TaskParams task;
    std::shared_ptr<const envs::Environment> env;
    nn::MlpParams critic;
    nn::GaussianPolicyHead actor;
    nn::AdamState critic_opt;
    nn::AdamState actor_opt;
    std::vector<std::pair<std::size_t, double>> neighbors; // (l, c_lk)
    Rng rng;
};

/// Random streams derived from the run seed, so that independent purposes never share draws.
enum class Stream : std::uint64_t { Init = 0, Rollout = 1, Eval = 2 };

Agent make_agent(std::size_t index, const envs::TaskParams& task, const envs::EnvOptions& env_options,
                 const RunConfig& config, std::vector<std::pair<std::size_t, double>> neighbors);

struct Transition {
    Vector observation;
    double action = 0.0;
    double reward = 0.0;
    Vector next_observation;
};

struct Trajectory {
    std::vector<Transition> steps;
    bool terminal = false;
    double total_reward() const;
};

/// Samples one episode from the actor; stops at a terminal state or after `max_steps`.
Trajectory rollout(const nn::GaussianPolicyHead& actor, const envs::Environment& env, Rng& rng, int max_steps,
                   std::optional<envs::EnvState> initial = std::nullopt);
Trajectory rollout(Agent& agent, int max_steps);

/// y_t = r_{t+1} + gamma * y_{t+1}, with zero after the final step.
std::vector<double> mc_returns(std::span<const double> rewards, double discount);
std::vector<double> mc_returns(const Trajectory& trajectory, double discount);

/// Union of trajectories collected since the last learning step.
struct SampleBatch {
    Matrix states; // one column per sample
    std::vector<double> actions;
    std::vector<double> returns;
    std::size_t size() const { return actions.size(); }
};

SampleBatch make_batch(std::span<const Trajectory> trajectories, double discount, std::size_t obs_dim);

/// A_t = y_t - v(s_t).
std::vector<double> advantage_estimates(const SampleBatch& batch, const nn::MlpParams& critic);

/// Gradient of 0.5 * (y - v(s))^2 for one sample, formed as (v(s) - y) * grad v(s).
nn::MlpParams critic_sample_gradient(const nn::MlpParams& critic, const Vector& state, double target);

/// J = (1 / 2|M|) * sum_t (y_t - v(s_t))^2 and its gradient.
nn::ValueAndGradient critic_loss(const nn::MlpParams& critic, const SampleBatch& batch);

/// (1/|M|) * sum_t [A_t log pi(a_t|s_t) + entropy_coeff * H(pi(.|s_t))] and its gradient.
/// Advantages are constants.
nn::ValueAndGradient actor_objective(const nn::GaussianPolicyHead& actor, const SampleBatch& batch,
                                     std::span<const double> advantages, double entropy_coeff);

/// Adaptation steps. They advance the agent's optimizer state but leave its parameters
/// untouched; the returned flat vectors are the intermediate estimates.
Vector critic_adapt(Agent& agent, const SampleBatch& batch, double rate, Optimizer optimizer);
Vector actor_adapt(Agent& agent, const SampleBatch& batch, std::span<const double> advantages, double rate,
                   double entropy_coeff, Optimizer optimizer);

/// sum_l weights_l * params_l. Throws ShapeError on mismatched lengths and ArgumentError
/// when the weights do not sum to 1 within 1e-10.
Vector combine(std::span<const Vector* const> params, std::span<const double> weights);

// ---------------------------------------------------------------- evaluation and metrics

struct TaskReport {
    int task_id = -1;
    std::vector<double> returns;
    double mean = 0.0;
    Quartiles spread;
};

struct EvalReport {
    std::vector<TaskReport> tasks;
    double mean = 0.0; // across task means
    Quartiles spread;  // across task means
};

/// Runs each task for `n_episodes` with the actor's mean action and reports undiscounted returns.
EvalReport evaluate(const nn::GaussianPolicyHead& actor, std::span<const envs::TaskParams> tasks,
                    const envs::EnvOptions& env_options, std::size_t n_episodes, Rng& rng);

/// One CSV row. agent_id / task_id of -1 mark aggregates: (-1, -1) summarizes the
/// per-agent rows; (0, -1) is agent 0's policy run on every distinct task.
struct MetricsRow {
    std::size_t epoch = 0;
    std::size_t episodes_per_agent = 0;
    int agent_id = 0;
    int task_id = 0;
    double return_mean = 0.0;
    double return_median = 0.0;
    double return_q1 = 0.0;
    double return_q3 = 0.0;
    double param_disagreement = 0.0;

    bool operator==(const MetricsRow&) const = default;
};

inline constexpr const char* kMetricsHeader =
    "epoch,episodes_per_agent,agent_id,task_id,return_mean,return_median,return_q1,return_q3,param_disagreement";

std::string format_metrics(std::span<const MetricsRow> rows);
std::vector<MetricsRow> parse_metrics(const std::string& csv);
void write_metrics_csv(std::span<const MetricsRow> rows, const std::filesystem::path& path);
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

/// Max over agents of the sup-norm distance to the mean parameter vector.
double param_disagreement(std::span<const Vector> params);

// ---------------------------------------------------------------- runners

struct AgentParams {
    Vector critic;
    Vector actor;
};

struct RunResult {
    std::vector<MetricsRow> metrics;
    std::vector<AgentParams> final_params;
    std::size_t episodes_per_agent = 0;
    std::size_t learning_steps = 0;
    bool reached_target = false;
};

struct RunOutputs {
    std::optional<std::filesystem::path> directory; // metrics.csv + checkpoints/ when set
};

/// Synchronous diffusion actor-critic over a fixed network.
class DiffDac {
public:
    /// `assignment[k]` is agent k's task. Throws ConfigError / ArgumentError on invalid input.
    DiffDac(RunConfig config, net::CombinationMatrix combination, std::vector<envs::TaskParams> assignment,
            envs::EnvOptions env_options = {});

    /// One learning step: rollouts, adaptation, barrier, combination.
    void learning_step();
    std::vector<MetricsRow> evaluate_now();
    RunResult run(const RunOutputs& outputs = {});

    const std::vector<Agent>& agents() const { return agents_; }
    std::vector<Agent>& agents() { return agents_; }
    std::size_t episodes_per_agent() const { return episodes_; }
    std::size_t steps_taken() const { return step_; }
    std::vector<AgentParams> snapshot() const;

private:
    void combine_critics(const std::vector<Vector>& intermediate);
    void combine_actors(const std::vector<Vector>& intermediate);

    RunConfig config_;
    net::CombinationMatrix combination_;
    std::vector<envs::TaskParams> assignment_;
    envs::EnvOptions env_options_;
    std::vector<Agent> agents_;
    std::size_t episodes_ = 0;
    std::size_t step_ = 0;
};

/// Centralized baseline: one critic/actor pair fed by every task each learning step.
class CentAc {
public:
    CentAc(RunConfig config, std::vector<envs::TaskParams> tasks, envs::EnvOptions env_options = {});

    void learning_step();
    std::vector<MetricsRow> evaluate_now();
    RunResult run(const RunOutputs& outputs = {});

    const Agent& learner() const { return learner_; }
    std::size_t episodes_per_task() const { return episodes_; }
    AgentParams snapshot() const;

private:
    RunConfig config_;
    std::vector<envs::TaskParams> tasks_;
    envs::EnvOptions env_options_;
    Agent learner_;
    std::vector<std::shared_ptr<const envs::Environment>> envs_;
    std::vector<Rng> rngs_; // one rollout stream per task
    std::size_t episodes_ = 0;
    std::size_t step_ = 0;
};

RunResult diffdac_run(const RunConfig& config, const net::CombinationMatrix& combination,
                      std::vector<envs::TaskParams> assignment, const envs::EnvOptions& env_options = {},
                      const RunOutputs& outputs = {});
RunResult cent_ac_run(const RunConfig& config, std::vector<envs::TaskParams> tasks,
                      const envs::EnvOptions& env_options = {}, const RunOutputs& outputs = {});

} // namespace diffdac::training
