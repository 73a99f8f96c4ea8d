#include "diffdac/training.hpp"

#include "diffdac/errors.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

namespace diffdac::training {

namespace {

constexpr std::uint64_t kDesignatedEvalId = 1'000'000;

// Runs fn(0..n-1) on up to `workers` threads. Every index runs to completion; the
// exception of the lowest failing index is rethrown, so the outcome does not depend
// on scheduling.
template <class F>
void parallel_for(std::size_t n, std::size_t workers, F&& fn) {
    std::vector<std::exception_ptr> errors(n);
    auto body = [&](std::size_t k) {
        try {
            fn(k);
        } catch (...) {
            errors[k] = std::current_exception();
        }
    };
    const std::size_t w = std::min(std::max<std::size_t>(workers, 1), std::max<std::size_t>(n, 1));
    if (w <= 1) {
        for (std::size_t k = 0; k < n; ++k) body(k);
    } else {
        std::vector<std::jthread> threads;
        threads.reserve(w);
        for (std::size_t t = 0; t < w; ++t)
            threads.emplace_back([&, t] {
                for (std::size_t k = t; k < n; k += w) body(k);
            });
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

void require_finite(const Vector& g, const std::string& what) {
    if (!g.allFinite()) throw NumericError(what);
}

std::string format_number(double v) {
    std::ostringstream os;
    os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
    return os.str();
}

MetricsRow summary_row(std::size_t epoch, std::size_t episodes, int agent, int task, std::span<const double> xs,
                       double disagreement) {
    const auto q = quartiles(xs);
    return {epoch, episodes, agent, task, mean(xs), q.median, q.q1, q.q3, disagreement};
}

void write_checkpoint(const std::filesystem::path& dir, std::size_t k, const nn::MlpParams& critic,
                      const nn::MlpParams& actor) {
    std::filesystem::create_directories(dir);
    nn::save_params(critic, dir / ("agent" + std::to_string(k) + "_critic.txt"));
    nn::save_params(actor, dir / ("agent" + std::to_string(k) + "_actor.txt"));
}

std::filesystem::path checkpoint_dir(const std::filesystem::path& root, std::size_t episodes) {
    return root / "checkpoints" / ("ep" + std::to_string(episodes));
}

// Episodes gathered by the next learning step; the last step may be short.
std::size_t episodes_in_step(const RunConfig& config, std::size_t done) {
    const std::size_t remaining = done < config.max_episodes ? config.max_episodes - done : 0;
    return remaining == 0 ? config.episodes_per_step : std::min(config.episodes_per_step, remaining);
}

bool checkpoint_due(const RunConfig& config, std::size_t episodes, bool at_eval, bool final) {
    if (final) return true;
    if (config.checkpoint_every == 0) return at_eval;
    return episodes % config.checkpoint_every == 0;
}

} // namespace

// ---------------------------------------------------------------- configuration

double RateSchedule::at(std::size_t step) const {
    switch (kind) {
    case Kind::Constant: return base;
    case Kind::InverseDecay: return base / static_cast<double>(std::max<std::size_t>(step, 1));
    }
    return base;
}

std::size_t RunConfig::learning_steps() const {
    return episodes_per_step == 0 ? 0 : (max_episodes + episodes_per_step - 1) / episodes_per_step;
}

double RunConfig::signed_entropy_coeff() const {
    return entropy_sign == EntropySign::Bonus ? entropy_coeff : -entropy_coeff;
}

void RunConfig::validate() const {
    if (max_episodes == 0) throw ConfigError("run.max_episodes", "must be positive");
    if (max_steps <= 0) throw ConfigError("run.max_steps", "must be positive");
    if (!(discount >= 0.0 && discount < 1.0)) throw ConfigError("run.discount", "must lie in [0, 1)");
    if (episodes_per_step == 0) throw ConfigError("run.episodes_per_step", "must be positive");
    if (!(critic_rate.base >= 0.0)) throw ConfigError("run.critic_rate", "must be nonnegative");
    if (!(actor_rate.base >= 0.0)) throw ConfigError("run.actor_rate", "must be nonnegative");
    for (std::size_t i = 1; i <= learning_steps(); ++i)
        if (actor_rate.at(i) > critic_rate.at(i))
            throw ConfigError("run.actor_rate",
                              "actor rate exceeds critic rate at learning step " + std::to_string(i));
    if (!(entropy_coeff >= 0.0)) throw ConfigError("run.entropy_coeff", "must be nonnegative");
    if (hidden.empty()) throw ConfigError("run.hidden", "needs at least one hidden layer");
    for (auto h : hidden)
        if (h == 0) throw ConfigError("run.hidden", "layer widths must be positive");
    if (!(min_variance >= 0.0)) throw ConfigError("run.min_variance", "must be nonnegative");
    if (eval_every % episodes_per_step != 0)
        throw ConfigError("run.eval_every", "must be a multiple of episodes_per_step");
    if (checkpoint_every % episodes_per_step != 0)
        throw ConfigError("run.checkpoint_every", "must be a multiple of episodes_per_step");
    if (eval_episodes == 0) throw ConfigError("run.eval_episodes", "must be positive");
}

// ---------------------------------------------------------------- agents and rollouts

Agent make_agent(std::size_t index, const envs::TaskParams& task, const envs::EnvOptions& env_options,
                 const RunConfig& config, std::vector<std::pair<std::size_t, double>> neighbors) {
    Agent agent;
    agent.index = index;
    agent.task = task;
    agent.env = envs::make_environment(task, env_options);
    const std::size_t obs_dim = agent.env->observation_dim();

    Rng init = make_rng({config.seed, config.identical_init ? 0 : index, std::uint64_t(Stream::Init)});
    std::vector<std::size_t> sizes{obs_dim};
    sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
    sizes.push_back(1);
    agent.critic = nn::make_mlp(sizes, nn::Activation::Relu, nn::Activation::Linear, init);
    agent.actor = nn::make_gaussian_head(config.hidden, obs_dim, agent.env->action_bound(), config.min_variance, init);
    agent.critic_opt = nn::AdamState(agent.critic.parameter_count());
    agent.actor_opt = nn::AdamState(agent.actor.backbone.parameter_count());
    agent.neighbors = std::move(neighbors);
    agent.rng = make_rng({config.seed, index, std::uint64_t(Stream::Rollout)});
    return agent;
}

double Trajectory::total_reward() const {
    double total = 0.0;
    for (const auto& s : steps) total += s.reward;
    return total;
}

Trajectory rollout(const nn::GaussianPolicyHead& actor, const envs::Environment& env, Rng& rng, int max_steps,
                   std::optional<envs::EnvState> initial) {
    Trajectory traj;
    if (max_steps <= 0) return traj;
    envs::EnvState state = initial ? std::move(*initial) : env.reset(rng);
    Vector obs = env.observe(state);
    for (int t = 0; t < max_steps; ++t) {
        const double action = nn::sample_action(actor, obs, rng);
        auto out = env.step(state, action);
        Vector next_obs = env.observe(out.next);
        traj.steps.push_back({obs, action, out.reward, next_obs});
        state = std::move(out.next);
        obs = std::move(next_obs);
        if (out.terminal) {
            traj.terminal = true;
            break;
        }
    }
    return traj;
}

Trajectory rollout(Agent& agent, int max_steps) {
    try {
        return rollout(agent.actor, *agent.env, agent.rng, max_steps);
    } catch (const NumericError& e) {
        throw NumericError("agent " + std::to_string(agent.index) + ": " + e.what());
    }
}

std::vector<double> mc_returns(std::span<const double> rewards, double discount) {
    std::vector<double> out(rewards.size());
    double acc = 0.0;
    for (std::size_t t = rewards.size(); t-- > 0;) {
        acc = rewards[t] + discount * acc;
        out[t] = acc;
    }
    return out;
}

std::vector<double> mc_returns(const Trajectory& trajectory, double discount) {
    std::vector<double> rewards;
    rewards.reserve(trajectory.steps.size());
    for (const auto& s : trajectory.steps) rewards.push_back(s.reward);
    return mc_returns(rewards, discount);
}

SampleBatch make_batch(std::span<const Trajectory> trajectories, double discount, std::size_t obs_dim) {
    std::size_t total = 0;
    for (const auto& t : trajectories) total += t.steps.size();
    SampleBatch batch;
    batch.states.resize(static_cast<Eigen::Index>(obs_dim), static_cast<Eigen::Index>(total));
    batch.actions.reserve(total);
    batch.returns.reserve(total);
    Eigen::Index col = 0;
    for (const auto& t : trajectories) {
        const auto ys = mc_returns(t, discount);
        for (std::size_t i = 0; i < t.steps.size(); ++i) {
            if (static_cast<std::size_t>(t.steps[i].observation.size()) != obs_dim)
                throw ShapeError("trajectory observation size differs from the batch");
            batch.states.col(col++) = t.steps[i].observation;
            batch.actions.push_back(t.steps[i].action);
            batch.returns.push_back(ys[i]);
        }
    }
    return batch;
}

std::vector<double> advantage_estimates(const SampleBatch& batch, const nn::MlpParams& critic) {
    std::vector<double> adv(batch.size());
    if (batch.size() == 0) return adv;
    const Matrix values = nn::forward_batch(critic, batch.states);
    for (std::size_t t = 0; t < batch.size(); ++t) adv[t] = batch.returns[t] - values(0, static_cast<Eigen::Index>(t));
    return adv;
}

// ---------------------------------------------------------------- gradients

nn::MlpParams critic_sample_gradient(const nn::MlpParams& critic, const Vector& state, double target) {
    const nn::ForwardTrace trace = nn::forward_trace(critic, state);
    const double value = trace.output()(0, 0);
    nn::MlpParams grad = nn::backward_batch(critic, trace, Matrix::Ones(1, 1));
    grad.set_flat((value - target) * grad.flat());
    return grad;
}

nn::ValueAndGradient critic_loss(const nn::MlpParams& critic, const SampleBatch& batch) {
    if (batch.size() == 0) return {0.0, critic.zeros_like()};
    const nn::ForwardTrace trace = nn::forward_trace(critic, batch.states);
    const double inv = 1.0 / static_cast<double>(batch.size());
    Matrix upstream(1, static_cast<Eigen::Index>(batch.size()));
    double loss = 0.0;
    for (std::size_t t = 0; t < batch.size(); ++t) {
        const auto col = static_cast<Eigen::Index>(t);
        const double residual = trace.output()(0, col) - batch.returns[t];
        loss += 0.5 * residual * residual;
        upstream(0, col) = residual * inv;
    }
    return {loss * inv, nn::backward_batch(critic, trace, upstream)};
}

nn::ValueAndGradient actor_objective(const nn::GaussianPolicyHead& actor, const SampleBatch& batch,
                                     std::span<const double> advantages, double entropy_coeff) {
    if (advantages.size() != batch.size()) throw ShapeError("one advantage per sample expected");
    if (batch.size() == 0) return {0.0, actor.backbone.zeros_like()};
    const double inv = 1.0 / static_cast<double>(batch.size());
    std::vector<double> weights(advantages.begin(), advantages.end());
    for (auto& w : weights) w *= inv;
    auto out = nn::policy_objective(actor, batch.states, batch.actions, weights, entropy_coeff * inv);
    return out;
}

Vector critic_adapt(Agent& agent, const SampleBatch& batch, double rate, Optimizer optimizer) {
    Vector params = agent.critic.flat();
    if (batch.size() == 0) return params;
    const Vector grad = critic_loss(agent.critic, batch).gradient.flat();
    require_finite(grad, "agent " + std::to_string(agent.index) + ": non-finite critic gradient");
    if (optimizer == Optimizer::Adam)
        nn::adam_step(agent.critic_opt, params, grad, rate);
    else
        nn::sgd_step(params, grad, rate);
    return params;
}

Vector actor_adapt(Agent& agent, const SampleBatch& batch, std::span<const double> advantages, double rate,
                   double entropy_coeff, Optimizer optimizer) {
    Vector params = agent.actor.backbone.flat();
    if (batch.size() == 0) return params;
    // Ascent on the objective is descent on its negation.
    const Vector grad = -actor_objective(agent.actor, batch, advantages, entropy_coeff).gradient.flat();
    require_finite(grad, "agent " + std::to_string(agent.index) + ": non-finite actor gradient");
    if (optimizer == Optimizer::Adam)
        nn::adam_step(agent.actor_opt, params, grad, rate);
    else
        nn::sgd_step(params, grad, rate);
    return params;
}

Vector combine(std::span<const Vector* const> params, std::span<const double> weights) {
    if (params.empty()) throw ArgumentError("nothing to combine");
    if (params.size() != weights.size()) throw ShapeError("one weight per parameter vector expected");
    double total = 0.0;
    for (double w : weights) total += w;
    if (std::abs(total - 1.0) > 1e-10) throw ArgumentError("combination weights do not sum to 1");
    const auto n = params.front()->size();
    for (const auto* p : params)
        if (p->size() != n) throw ShapeError("parameter vectors to combine differ in length");
    Vector out = weights[0] * *params[0];
    for (std::size_t i = 1; i < params.size(); ++i) out += weights[i] * *params[i];
    return out;
}

// ---------------------------------------------------------------- evaluation and metrics

EvalReport evaluate(const nn::GaussianPolicyHead& actor, std::span<const envs::TaskParams> tasks,
                    const envs::EnvOptions& env_options, std::size_t n_episodes, Rng& rng) {
    if (n_episodes == 0) throw ArgumentError("evaluation needs at least one episode");
    if (tasks.empty()) throw ArgumentError("evaluation needs at least one task");
    EvalReport report;
    std::vector<double> means;
    for (const auto& task : tasks) {
        const auto env = envs::make_environment(task, env_options);
        TaskReport tr;
        tr.task_id = task.task_id;
        for (std::size_t e = 0; e < n_episodes; ++e) {
            envs::EnvState state = env->reset(rng);
            double total = 0.0;
            for (int t = 0; t < env->max_steps(); ++t) {
                const auto m = nn::gaussian_moments(actor, env->observe(state));
                auto out = env->step(state, m.mean);
                total += out.reward;
                state = std::move(out.next);
                if (out.terminal) break;
            }
            tr.returns.push_back(total);
        }
        tr.mean = mean(tr.returns);
        tr.spread = quartiles(tr.returns);
        means.push_back(tr.mean);
        report.tasks.push_back(std::move(tr));
    }
    report.mean = mean(means);
    report.spread = quartiles(means);
    return report;
}

double param_disagreement(std::span<const Vector> params) {
    if (params.empty()) return 0.0;
    Vector avg = Vector::Zero(params.front().size());
    for (const auto& p : params) avg += p;
    avg /= static_cast<double>(params.size());
    double worst = 0.0;
    for (const auto& p : params) worst = std::max(worst, (p - avg).lpNorm<Eigen::Infinity>());
    return worst;
}

std::string format_metrics(std::span<const MetricsRow> rows) {
    std::ostringstream os;
    os << kMetricsHeader << "\n";
    for (const auto& r : rows)
        os << r.epoch << ',' << r.episodes_per_agent << ',' << r.agent_id << ',' << r.task_id << ','
           << format_number(r.return_mean) << ',' << format_number(r.return_median) << ','
           << format_number(r.return_q1) << ',' << format_number(r.return_q3) << ','
           << format_number(r.param_disagreement) << "\n";
    return os.str();
}

std::vector<MetricsRow> parse_metrics(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) || line != kMetricsHeader)
        throw ConfigError("metrics", "header does not match the metrics schema");
    std::vector<MetricsRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.size() != 9) throw ConfigError("metrics:" + std::to_string(lineno), "expected 9 columns");
        try {
            MetricsRow r;
            r.epoch = std::stoull(cells[0]);
            r.episodes_per_agent = std::stoull(cells[1]);
            r.agent_id = std::stoi(cells[2]);
            r.task_id = std::stoi(cells[3]);
            r.return_mean = std::stod(cells[4]);
            r.return_median = std::stod(cells[5]);
            r.return_q1 = std::stod(cells[6]);
            r.return_q3 = std::stod(cells[7]);
            r.param_disagreement = std::stod(cells[8]);
            rows.push_back(r);
        } catch (const std::exception&) {
            throw ConfigError("metrics:" + std::to_string(lineno), "malformed number");
        }
    }
    return rows;
}

void write_metrics_csv(std::span<const MetricsRow> rows, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ConfigError(path.string(), "cannot write metrics");
    out << format_metrics(rows);
}

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string(), "cannot open metrics");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_metrics(buf.str());
}

// ---------------------------------------------------------------- Diff-DAC

DiffDac::DiffDac(RunConfig config, net::CombinationMatrix combination, std::vector<envs::TaskParams> assignment,
                 envs::EnvOptions env_options)
    : config_(std::move(config)), combination_(std::move(combination)), assignment_(std::move(assignment)),
      env_options_(env_options) {
    config_.validate();
    if (assignment_.size() != combination_.size())
        throw ArgumentError("one task per agent expected: " + std::to_string(assignment_.size()) + " tasks for " +
                            std::to_string(combination_.size()) + " agents");
    env_options_.max_steps = config_.max_steps;
    agents_.reserve(assignment_.size());
    for (std::size_t k = 0; k < assignment_.size(); ++k)
        agents_.push_back(make_agent(k, assignment_[k], env_options_, config_, combination_.incoming(k)));
    for (const auto& a : agents_)
        if (a.env->observation_dim() != agents_.front().env->observation_dim())
            throw ArgumentError("all agents must share the observation space");
}

void DiffDac::combine_critics(const std::vector<Vector>& intermediate) {
    parallel_for(agents_.size(), config_.workers, [&](std::size_t k) {
        auto& agent = agents_[k];
        std::vector<const Vector*> ps;
        std::vector<double> ws;
        for (const auto& [l, c] : agent.neighbors) {
            ps.push_back(&intermediate[l]);
            ws.push_back(c);
        }
        agent.critic.set_flat(combine(ps, ws));
    });
}

void DiffDac::combine_actors(const std::vector<Vector>& intermediate) {
    parallel_for(agents_.size(), config_.workers, [&](std::size_t k) {
        auto& agent = agents_[k];
        std::vector<const Vector*> ps;
        std::vector<double> ws;
        for (const auto& [l, c] : agent.neighbors) {
            ps.push_back(&intermediate[l]);
            ws.push_back(c);
        }
        agent.actor.backbone.set_flat(combine(ps, ws));
    });
}

void DiffDac::learning_step() {
    const std::size_t n = agents_.size();
    const std::size_t n_ep = episodes_in_step(config_, episodes_);
    const double alpha = config_.critic_rate.at(step_ + 1);
    const double beta = config_.actor_rate.at(step_ + 1);
    const double entropy = config_.signed_entropy_coeff();

    std::vector<SampleBatch> batches(n);
    std::vector<Vector> critic_hat(n), actor_hat(n);
    // Adaptation: each agent works on its own data only.
    parallel_for(n, config_.workers, [&](std::size_t k) {
        auto& agent = agents_[k];
        std::vector<Trajectory> trajs;
        for (std::size_t e = 0; e < n_ep; ++e) trajs.push_back(rollout(agent, config_.max_steps));
        batches[k] = make_batch(trajs, config_.discount, agent.env->observation_dim());
        const auto adv = advantage_estimates(batches[k], agent.critic);
        critic_hat[k] = critic_adapt(agent, batches[k], alpha, config_.optimizer);
        if (!config_.gauss_seidel)
            actor_hat[k] = actor_adapt(agent, batches[k], adv, beta, entropy, config_.optimizer);
    });
    // Barrier passed: combine from the published intermediate estimates.
    combine_critics(critic_hat);
    if (config_.gauss_seidel) {
        parallel_for(n, config_.workers, [&](std::size_t k) {
            auto& agent = agents_[k];
            const auto adv = advantage_estimates(batches[k], agent.critic);
            actor_hat[k] = actor_adapt(agent, batches[k], adv, beta, entropy, config_.optimizer);
        });
    }
    combine_actors(actor_hat);
    episodes_ += n_ep;
    ++step_;
}

std::vector<AgentParams> DiffDac::snapshot() const {
    std::vector<AgentParams> out;
    for (const auto& a : agents_) out.push_back({a.critic.flat(), a.actor.backbone.flat()});
    return out;
}

std::vector<MetricsRow> DiffDac::evaluate_now() {
    const std::size_t n = agents_.size();
    const std::size_t epoch = episodes_ / config_.episodes_per_step;

    std::vector<Vector> stacked;
    for (const auto& p : snapshot()) {
        Vector joint(p.critic.size() + p.actor.size());
        joint << p.critic, p.actor;
        stacked.push_back(std::move(joint));
    }
    const double disagreement = param_disagreement(stacked);

    std::vector<EvalReport> reports(n);
    parallel_for(n, config_.workers, [&](std::size_t k) {
        Rng rng = make_rng({config_.seed, std::uint64_t(Stream::Eval), episodes_, k});
        const envs::TaskParams task[] = {agents_[k].task};
        reports[k] = evaluate(agents_[k].actor, task, env_options_, config_.eval_episodes, rng);
    });

    std::vector<MetricsRow> rows;
    std::vector<double> agent_means;
    for (std::size_t k = 0; k < n; ++k) {
        const auto& tr = reports[k].tasks.front();
        rows.push_back({epoch, episodes_, static_cast<int>(k), tr.task_id, tr.mean, tr.spread.median, tr.spread.q1,
                        tr.spread.q3, disagreement});
        agent_means.push_back(tr.mean);
    }
    std::map<int, envs::TaskParams> distinct;
    for (const auto& t : assignment_) distinct.emplace(t.task_id, t);
    // with a single task this would only repeat agent 0's own row
    if (config_.eval_designated && distinct.size() > 1) {
        std::vector<envs::TaskParams> tasks;
        for (const auto& [id, t] : distinct) tasks.push_back(t);
        Rng rng = make_rng({config_.seed, std::uint64_t(Stream::Eval), episodes_, kDesignatedEvalId});
        const auto rep = evaluate(agents_.front().actor, tasks, env_options_, config_.eval_episodes, rng);
        std::vector<double> task_means;
        for (const auto& tr : rep.tasks) task_means.push_back(tr.mean);
        rows.push_back(summary_row(epoch, episodes_, 0, -1, task_means, disagreement));
    }
    rows.push_back(summary_row(epoch, episodes_, -1, -1, agent_means, disagreement));
    return rows;
}

namespace {

// Shared evaluation/checkpoint loop of both runners.
template <class Runner, class Dump>
RunResult drive(Runner& runner, const RunConfig& config, const RunOutputs& outputs, Dump dump,
                std::size_t& episodes_ref) {
    RunResult result;
    const auto& dir = outputs.directory;
    if (dir) std::filesystem::create_directories(*dir);

    auto record = [&](bool final) {
        auto rows = runner.evaluate_now();
        const bool hit = config.target_return && rows.back().return_median >= *config.target_return;
        result.metrics.insert(result.metrics.end(), rows.begin(), rows.end());
        if (dir) {
            write_metrics_csv(result.metrics, *dir / "metrics.csv");
            if (checkpoint_due(config, episodes_ref, true, final)) dump(checkpoint_dir(*dir, episodes_ref));
        }
        return hit;
    };

    result.reached_target = record(false);
    while (!result.reached_target && episodes_ref < config.max_episodes) {
        try {
            runner.learning_step();
        } catch (const NumericError& e) {
            std::string where;
            if (dir) {
                const auto abort_dir = *dir / "checkpoints" / ("abort_ep" + std::to_string(episodes_ref));
                dump(abort_dir);
                write_metrics_csv(result.metrics, *dir / "metrics.csv");
                where = " (last consistent state saved to " + abort_dir.string() + ")";
            }
            throw NumericError(std::string(e.what()) + where);
        }
        ++result.learning_steps;
        const bool final = episodes_ref >= config.max_episodes;
        const bool eval_due = final || (config.eval_every > 0 && episodes_ref % config.eval_every == 0);
        if (eval_due) {
            result.reached_target = record(final);
        } else if (dir && checkpoint_due(config, episodes_ref, false, false)) {
            dump(checkpoint_dir(*dir, episodes_ref));
        }
    }
    result.episodes_per_agent = episodes_ref;
    return result;
}

} // namespace

RunResult DiffDac::run(const RunOutputs& outputs) {
    auto dump = [this](const std::filesystem::path& dir) {
        for (const auto& a : agents_) write_checkpoint(dir, a.index, a.critic, a.actor.backbone);
    };
    RunResult result = drive(*this, config_, outputs, dump, episodes_);
    result.final_params = snapshot();
    return result;
}

// ---------------------------------------------------------------- Cent-AC

CentAc::CentAc(RunConfig config, std::vector<envs::TaskParams> tasks, envs::EnvOptions env_options)
    : config_(std::move(config)), tasks_(std::move(tasks)), env_options_(env_options) {
    config_.validate();
    if (tasks_.empty()) throw ArgumentError("Cent-AC needs at least one task");
    env_options_.max_steps = config_.max_steps;
    learner_ = make_agent(0, tasks_.front(), env_options_, config_, {{0, 1.0}});
    for (std::size_t j = 0; j < tasks_.size(); ++j) {
        envs_.push_back(envs::make_environment(tasks_[j], env_options_));
        if (envs_.back()->observation_dim() != learner_.env->observation_dim())
            throw ArgumentError("all tasks must share the observation space");
        rngs_.push_back(make_rng({config_.seed, j, std::uint64_t(Stream::Rollout)}));
    }
}

void CentAc::learning_step() {
    const std::size_t n_ep = episodes_in_step(config_, episodes_);
    const double alpha = config_.critic_rate.at(step_ + 1);
    const double beta = config_.actor_rate.at(step_ + 1);
    const double entropy = config_.signed_entropy_coeff();
    const double inv_tasks = 1.0 / static_cast<double>(tasks_.size());
    const std::size_t obs_dim = learner_.env->observation_dim();

    std::vector<SampleBatch> batches(tasks_.size());
    std::vector<std::vector<double>> advs(tasks_.size());
    for (std::size_t j = 0; j < tasks_.size(); ++j) {
        std::vector<Trajectory> trajs;
        for (std::size_t e = 0; e < n_ep; ++e)
            trajs.push_back(rollout(learner_.actor, *envs_[j], rngs_[j], config_.max_steps));
        batches[j] = make_batch(trajs, config_.discount, obs_dim);
        advs[j] = advantage_estimates(batches[j], learner_.critic);
    }

    auto averaged = [&](auto&& grad_of) {
        Vector sum = grad_of(0);
        for (std::size_t j = 1; j < tasks_.size(); ++j) sum += grad_of(j);
        return Vector(sum * inv_tasks);
    };
    auto apply = [&](nn::AdamState& opt, Vector& params, const Vector& grad, double rate) {
        if (config_.optimizer == Optimizer::Adam)
            nn::adam_step(opt, params, grad, rate);
        else
            nn::sgd_step(params, grad, rate);
    };

    const Vector critic_grad = averaged([&](std::size_t j) { return critic_loss(learner_.critic, batches[j]).gradient.flat(); });
    require_finite(critic_grad, "Cent-AC: non-finite critic gradient");
    auto actor_grad = [&] {
        return averaged([&](std::size_t j) {
            return Vector(-actor_objective(learner_.actor, batches[j], advs[j], entropy).gradient.flat());
        });
    };
    Vector new_actor;
    if (!config_.gauss_seidel) {
        new_actor = learner_.actor.backbone.flat();
        const Vector g = actor_grad();
        require_finite(g, "Cent-AC: non-finite actor gradient");
        apply(learner_.actor_opt, new_actor, g, beta);
    }
    Vector new_critic = learner_.critic.flat();
    apply(learner_.critic_opt, new_critic, critic_grad, alpha);
    learner_.critic.set_flat(new_critic);
    if (config_.gauss_seidel) {
        for (std::size_t j = 0; j < tasks_.size(); ++j) advs[j] = advantage_estimates(batches[j], learner_.critic);
        new_actor = learner_.actor.backbone.flat();
        const Vector g = actor_grad();
        require_finite(g, "Cent-AC: non-finite actor gradient");
        apply(learner_.actor_opt, new_actor, g, beta);
    }
    learner_.actor.backbone.set_flat(new_actor);
    episodes_ += n_ep;
    ++step_;
}

AgentParams CentAc::snapshot() const { return {learner_.critic.flat(), learner_.actor.backbone.flat()}; }

std::vector<MetricsRow> CentAc::evaluate_now() {
    const std::size_t epoch = episodes_ / config_.episodes_per_step;
    std::vector<MetricsRow> rows;
    std::vector<double> means;
    std::vector<int> seen;
    for (std::size_t j = 0; j < tasks_.size(); ++j) {
        if (std::find(seen.begin(), seen.end(), tasks_[j].task_id) != seen.end()) continue;
        seen.push_back(tasks_[j].task_id);
        Rng rng = make_rng({config_.seed, std::uint64_t(Stream::Eval), episodes_, j});
        const envs::TaskParams task[] = {tasks_[j]};
        const auto rep = evaluate(learner_.actor, task, env_options_, config_.eval_episodes, rng);
        const auto& tr = rep.tasks.front();
        rows.push_back({epoch, episodes_, 0, tr.task_id, tr.mean, tr.spread.median, tr.spread.q1, tr.spread.q3, 0.0});
        means.push_back(tr.mean);
    }
    rows.push_back(summary_row(epoch, episodes_, -1, -1, means, 0.0));
    return rows;
}

RunResult CentAc::run(const RunOutputs& outputs) {
    auto dump = [this](const std::filesystem::path& dir) {
        write_checkpoint(dir, 0, learner_.critic, learner_.actor.backbone);
    };
    RunResult result = drive(*this, config_, outputs, dump, episodes_);
    result.final_params = {snapshot()};
    return result;
}

RunResult diffdac_run(const RunConfig& config, const net::CombinationMatrix& combination,
                      std::vector<envs::TaskParams> assignment, const envs::EnvOptions& env_options,
                      const RunOutputs& outputs) {
    DiffDac runner(config, combination, std::move(assignment), env_options);
    return runner.run(outputs);
}

RunResult cent_ac_run(const RunConfig& config, std::vector<envs::TaskParams> tasks,
                      const envs::EnvOptions& env_options, const RunOutputs& outputs) {
    CentAc runner(config, std::move(tasks), env_options);
    return runner.run(outputs);
}

} // namespace diffdac::training
