#include "diffdac/errors.hpp"
#include "diffdac/net.hpp"
#include "diffdac/training.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

using namespace diffdac;
using namespace diffdac::training;

namespace {

RunConfig tiny_config() {
    RunConfig c;
    c.hidden = {8, 8};
    c.max_episodes = 20;
    c.episodes_per_step = 2;
    c.max_steps = 30;
    c.eval_every = 10;
    c.eval_episodes = 2;
    c.seed = 7;
    return c;
}

envs::TaskParams balance_task() { return envs::make_family(envs::Family::CartPoleBalance).single_task; }

// Zero backbone with the given output biases: mean = bound * tanh(o0), var = softplus(o1) + floor.
nn::GaussianPolicyHead constant_head(std::size_t obs_dim, double o0, double o1, double bound, double floor) {
    nn::Layer l{Matrix::Zero(2, static_cast<Eigen::Index>(obs_dim)), Vector(2), nn::Activation::Linear};
    l.bias << o0, o1;
    return {nn::MlpParams({l}), bound, floor};
}

// Linear state feedback on the cart-pole, mean = 10 * tanh(k . s / 10).
nn::GaussianPolicyHead stabilizing_head() {
    nn::Layer l{Matrix::Zero(2, 4), Vector::Zero(2), nn::Activation::Linear};
    l.weight.row(0) << 0.1, 0.2, 3.0, 0.5;
    l.bias(1) = -1000.0;
    return {nn::MlpParams({l}), 10.0, 0.0};
}

Trajectory random_trajectory(std::size_t len, std::size_t obs_dim, Rng& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Trajectory t;
    for (std::size_t i = 0; i < len; ++i) {
        Transition tr;
        tr.observation = Vector(static_cast<Eigen::Index>(obs_dim));
        for (auto& x : tr.observation) x = g(rng);
        tr.next_observation = tr.observation;
        tr.action = g(rng);
        tr.reward = g(rng);
        t.steps.push_back(tr);
    }
    return t;
}

std::vector<Vector> stacked(const std::vector<AgentParams>& ps) {
    std::vector<Vector> out;
    for (const auto& p : ps) {
        Vector v(p.critic.size() + p.actor.size());
        v << p.critic, p.actor;
        out.push_back(v);
    }
    return out;
}

} // namespace

TEST(McReturns, HandExamples) {
    const double r[] = {1, 1, 1};
    EXPECT_EQ(mc_returns(r, 0.5), (std::vector<double>{1.75, 1.5, 1.0}));
    const double q[] = {3, -1, 2};
    EXPECT_EQ(mc_returns(q, 0.0), (std::vector<double>{3, -1, 2}));
    EXPECT_TRUE(mc_returns(std::span<const double>{}, 0.9).empty());
}

TEST(McReturns, MatchForwardSummation) {
    Rng rng = make_rng({1});
    std::normal_distribution<double> g(0.0, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> r(1 + static_cast<std::size_t>(trial) * 7);
        for (auto& x : r) x = g(rng);
        const auto y = mc_returns(r, 0.97);
        for (std::size_t t = 0; t < r.size(); ++t) {
            double s = 0, w = 1;
            for (std::size_t u = t; u < r.size(); ++u, w *= 0.97) s += w * r[u];
            EXPECT_NEAR(y[t], s, 1e-12);
        }
    }
}

TEST(Rollout, ZeroStepsIsEmpty) {
    const auto env = envs::make_environment(balance_task());
    Rng rng = make_rng({2});
    const auto t = rollout(constant_head(4, 0, 0, 10, 0), *env, rng, 0);
    EXPECT_TRUE(t.steps.empty());
}

TEST(Rollout, VarianceFloorPolicyHoldsTheEquilibrium) {
    const auto env = envs::make_environment(balance_task());
    Rng rng = make_rng({3});
    // softplus(-1000) underflows to 0, so with no floor the action is exactly the mean 0
    const auto head = constant_head(4, 0.0, -1000.0, 10.0, 0.0);
    const auto t = rollout(head, *env, rng, 200, envs::EnvState{Vector::Zero(4), 0});
    EXPECT_EQ(t.steps.size(), 200u);
    EXPECT_EQ(t.total_reward(), 200.0);
    EXPECT_TRUE(t.terminal);
}

TEST(Rollout, SameSeedSameTrajectory) {
    const auto env = envs::make_environment(envs::make_family(envs::Family::Pendulum).grid[3]);
    Rng init = make_rng({4});
    const std::size_t hidden[] = {8};
    const auto head = nn::make_gaussian_head(hidden, 3, 2.0, 1e-6, init);
    Rng a = make_rng({5}), b = make_rng({5});
    const auto ta = rollout(head, *env, a, 50), tb = rollout(head, *env, b, 50);
    ASSERT_EQ(ta.steps.size(), tb.steps.size());
    for (std::size_t i = 0; i < ta.steps.size(); ++i) {
        EXPECT_EQ(ta.steps[i].observation, tb.steps[i].observation);
        EXPECT_EQ(ta.steps[i].action, tb.steps[i].action);
        EXPECT_EQ(ta.steps[i].reward, tb.steps[i].reward);
    }
}

TEST(Advantage, ZeroCriticGivesReturns) {
    Rng rng = make_rng({6});
    const Trajectory trajs[] = {random_trajectory(12, 3, rng)};
    const auto batch = make_batch(trajs, 0.9, 3);
    nn::Layer l{Matrix::Zero(1, 3), Vector::Zero(1), nn::Activation::Linear};
    EXPECT_EQ(advantage_estimates(batch, nn::MlpParams({l})), batch.returns);
}

TEST(Advantage, PerfectCriticGivesZero) {
    Trajectory t;
    for (int i = 0; i < 5; ++i) t.steps.push_back({Vector::Ones(2), 0.0, i == 4 ? 1.0 : 0.0, Vector::Ones(2)});
    // reward only at the end and gamma = 1: every return is exactly 1
    const Trajectory trajs[] = {t};
    const auto batch = make_batch(trajs, 1.0, 2);
    nn::Layer l{Matrix::Zero(1, 2), Vector::Ones(1), nn::Activation::Linear};
    for (double a : advantage_estimates(batch, nn::MlpParams({l}))) EXPECT_EQ(a, 0.0);
}

TEST(Advantage, MatchesRecomputationFromRewards) {
    Rng rng = make_rng({7});
    const std::size_t sizes[] = {3, 10, 1};
    const auto critic = nn::make_mlp(sizes, nn::Activation::Relu, nn::Activation::Linear, rng, 0.5);
    const Trajectory trajs[] = {random_trajectory(9, 3, rng), random_trajectory(4, 3, rng)};
    const auto batch = make_batch(trajs, 0.95, 3);
    const auto adv = advantage_estimates(batch, critic);
    std::size_t idx = 0;
    for (const auto& tr : trajs)
        for (std::size_t t = 0; t < tr.steps.size(); ++t, ++idx) {
            double y = 0, w = 1;
            for (std::size_t u = t; u < tr.steps.size(); ++u, w *= 0.95) y += w * tr.steps[u].reward;
            EXPECT_NEAR(adv[idx], y - nn::forward(critic, tr.steps[t].observation)(0), 1e-10);
        }
}

TEST(CriticGradient, PerSampleIsNegativeAdvantageTimesValueGradient) {
    Rng rng = make_rng({8});
    const std::size_t sizes[] = {4, 16, 16, 1};
    const auto critic = nn::make_mlp(sizes, nn::Activation::Relu, nn::Activation::Linear, rng, 0.5);
    const Trajectory trajs[] = {random_trajectory(30, 4, rng)};
    const auto batch = make_batch(trajs, 0.99, 4);
    for (std::size_t t = 0; t < batch.size(); ++t) {
        const Vector s = batch.states.col(static_cast<Eigen::Index>(t));
        // same forward/backward kernels as the trainer, so equality is exact
        const auto trace = nn::forward_trace(critic, s);
        const double advantage = batch.returns[t] - trace.output()(0, 0);
        const Vector grad_v = nn::backward_batch(critic, trace, Matrix::Ones(1, 1)).flat();
        const Vector expected = -advantage * grad_v;
        EXPECT_EQ(critic_sample_gradient(critic, s, batch.returns[t]).flat(), expected);
    }
}

TEST(CriticGradient, LossMatchesFiniteDifferences) {
    Rng rng = make_rng({9});
    const std::size_t sizes[] = {3, 6, 6, 1};
    const auto critic = nn::make_mlp(sizes, nn::Activation::Tanh, nn::Activation::Linear, rng, 0.5);
    const Trajectory trajs[] = {random_trajectory(5, 3, rng)};
    const auto batch = make_batch(trajs, 0.9, 3);
    const auto vg = critic_loss(critic, batch);
    auto f = [&](const Vector& flat) {
        auto c = critic;
        c.set_flat(flat);
        return critic_loss(c, batch).value;
    };
    const Vector x = critic.flat();
    for (Eigen::Index j = 0; j < x.size(); ++j)
        EXPECT_LE(testutil::relative_error(vg.gradient.flat()(j), testutil::central_difference(f, x, j, 1e-5), 1e-7),
                  1e-4);
}

TEST(CriticAdapt, ZeroResidualLeavesParameters) {
    auto agent = make_agent(0, balance_task(), {}, tiny_config(), {{0, 1.0}});
    Rng rng = make_rng({10});
    const Trajectory trajs[] = {random_trajectory(6, 4, rng)};
    auto batch = make_batch(trajs, 0.9, 4);
    const Matrix v = nn::forward_batch(agent.critic, batch.states);
    for (std::size_t t = 0; t < batch.size(); ++t) batch.returns[t] = v(0, static_cast<Eigen::Index>(t));
    EXPECT_EQ(critic_adapt(agent, batch, 0.01, Optimizer::Adam), agent.critic.flat());
}

TEST(CriticAdapt, LinearCriticOneSampleSgd) {
    Agent agent;
    nn::Layer l{Matrix{{0.2, -0.1}}, Vector::Constant(1, 0.05), nn::Activation::Linear};
    agent.critic = nn::MlpParams({l});
    agent.critic_opt = nn::AdamState(3);
    SampleBatch batch;
    batch.states = Matrix(2, 1);
    batch.states << 1.5, 2.0;
    batch.actions = {0.0};
    batch.returns = {3.0};
    const double v = 0.2 * 1.5 - 0.1 * 2.0 + 0.05;
    const double alpha = 0.1;
    const Vector out = critic_adapt(agent, batch, alpha, Optimizer::Sgd);
    const Vector expected = agent.critic.flat() + alpha * (3.0 - v) * Vector{{1.5, 2.0, 1.0}};
    EXPECT_LE((out - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ActorAdapt, NoSignalOrNoRateLeavesParameters) {
    auto agent = make_agent(0, balance_task(), {}, tiny_config(), {{0, 1.0}});
    Rng rng = make_rng({11});
    const Trajectory trajs[] = {random_trajectory(6, 4, rng)};
    const auto batch = make_batch(trajs, 0.9, 4);
    const std::vector<double> zeros(batch.size(), 0.0), adv(batch.size(), 1.0);
    EXPECT_EQ(actor_adapt(agent, batch, zeros, 0.001, 0.0, Optimizer::Adam), agent.actor.backbone.flat());
    EXPECT_EQ(actor_adapt(agent, batch, adv, 0.0, 0.0005, Optimizer::Adam), agent.actor.backbone.flat());
    EXPECT_EQ(actor_adapt(agent, batch, adv, 0.0, 0.0005, Optimizer::Sgd), agent.actor.backbone.flat());
}

TEST(ActorObjective, MatchesFiniteDifferences) {
    Rng rng = make_rng({12});
    const std::size_t sizes[] = {3, 8, 2};
    nn::GaussianPolicyHead head{nn::make_mlp(sizes, nn::Activation::Relu, nn::Activation::Linear, rng, 0.8), 2.0,
                                1e-3};
    const Trajectory trajs[] = {random_trajectory(7, 3, rng)};
    const auto batch = make_batch(trajs, 0.9, 3);
    std::vector<double> adv(batch.size());
    std::normal_distribution<double> g(0.0, 1.0);
    for (auto& a : adv) a = g(rng);
    const auto vg = actor_objective(head, batch, adv, 0.0005);
    auto f = [&](const Vector& flat) {
        auto h = head;
        h.backbone.set_flat(flat);
        return actor_objective(h, batch, adv, 0.0005).value;
    };
    const Vector x = head.backbone.flat();
    for (Eigen::Index j = 0; j < x.size(); ++j)
        EXPECT_LE(testutil::relative_error(vg.gradient.flat()(j), testutil::central_difference(f, x, j, 1e-5), 1e-7),
                  1e-4);
}

TEST(Jensen, SurrogateDominatesOnSampledBatches) {
    Rng rng = make_rng({13});
    std::normal_distribution<double> g(0.0, 3.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 2 + trial % 20;
        const double v = g(rng);
        double sq = 0, lin = 0;
        for (int k = 0; k < n; ++k) {
            const double r = v - g(rng);
            sq += r * r / n;
            lin += r / n;
        }
        EXPECT_GE(sq, lin * lin);
    }
}

TEST(Combine, ConvexCombinationRules) {
    const Vector x{{1.0, 2.0}}, y{{3.0, -2.0}};
    const Vector* same[] = {&x, &x, &x};
    const double thirds[] = {0.2, 0.3, 0.5};
    EXPECT_EQ(combine(same, thirds), x);
    const Vector* two[] = {&x, &y};
    const double halves[] = {0.5, 0.5};
    EXPECT_EQ(combine(two, halves), (Vector{{2.0, 0.0}}));
    const double bad[] = {0.5, 0.6};
    EXPECT_THROW(combine(two, bad), ArgumentError);
    const Vector z = Vector::Zero(3);
    const Vector* mismatch[] = {&x, &z};
    EXPECT_THROW(combine(mismatch, halves), ShapeError);
}

TEST(Evaluate, StabilizedCartPoleReachesTheCeiling) {
    Rng rng = make_rng({14});
    const envs::TaskParams tasks[] = {balance_task()};
    const auto rep = evaluate(stabilizing_head(), tasks, {}, 5, rng);
    for (double r : rep.tasks.front().returns) EXPECT_EQ(r, 200.0);
    EXPECT_EQ(rep.mean, 200.0);
}

TEST(Evaluate, SingleEpisodeAndDeterminism) {
    const envs::TaskParams tasks[] = {balance_task()};
    Rng a = make_rng({15}), b = make_rng({15});
    const auto head = constant_head(4, 0.01, 0.0, 10.0, 1e-6);
    const auto ra = evaluate(head, tasks, {}, 1, a), rb = evaluate(head, tasks, {}, 1, b);
    EXPECT_EQ(ra.mean, ra.tasks.front().returns.front());
    EXPECT_EQ(ra.spread.median, ra.mean);
    EXPECT_EQ(ra.tasks.front().returns, rb.tasks.front().returns);
    Rng c = make_rng({15});
    EXPECT_THROW(evaluate(head, tasks, {}, 0, c), ArgumentError);
}

TEST(Metrics, CsvRoundTripAndSchemaCheck) {
    std::vector<MetricsRow> rows{{0, 0, 0, 3, 1.5, 1.25, 1.0, 2.0, 0.1}, {1, 5, -1, -1, 1.0 / 3.0, 2, 1, 3, 1e-17}};
    const auto csv = format_metrics(rows);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), kMetricsHeader);
    EXPECT_EQ(parse_metrics(csv), rows);
    EXPECT_THROW(parse_metrics("a,b\n1,2\n"), ConfigError);
    EXPECT_THROW(parse_metrics(std::string(kMetricsHeader) + "\n1,2,3\n"), ConfigError);
}

TEST(Metrics, ParamDisagreement) {
    const std::vector<Vector> ps{Vector{{0.0, 1.0}}, Vector{{2.0, 1.0}}};
    EXPECT_EQ(param_disagreement(ps), 1.0);
    const std::vector<Vector> same{Vector::Ones(3), Vector::Ones(3)};
    EXPECT_EQ(param_disagreement(same), 0.0);
}

TEST(RunConfig, ValidationRules) {
    auto c = tiny_config();
    EXPECT_NO_THROW(c.validate());
    c.actor_rate.base = 0.02;
    EXPECT_THROW(c.validate(), ConfigError);
    c = tiny_config();
    c.critic_rate.kind = RateSchedule::Kind::InverseDecay; // 0.01 / i drops below 0.001 at i = 11
    c.max_episodes = 2 * 10;
    EXPECT_NO_THROW(c.validate());
    c.max_episodes = 2 * 11;
    try {
        c.validate();
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.key_path(), "run.actor_rate");
    }
    c = tiny_config();
    c.discount = 1.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = tiny_config();
    c.eval_every = 3;
    EXPECT_THROW(c.validate(), ConfigError);
    c = tiny_config();
    c.max_episodes = 0;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(DiffDac, AgentsMatchTheCombinationColumns) {
    const auto topo = net::make_preset("n25_sparse");
    const auto c = net::hastings_weights(topo);
    DiffDac runner(tiny_config(), c, std::vector<envs::TaskParams>(25, balance_task()));
    for (const auto& a : runner.agents()) {
        double sum = 0;
        for (auto [l, w] : a.neighbors) {
            EXPECT_EQ(w, c(l, a.index));
            sum += w;
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
    EXPECT_THROW(DiffDac(tiny_config(), c, std::vector<envs::TaskParams>(3, balance_task())), ArgumentError);
}

TEST(DiffDac, CombinationOnlyDynamicsArePowersOfC) {
    auto cfg = tiny_config();
    cfg.critic_rate.base = 0.0;
    cfg.actor_rate.base = 0.0;
    cfg.episodes_per_step = 1;
    cfg.max_steps = 5;
    cfg.max_episodes = 100;
    Rng rng = make_rng({16});
    const auto topo = net::random_geometric_topology(6, 0.5, rng);
    const auto c = net::hastings_weights(topo);
    DiffDac runner(cfg, c, std::vector<envs::TaskParams>(6, balance_task()));
    const auto x0 = stacked(runner.snapshot());
    Matrix x(x0.front().size(), 6);
    for (int k = 0; k < 6; ++k) x.col(k) = x0[static_cast<std::size_t>(k)];
    const Vector average = x.rowwise().mean();
    for (int i = 1; i <= 100; ++i) {
        runner.learning_step();
        x = x * c.weights(); // agent k holds sum_l c_lk x_l
        const auto now = stacked(runner.snapshot());
        for (int k = 0; k < 6; ++k)
            ASSERT_LE((now[static_cast<std::size_t>(k)] - x.col(k)).cwiseAbs().maxCoeff(), 1e-10) << "step " << i;
    }
    Vector mean = Vector::Zero(average.size());
    for (const auto& p : stacked(runner.snapshot())) mean += p / 6.0;
    EXPECT_LE((mean - average).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DiffDac, WorkerCountDoesNotChangeResults) {
    auto cfg = tiny_config();
    const auto c = net::hastings_weights(net::ring_topology(4));
    const auto grid = envs::make_family(envs::Family::CartPoleBalance).grid;
    const std::vector<envs::TaskParams> tasks(grid.begin(), grid.begin() + 4);
    const auto serial = diffdac_run(cfg, c, tasks);
    cfg.workers = 3;
    const auto threaded = diffdac_run(cfg, c, tasks);
    EXPECT_EQ(serial.metrics, threaded.metrics);
    for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_EQ(serial.final_params[k].critic, threaded.final_params[k].critic);
        EXPECT_EQ(serial.final_params[k].actor, threaded.final_params[k].actor);
    }
}

TEST(DiffDac, MultitaskMetricsRows) {
    auto cfg = tiny_config();
    const auto c = net::hastings_weights(net::ring_topology(3));
    const auto grid = envs::make_family(envs::Family::CartPoleBalance).grid;
    const auto result = diffdac_run(cfg, c, {grid[0], grid[5], grid[5]});
    // three agent rows, the designated agent-0 row over the two distinct tasks, the aggregate
    ASSERT_EQ(result.metrics.size() % 5, 0u);
    EXPECT_EQ(result.metrics[0].task_id, 0);
    EXPECT_EQ(result.metrics[1].task_id, 5);
    EXPECT_EQ(result.metrics[3].agent_id, 0);
    EXPECT_EQ(result.metrics[3].task_id, -1);
    EXPECT_EQ(result.metrics[4].agent_id, -1);
    EXPECT_EQ(result.metrics.back().episodes_per_agent, 20u);
    EXPECT_EQ(result.episodes_per_agent, 20u);
    EXPECT_EQ(result.learning_steps, 10u);
}

TEST(DiffDac, SingleAgentReproducesCentAcExactly) {
    for (auto opt : {Optimizer::Sgd, Optimizer::Adam})
        for (bool gs : {false, true}) {
            auto cfg = tiny_config();
            cfg.optimizer = opt;
            cfg.gauss_seidel = gs;
            const net::CombinationMatrix one(Matrix::Ones(1, 1));
            const auto d = diffdac_run(cfg, one, {balance_task()});
            const auto c = cent_ac_run(cfg, {balance_task()});
            EXPECT_EQ(d.metrics, c.metrics);
            EXPECT_EQ(d.final_params.front().critic, c.final_params.front().critic);
            EXPECT_EQ(d.final_params.front().actor, c.final_params.front().actor);
        }
}

TEST(DiffDac, GaussSeidelChangesTheActorUpdate) {
    auto cfg = tiny_config();
    const net::CombinationMatrix one(Matrix::Ones(1, 1));
    DiffDac jacobi(cfg, one, {balance_task()});
    cfg.gauss_seidel = true;
    DiffDac gs(cfg, one, {balance_task()});
    jacobi.learning_step();
    gs.learning_step();
    EXPECT_EQ(jacobi.snapshot()[0].critic, gs.snapshot()[0].critic);
    EXPECT_NE(jacobi.snapshot()[0].actor, gs.snapshot()[0].actor);
}

TEST(DiffDac, RunsAreReproducibleAndWriteArtifacts) {
    const auto dir = std::filesystem::temp_directory_path() / "diffdac_training_artifacts";
    std::filesystem::remove_all(dir);
    const auto c = net::hastings_weights(net::ring_topology(3));
    auto cfg = tiny_config();
    cfg.checkpoint_every = 10;
    const auto a = diffdac_run(cfg, c, std::vector<envs::TaskParams>(3, balance_task()), {}, {dir / "a"});
    const auto b = diffdac_run(cfg, c, std::vector<envs::TaskParams>(3, balance_task()), {}, {dir / "b"});
    EXPECT_EQ(a.metrics, b.metrics);
    EXPECT_EQ(read_metrics_csv(dir / "a" / "metrics.csv"), a.metrics);
    for (int ep : {0, 10, 20})
        for (int k = 0; k < 3; ++k) {
            const auto base = dir / "a" / "checkpoints" / ("ep" + std::to_string(ep));
            EXPECT_TRUE(std::filesystem::exists(base / ("agent" + std::to_string(k) + "_actor.txt")));
            EXPECT_TRUE(std::filesystem::exists(base / ("agent" + std::to_string(k) + "_critic.txt")));
        }
    const auto back = nn::load_params(dir / "a" / "checkpoints" / "ep20" / "agent1_critic.txt");
    EXPECT_EQ(back.flat(), a.final_params[1].critic);
    std::filesystem::remove_all(dir);
}

TEST(DiffDac, TargetReturnStopsEarly) {
    auto cfg = tiny_config();
    cfg.target_return = -1.0; // met at the very first evaluation
    const auto r = diffdac_run(cfg, net::hastings_weights(net::ring_topology(3)),
                               std::vector<envs::TaskParams>(3, balance_task()));
    EXPECT_TRUE(r.reached_target);
    EXPECT_EQ(r.episodes_per_agent, 0u);
}

TEST(CentAc, ZeroRatesKeepParameters) {
    auto cfg = tiny_config();
    cfg.critic_rate.base = 0.0;
    cfg.actor_rate.base = 0.0;
    const auto grid = envs::make_family(envs::Family::Pendulum).grid;
    CentAc runner(cfg, {grid[0], grid[7], grid[24]});
    const auto before = runner.snapshot();
    runner.learning_step();
    runner.learning_step();
    EXPECT_EQ(runner.snapshot().critic, before.critic);
    EXPECT_EQ(runner.snapshot().actor, before.actor);
    EXPECT_EQ(runner.episodes_per_task(), 4u);
}

TEST(CentAc, ReportsEachDistinctTask) {
    const auto grid = envs::make_family(envs::Family::CartPoleBalance).grid;
    const auto r = cent_ac_run(tiny_config(), {grid[1], grid[2], grid[2]});
    // rows per evaluation: tasks 1 and 2, then the aggregate
    ASSERT_EQ(r.metrics.size() % 3, 0u);
    EXPECT_EQ(r.metrics[0].task_id, 1);
    EXPECT_EQ(r.metrics[1].task_id, 2);
    EXPECT_EQ(r.metrics[2].agent_id, -1);
}
