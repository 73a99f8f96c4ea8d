#pragma once

#include "diffdac/random.hpp"
#include "diffdac/tabular.hpp"

#include <Eigen/Dense>

#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace diffdac::envs {

enum class Family { CartPoleBalance, Pendulum, CartPoleSwingUp };

std::string to_string(Family family);
/// Accepts "cartpole_balance", "pendulum", "cartpole_swingup".
Family family_from_string(std::string_view name);

struct CartPoleParams {
    double pole_mass = 0.1;
    double pole_half_length = 0.5;
    double cart_mass = 1.0;
};

struct PendulumParams {
    double mass = 1.0;
    double length = 1.0;
};

/// Physical parameters of one task. `task_id` labels the task in metrics: the grid
/// index, 0 for a family's single-task default, -1 when unassigned.
struct TaskParams {
    Family family = Family::CartPoleBalance;
    int task_id = -1;
    std::variant<CartPoleParams, PendulumParams> physics;

    /// Throws ArgumentError on nonpositive parameters or a family/physics mismatch.
    void validate() const;
    std::string describe() const;
};

struct TaskFamily {
    Family kind;
    std::vector<TaskParams> grid; // 25 tasks, mass-major order
    TaskParams single_task;
};

TaskFamily make_family(Family kind);

enum class AngleEncoding { SinCos, Angle };

struct EnvOptions {
    AngleEncoding swingup_encoding = AngleEncoding::SinCos;
    int max_steps = 200;
};

/// Physical state plus the step counter. Cart-pole variants store
/// (x, x_dot, psi, psi_dot); the pendulum stores (psi, psi_dot). psi = 0 is upright.
struct EnvState {
    Eigen::VectorXd physical;
    int t = 0;
};

struct StepOutcome {
    EnvState next;
    double reward = 0.0;
    bool terminal = false;
    double applied_action = 0.0; // after clipping
};

/// Stateless dynamics for one task; all episode state travels in EnvState.
class Environment {
public:
    Environment(TaskParams params, EnvOptions options);
    virtual ~Environment() = default;

    virtual EnvState reset(Rng& rng) const = 0;
    /// Throws NumericError on a non-finite state or action.
    virtual StepOutcome step(const EnvState& state, double action) const = 0;
    virtual Eigen::VectorXd observe(const EnvState& state) const = 0;
    virtual std::size_t observation_dim() const = 0;
    virtual double action_bound() const = 0;

    int max_steps() const { return options_.max_steps; }
    const TaskParams& params() const { return params_; }
    const EnvOptions& options() const { return options_; }

protected:
    void check_finite(const EnvState& state, double action) const;

    TaskParams params_;
    EnvOptions options_;
};

class CartPoleBalance final : public Environment {
public:
    static constexpr double kDt = 0.02;
    static constexpr double kForceBound = 10.0;
    static constexpr double kAngleLimit = 12.0 * 2.0 * 3.14159265358979323846 / 360.0;
    static constexpr double kPositionLimit = 2.4;

    CartPoleBalance(TaskParams params, EnvOptions options);

    EnvState reset(Rng& rng) const override;
    StepOutcome step(const EnvState& state, double action) const override;
    Eigen::VectorXd observe(const EnvState& state) const override;
    std::size_t observation_dim() const override { return 4; }
    double action_bound() const override { return kForceBound; }
};

class Pendulum final : public Environment {
public:
    static constexpr double kDt = 0.05;
    static constexpr double kTorqueBound = 2.0;
    static constexpr double kMaxSpeed = 8.0;
    static constexpr double kGravity = 10.0;

    Pendulum(TaskParams params, EnvOptions options);

    EnvState reset(Rng& rng) const override;
    StepOutcome step(const EnvState& state, double action) const override;
    Eigen::VectorXd observe(const EnvState& state) const override;
    std::size_t observation_dim() const override { return 3; }
    double action_bound() const override { return kTorqueBound; }

    /// Rod-about-pivot kinetic plus potential energy, zero potential at the pivot height.
    double mechanical_energy(const EnvState& state) const;
};

class CartPoleSwingUp final : public Environment {
public:
    static constexpr double kDt = 0.02;
    static constexpr double kForceBound = 10.0;
    static constexpr double kPositionLimit = 2.4;

    CartPoleSwingUp(TaskParams params, EnvOptions options);

    EnvState reset(Rng& rng) const override;
    StepOutcome step(const EnvState& state, double action) const override;
    Eigen::VectorXd observe(const EnvState& state) const override;
    std::size_t observation_dim() const override;
    double action_bound() const override { return kForceBound; }

    /// Distance from the pole tip to the tip of an upright pole at the track center.
    double tip_distance(double x, double psi) const;
};

/// 2 / (1 + e^d) + cos(psi).
double swingup_reward(double distance, double psi);

std::unique_ptr<Environment> make_environment(const TaskParams& params, const EnvOptions& options = {});

/// Wraps an angle into [-pi, pi).
double wrap_angle(double angle);

/// n x n grid, actions (up, right, down, left). With probability `noise` the move goes in a
/// uniformly random direction instead; moves into walls stay put. The goal cell is drawn
/// from `rng`, is absorbing, and pays reward 1 per step. Initial distribution is uniform
/// over non-goal cells.
tabular::TabularMdp make_gridworld(std::size_t n, double noise, double discount, Rng& rng);

} // namespace diffdac::envs
