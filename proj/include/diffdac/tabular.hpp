#pragma once

#include "diffdac/random.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace diffdac::tabular {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Finite discounted MDP.
///
/// `transition` stores one row per state-action pair, row index `s * n_actions + a`,
/// column index s'. `reward` is indexed (s, a).
struct TabularMdp {
    std::string name;
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    Matrix transition;
    Matrix reward;
    Vector initial_dist;
    double discount = 0.0;
    double reward_bound = 0.0;

    std::size_t row(std::size_t s, std::size_t a) const { return s * n_actions + a; }

    /// Throws ShapeError / InvariantError when a field is inconsistent.
    void validate() const;
};

/// Uniform convex combination of a set of tasks. `provenance` lists the source task names.
struct AveragedMdp : TabularMdp {
    std::vector<std::string> provenance;
};

struct TabularPolicy {
    Matrix probs; // (s, a)
};

/// Nonnegative state-action multipliers. Entries stay >= 0 through every update in this module.
class DualVariable {
public:
    DualVariable() = default;
    /// Throws InvariantError if any entry is negative or non-finite.
    explicit DualVariable(Matrix values);

    const Matrix& values() const { return d_; }
    Vector state_marginal() const { return d_.rowwise().sum(); }
    double min_entry() const { return d_.size() ? d_.minCoeff() : 0.0; }

private:
    Matrix d_;
};

/// Step size for the dual ascent, either constant or base / i at iteration i (1-based).
struct StepSchedule {
    enum class Kind { Constant, InverseDecay };
    Kind kind = Kind::Constant;
    double base = 1.0;

    double at(std::size_t iteration) const;
};

AveragedMdp average_mdps(std::span<const TabularMdp> tasks);

/// Value of `policy`; residual of the Bellman equation is at most `tol`.
/// Dense direct solve up to 200 states, fixed-point iteration above.
Vector policy_evaluation(const TabularMdp& mdp, const TabularPolicy& policy, double tol);

/// Q(s, a) = r(s, a) + gamma * sum_s' P(s'|s, a) v(s').
Matrix action_values(const TabularMdp& mdp, const Vector& v);

Vector bellman_optimality_apply(const TabularMdp& mdp, const Vector& v);

/// Iterates the optimality operator until ||Tv - v||_inf <= tol and returns that v.
/// Throws ConvergenceError after `max_iters`.
Vector value_iteration(const TabularMdp& mdp, double tol, std::size_t max_iters);

/// Deterministic policy taking the argmax of Q(., .) under `v`; ties go to the lowest action.
TabularPolicy greedy_policy(const TabularMdp& mdp, const Vector& v);

/// A(s, a) = r(s, a) + gamma * E[v(s')] - v(s): the gradient of the Lagrangian in d.
Matrix advantage_tabular(const TabularMdp& mdp, const Vector& v);

double lagrangian_value(const Vector& v, const DualVariable& d, const TabularMdp& mdp);

/// pi(a|s) = d(s, a) / rho(s); uniform where rho(s) = 0.
TabularPolicy policy_from_dual(const DualVariable& d);

/// Projected ascent d' = max(0, d + step * A).
DualVariable dual_ascent_step(const DualVariable& d, const Matrix& advantage, double step);

/// d0(s, a) = mu(s) / |A|, i.e. the uniform policy over the initial distribution.
DualVariable initial_dual(const TabularMdp& mdp);

struct TabularSolution {
    Vector value;
    DualVariable dual;
    TabularPolicy policy;
    std::size_t iterations = 0;
};

/// Model-based actor-critic on the averaged MDP: exact evaluation of the current
/// policy, then a projected dual ascent step along the advantage. Stops early once
/// no action has advantage above `tol`.
TabularSolution tabular_actor_critic(std::span<const TabularMdp> tasks, const StepSchedule& schedule,
                                     std::size_t iters, double tol);

/// Dense random MDP: Dirichlet(1) rows, rewards uniform in [-1, 1], random initial distribution.
TabularMdp random_mdp(std::size_t n_states, std::size_t n_actions, double discount, Rng& rng,
                      std::string name = "random");

} // namespace diffdac::tabular
