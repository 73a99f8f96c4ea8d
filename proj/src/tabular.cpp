#include "diffdac/tabular.hpp"

#include "diffdac/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace diffdac::tabular {

namespace {

constexpr double kStochasticTol = 1e-12;
constexpr std::size_t kDirectSolveLimit = 200;

void check_value_shape(const TabularMdp& mdp, const Vector& v) {
    if (static_cast<std::size_t>(v.size()) != mdp.n_states)
        throw ShapeError("value vector has " + std::to_string(v.size()) + " entries, MDP has " +
                         std::to_string(mdp.n_states) + " states");
}

void check_state_action_shape(const TabularMdp& mdp, const Matrix& m, const char* what) {
    if (static_cast<std::size_t>(m.rows()) != mdp.n_states ||
        static_cast<std::size_t>(m.cols()) != mdp.n_actions)
        throw ShapeError(std::string(what) + " is not |S| x |A|");
}

} // namespace

void TabularMdp::validate() const {
    if (n_states == 0 || n_actions == 0) throw ShapeError("MDP needs at least one state and one action");
    if (static_cast<std::size_t>(transition.rows()) != n_states * n_actions ||
        static_cast<std::size_t>(transition.cols()) != n_states)
        throw ShapeError("transition must be (|S||A|) x |S|");
    if (static_cast<std::size_t>(reward.rows()) != n_states ||
        static_cast<std::size_t>(reward.cols()) != n_actions)
        throw ShapeError("reward must be |S| x |A|");
    if (static_cast<std::size_t>(initial_dist.size()) != n_states)
        throw ShapeError("initial distribution must have |S| entries");
    if (!(discount >= 0.0 && discount < 1.0)) throw InvariantError("discount must lie in [0, 1)");
    if (!transition.allFinite() || transition.minCoeff() < 0.0)
        throw InvariantError("transition probabilities must be finite and nonnegative");
    for (Eigen::Index r = 0; r < transition.rows(); ++r) {
        if (std::abs(transition.row(r).sum() - 1.0) > kStochasticTol)
            throw InvariantError("transition row " + std::to_string(r) + " does not sum to 1");
    }
    if (!initial_dist.allFinite() || initial_dist.minCoeff() < 0.0 ||
        std::abs(initial_dist.sum() - 1.0) > kStochasticTol)
        throw InvariantError("initial distribution is not a probability vector");
    if (!reward.allFinite() || !std::isfinite(reward_bound))
        throw InvariantError("rewards must be finite");
    if (reward.cwiseAbs().maxCoeff() > reward_bound)
        throw InvariantError("reward exceeds the stored bound");
}

DualVariable::DualVariable(Matrix values) : d_(std::move(values)) {
    if (!d_.allFinite()) throw InvariantError("dual variable has non-finite entries");
    if (d_.size() && d_.minCoeff() < 0.0) throw InvariantError("dual variable has negative entries");
}

double StepSchedule::at(std::size_t iteration) const {
    switch (kind) {
    case Kind::Constant:
        return base;
    case Kind::InverseDecay:
        return base / static_cast<double>(std::max<std::size_t>(iteration, 1));
    }
    return base;
}

AveragedMdp average_mdps(std::span<const TabularMdp> tasks) {
    if (tasks.empty()) throw ArgumentError("cannot average an empty list of MDPs");
    const auto& first = tasks.front();
    AveragedMdp out;
    out.name = "average";
    out.n_states = first.n_states;
    out.n_actions = first.n_actions;
    out.discount = first.discount;
    out.transition = Matrix::Zero(first.transition.rows(), first.transition.cols());
    out.reward = Matrix::Zero(first.reward.rows(), first.reward.cols());
    out.initial_dist = Vector::Zero(first.initial_dist.size());
    for (const auto& task : tasks) {
        if (task.n_states != first.n_states || task.n_actions != first.n_actions)
            throw ShapeError("task '" + task.name + "' has a different state/action space");
        if (task.discount != first.discount)
            throw ArgumentError("task '" + task.name + "' has a different discount");
        out.transition += task.transition;
        out.reward += task.reward;
        out.initial_dist += task.initial_dist;
        out.reward_bound = std::max(out.reward_bound, task.reward_bound);
        out.provenance.push_back(task.name);
    }
    const double n = static_cast<double>(tasks.size());
    out.transition /= n;
    out.reward /= n;
    out.initial_dist /= n;
    return out;
}

Matrix action_values(const TabularMdp& mdp, const Vector& v) {
    check_value_shape(mdp, v);
    const Vector continuation = mdp.transition * v; // indexed s * |A| + a
    Matrix q(mdp.n_states, mdp.n_actions);
    for (std::size_t s = 0; s < mdp.n_states; ++s)
        for (std::size_t a = 0; a < mdp.n_actions; ++a)
            q(s, a) = mdp.reward(s, a) + mdp.discount * continuation(mdp.row(s, a));
    return q;
}

Vector policy_evaluation(const TabularMdp& mdp, const TabularPolicy& policy, double tol) {
    if (!(tol > 0.0)) throw ArgumentError("policy evaluation tolerance must be positive");
    check_state_action_shape(mdp, policy.probs, "policy");
    const auto n = static_cast<Eigen::Index>(mdp.n_states);

    Matrix p_pi = Matrix::Zero(n, n);
    Vector r_pi(n);
    for (Eigen::Index s = 0; s < n; ++s) {
        r_pi(s) = mdp.reward.row(s).dot(policy.probs.row(s));
        for (std::size_t a = 0; a < mdp.n_actions; ++a)
            p_pi.row(s) += policy.probs(s, a) * mdp.transition.row(mdp.row(s, a));
    }

    auto bellman = [&](const Vector& v) -> Vector { return r_pi + mdp.discount * (p_pi * v); };

    Vector v = Vector::Zero(n);
    if (mdp.n_states <= kDirectSolveLimit) {
        const Matrix system = Matrix::Identity(n, n) - mdp.discount * p_pi;
        v = system.partialPivLu().solve(r_pi);
    }
    // Fixed-point sweeps; after a direct solve this only polishes roundoff.
    const std::size_t cap = 100000000;
    for (std::size_t it = 0;; ++it) {
        Vector next = bellman(v);
        const double residual = (next - v).lpNorm<Eigen::Infinity>();
        if (residual <= tol) return v;
        if (it >= cap) throw ConvergenceError("policy evaluation did not converge", residual);
        v = std::move(next);
    }
}

Vector bellman_optimality_apply(const TabularMdp& mdp, const Vector& v) {
    return action_values(mdp, v).rowwise().maxCoeff();
}

Vector value_iteration(const TabularMdp& mdp, double tol, std::size_t max_iters) {
    if (!(tol > 0.0)) throw ArgumentError("value iteration tolerance must be positive");
    Vector v = Vector::Zero(static_cast<Eigen::Index>(mdp.n_states));
    double residual = 0.0;
    for (std::size_t it = 0; it <= max_iters; ++it) {
        Vector next = bellman_optimality_apply(mdp, v);
        residual = (next - v).lpNorm<Eigen::Infinity>();
        if (residual <= tol) return v;
        v = std::move(next);
    }
    throw ConvergenceError("value iteration did not converge in " + std::to_string(max_iters) +
                               " iterations",
                           residual);
}

TabularPolicy greedy_policy(const TabularMdp& mdp, const Vector& v) {
    const Matrix q = action_values(mdp, v);
    TabularPolicy pi{Matrix::Zero(q.rows(), q.cols())};
    for (Eigen::Index s = 0; s < q.rows(); ++s) {
        Eigen::Index best = 0;
        for (Eigen::Index a = 1; a < q.cols(); ++a)
            if (q(s, a) > q(s, best)) best = a;
        pi.probs(s, best) = 1.0;
    }
    return pi;
}

Matrix advantage_tabular(const TabularMdp& mdp, const Vector& v) {
    Matrix adv = action_values(mdp, v);
    adv.colwise() -= v;
    return adv;
}

double lagrangian_value(const Vector& v, const DualVariable& d, const TabularMdp& mdp) {
    check_state_action_shape(mdp, d.values(), "dual variable");
    const Matrix adv = advantage_tabular(mdp, v);
    return mdp.initial_dist.dot(v) + d.values().cwiseProduct(adv).sum();
}

TabularPolicy policy_from_dual(const DualVariable& d) {
    const Matrix& values = d.values();
    if (values.size() && values.minCoeff() < 0.0)
        throw InvariantError("dual variable has negative entries");
    TabularPolicy pi{Matrix(values.rows(), values.cols())};
    const double uniform = values.cols() ? 1.0 / static_cast<double>(values.cols()) : 0.0;
    for (Eigen::Index s = 0; s < values.rows(); ++s) {
        const double rho = values.row(s).sum();
        if (rho > 0.0)
            pi.probs.row(s) = values.row(s) / rho;
        else
            pi.probs.row(s).setConstant(uniform);
    }
    return pi;
}

DualVariable dual_ascent_step(const DualVariable& d, const Matrix& advantage, double step) {
    if (!(step > 0.0)) throw ArgumentError("dual ascent step must be positive");
    if (advantage.rows() != d.values().rows() || advantage.cols() != d.values().cols())
        throw ShapeError("advantage and dual variable shapes differ");
    return DualVariable((d.values() + step * advantage).cwiseMax(0.0));
}

DualVariable initial_dual(const TabularMdp& mdp) {
    Matrix d(mdp.n_states, mdp.n_actions);
    for (std::size_t s = 0; s < mdp.n_states; ++s)
        d.row(s).setConstant(mdp.initial_dist(s) / static_cast<double>(mdp.n_actions));
    return DualVariable(std::move(d));
}

TabularSolution tabular_actor_critic(std::span<const TabularMdp> tasks, const StepSchedule& schedule,
                                     std::size_t iters, double tol) {
    if (iters == 0) throw ArgumentError("tabular actor-critic needs at least one iteration");
    if (!(tol > 0.0)) throw ArgumentError("tolerance must be positive");
    const AveragedMdp avg = average_mdps(tasks);
    avg.validate();
    const double eval_tol = std::min(tol, 1e-10);

    TabularSolution sol;
    sol.dual = initial_dual(avg);
    sol.policy = policy_from_dual(sol.dual);
    for (std::size_t i = 1; i <= iters; ++i) {
        sol.value = policy_evaluation(avg, sol.policy, eval_tol);
        const Matrix adv = advantage_tabular(avg, sol.value);
        sol.iterations = i;
        if (adv.maxCoeff() <= tol) return sol;
        sol.dual = dual_ascent_step(sol.dual, adv, schedule.at(i));
        sol.policy = policy_from_dual(sol.dual);
    }
    sol.value = policy_evaluation(avg, sol.policy, eval_tol);
    return sol;
}

TabularMdp random_mdp(std::size_t n_states, std::size_t n_actions, double discount, Rng& rng,
                      std::string name) {
    std::exponential_distribution<double> expo(1.0);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    TabularMdp mdp;
    mdp.name = std::move(name);
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.discount = discount;
    mdp.reward_bound = 1.0;
    mdp.transition.resize(static_cast<Eigen::Index>(n_states * n_actions),
                          static_cast<Eigen::Index>(n_states));
    for (Eigen::Index r = 0; r < mdp.transition.rows(); ++r) {
        for (Eigen::Index c = 0; c < mdp.transition.cols(); ++c) mdp.transition(r, c) = expo(rng);
        mdp.transition.row(r) /= mdp.transition.row(r).sum();
    }
    mdp.reward.resize(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(n_actions));
    for (Eigen::Index i = 0; i < mdp.reward.size(); ++i) mdp.reward(i) = unif(rng);
    mdp.initial_dist.resize(static_cast<Eigen::Index>(n_states));
    for (Eigen::Index s = 0; s < mdp.initial_dist.size(); ++s) mdp.initial_dist(s) = expo(rng);
    mdp.initial_dist /= mdp.initial_dist.sum();
    return mdp;
}

} // namespace diffdac::tabular
