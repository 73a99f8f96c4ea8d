#include "diffdac/envs.hpp"

#include "diffdac/errors.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

namespace diffdac::envs {

namespace {

constexpr double kCartPoleGravity = 9.8;
constexpr double kPi = std::numbers::pi;

double clip(double v, double bound) { return std::min(bound, std::max(-bound, v)); }

const CartPoleParams& cart_pole(const TaskParams& p) {
    const auto* cp = std::get_if<CartPoleParams>(&p.physics);
    if (!cp) throw ArgumentError("task " + p.describe() + " does not carry cart-pole parameters");
    return *cp;
}

const PendulumParams& pendulum(const TaskParams& p) {
    const auto* pp = std::get_if<PendulumParams>(&p.physics);
    if (!pp) throw ArgumentError("task " + p.describe() + " does not carry pendulum parameters");
    return *pp;
}

struct CartPoleAccel {
    double x_acc;
    double psi_acc;
};

// Barto-Sutton cart-pole with a uniform pole of the given half-length.
CartPoleAccel cart_pole_accel(const CartPoleParams& p, double force, double psi, double psi_dot) {
    const double total_mass = p.cart_mass + p.pole_mass;
    const double polemass_length = p.pole_mass * p.pole_half_length;
    const double c = std::cos(psi);
    const double s = std::sin(psi);
    const double temp = (force + polemass_length * psi_dot * psi_dot * s) / total_mass;
    const double psi_acc = (kCartPoleGravity * s - c * temp) /
                           (p.pole_half_length * (4.0 / 3.0 - p.pole_mass * c * c / total_mass));
    const double x_acc = temp - polemass_length * psi_acc * c / total_mass;
    return {x_acc, psi_acc};
}

// Semi-implicit Euler: velocities first, positions with the new velocities.
EnvState cart_pole_integrate(const CartPoleParams& p, const EnvState& state, double force, double dt) {
    const auto& q = state.physical;
    const auto acc = cart_pole_accel(p, force, q(2), q(3));
    EnvState next{Eigen::VectorXd(4), state.t + 1};
    next.physical(1) = q(1) + dt * acc.x_acc;
    next.physical(0) = q(0) + dt * next.physical(1);
    next.physical(3) = q(3) + dt * acc.psi_acc;
    next.physical(2) = q(2) + dt * next.physical(3);
    return next;
}

void check_dim(const EnvState& state, Eigen::Index dim) {
    if (state.physical.size() != dim)
        throw ShapeError("environment state has " + std::to_string(state.physical.size()) +
                         " entries, expected " + std::to_string(dim));
}

} // namespace

std::string to_string(Family family) {
    switch (family) {
    case Family::CartPoleBalance: return "cartpole_balance";
    case Family::Pendulum: return "pendulum";
    case Family::CartPoleSwingUp: return "cartpole_swingup";
    }
    return "unknown";
}

Family family_from_string(std::string_view name) {
    if (name == "cartpole_balance") return Family::CartPoleBalance;
    if (name == "pendulum") return Family::Pendulum;
    if (name == "cartpole_swingup") return Family::CartPoleSwingUp;
    throw ArgumentError("unknown environment family '" + std::string(name) + "'");
}

void TaskParams::validate() const {
    const bool wants_pendulum = family == Family::Pendulum;
    if (wants_pendulum != std::holds_alternative<PendulumParams>(physics))
        throw ArgumentError("task parameters do not match family " + to_string(family));
    if (wants_pendulum) {
        const auto& p = std::get<PendulumParams>(physics);
        if (!(p.mass > 0.0) || !(p.length > 0.0))
            throw ArgumentError("pendulum mass and length must be positive");
    } else {
        const auto& p = std::get<CartPoleParams>(physics);
        if (!(p.pole_mass > 0.0) || !(p.pole_half_length > 0.0) || !(p.cart_mass > 0.0))
            throw ArgumentError("cart-pole masses and pole length must be positive");
    }
}

std::string TaskParams::describe() const {
    std::ostringstream os;
    os << to_string(family) << "#" << task_id;
    if (const auto* cp = std::get_if<CartPoleParams>(&physics))
        os << "(pole_mass=" << cp->pole_mass << ", pole_half_length=" << cp->pole_half_length
           << ", cart_mass=" << cp->cart_mass << ")";
    else if (const auto* pp = std::get_if<PendulumParams>(&physics))
        os << "(mass=" << pp->mass << ", length=" << pp->length << ")";
    return os.str();
}

TaskFamily make_family(Family kind) {
    TaskFamily fam{kind, {}, {}};
    fam.single_task.family = kind;
    fam.single_task.task_id = 0;
    int id = 0;
    switch (kind) {
    case Family::CartPoleBalance: {
        constexpr std::array masses{0.1, 0.325, 0.55, 0.775, 1.0};
        constexpr std::array lengths{0.05, 0.1625, 0.275, 0.3875, 0.5};
        for (double m : masses)
            for (double l : lengths) fam.grid.push_back({kind, id++, CartPoleParams{m, l, 1.0}});
        fam.single_task.physics = CartPoleParams{0.1, 0.5, 1.0};
        break;
    }
    case Family::Pendulum: {
        constexpr std::array values{0.8, 0.9, 1.0, 1.1, 1.2};
        for (double m : values)
            for (double l : values) fam.grid.push_back({kind, id++, PendulumParams{m, l}});
        fam.single_task.physics = PendulumParams{1.0, 1.0};
        break;
    }
    case Family::CartPoleSwingUp: {
        constexpr std::array masses{0.1, 0.2, 0.3, 0.4, 0.5};
        constexpr std::array lengths{0.2, 0.4, 0.6, 0.8, 1.0};
        for (double m : masses)
            for (double l : lengths) fam.grid.push_back({kind, id++, CartPoleParams{m, l, 0.5}});
        fam.single_task.physics = CartPoleParams{0.5, 0.25, 0.5};
        break;
    }
    }
    return fam;
}

double wrap_angle(double angle) {
    double w = std::fmod(angle + kPi, 2.0 * kPi);
    if (w < 0.0) w += 2.0 * kPi;
    return w - kPi;
}

Environment::Environment(TaskParams params, EnvOptions options)
    : params_(std::move(params)), options_(options) {
    params_.validate();
    if (options_.max_steps < 0) throw ArgumentError("max_steps must be nonnegative");
}

void Environment::check_finite(const EnvState& state, double action) const {
    if (!state.physical.allFinite())
        throw NumericError("non-finite state in " + params_.describe() + " at step " + std::to_string(state.t));
    if (!std::isfinite(action))
        throw NumericError("non-finite action in " + params_.describe() + " at step " + std::to_string(state.t));
}

// ---------------------------------------------------------------- cart-pole balance

CartPoleBalance::CartPoleBalance(TaskParams params, EnvOptions options)
    : Environment(std::move(params), options) {
    cart_pole(params_);
}

EnvState CartPoleBalance::reset(Rng& rng) const {
    std::uniform_real_distribution<double> unif(-0.05, 0.05);
    EnvState s{Eigen::VectorXd(4), 0};
    for (int i = 0; i < 4; ++i) s.physical(i) = unif(rng);
    return s;
}

StepOutcome CartPoleBalance::step(const EnvState& state, double action) const {
    check_dim(state, 4);
    check_finite(state, action);
    const double force = clip(action, kForceBound);
    StepOutcome out;
    out.applied_action = force;
    out.next = cart_pole_integrate(cart_pole(params_), state, force, kDt);
    const auto& q = out.next.physical;
    const bool failed = std::abs(q(0)) > kPositionLimit || std::abs(q(2)) > kAngleLimit;
    out.reward = failed ? 0.0 : 1.0;
    out.terminal = failed || out.next.t >= options_.max_steps;
    return out;
}

Eigen::VectorXd CartPoleBalance::observe(const EnvState& state) const { return state.physical; }

// ---------------------------------------------------------------- pendulum

Pendulum::Pendulum(TaskParams params, EnvOptions options) : Environment(std::move(params), options) {
    pendulum(params_);
}

EnvState Pendulum::reset(Rng& rng) const {
    std::uniform_real_distribution<double> angle(-kPi, kPi);
    std::uniform_real_distribution<double> speed(-1.0, 1.0);
    EnvState s{Eigen::VectorXd(2), 0};
    s.physical(0) = angle(rng);
    s.physical(1) = speed(rng);
    return s;
}

StepOutcome Pendulum::step(const EnvState& state, double action) const {
    check_dim(state, 2);
    check_finite(state, action);
    const auto& p = pendulum(params_);
    const double torque = clip(action, kTorqueBound);
    const double psi = state.physical(0);
    const double psi_dot = state.physical(1);

    StepOutcome out;
    out.applied_action = torque;
    const double wrapped = wrap_angle(psi);
    out.reward = -(wrapped * wrapped + 0.1 * psi_dot * psi_dot + 0.001 * torque * torque);

    const double psi_acc = 3.0 * kGravity / (2.0 * p.length) * std::sin(psi) +
                           3.0 / (p.mass * p.length * p.length) * torque;
    const double new_dot = clip(psi_dot + psi_acc * kDt, kMaxSpeed);
    out.next = EnvState{Eigen::VectorXd(2), state.t + 1};
    out.next.physical(0) = psi + new_dot * kDt;
    out.next.physical(1) = new_dot;
    out.terminal = out.next.t >= options_.max_steps;
    return out;
}

Eigen::VectorXd Pendulum::observe(const EnvState& state) const {
    Eigen::VectorXd obs(3);
    obs << std::cos(state.physical(0)), std::sin(state.physical(0)), state.physical(1);
    return obs;
}

double Pendulum::mechanical_energy(const EnvState& state) const {
    const auto& p = pendulum(params_);
    const double inertia = p.mass * p.length * p.length / 3.0;
    const double psi_dot = state.physical(1);
    return 0.5 * inertia * psi_dot * psi_dot + p.mass * kGravity * 0.5 * p.length * std::cos(state.physical(0));
}

// ---------------------------------------------------------------- cart-pole swing-up

CartPoleSwingUp::CartPoleSwingUp(TaskParams params, EnvOptions options)
    : Environment(std::move(params), options) {
    cart_pole(params_);
}

std::size_t CartPoleSwingUp::observation_dim() const {
    return options_.swingup_encoding == AngleEncoding::SinCos ? 5 : 4;
}

EnvState CartPoleSwingUp::reset(Rng& rng) const {
    std::uniform_real_distribution<double> unif(-0.05, 0.05);
    EnvState s{Eigen::VectorXd::Zero(4), 0};
    s.physical(2) = kPi + unif(rng);
    return s;
}

double CartPoleSwingUp::tip_distance(double x, double psi) const {
    const double pole = 2.0 * cart_pole(params_).pole_half_length;
    const double dx = x + pole * std::sin(psi);
    const double dy = pole * std::cos(psi) - pole;
    return std::hypot(dx, dy);
}

double swingup_reward(double distance, double psi) { return 2.0 / (1.0 + std::exp(distance)) + std::cos(psi); }

StepOutcome CartPoleSwingUp::step(const EnvState& state, double action) const {
    check_dim(state, 4);
    check_finite(state, action);
    const double force = clip(action, kForceBound);
    StepOutcome out;
    out.applied_action = force;
    out.next = cart_pole_integrate(cart_pole(params_), state, force, kDt);
    const auto& q = out.next.physical;
    out.reward = swingup_reward(tip_distance(q(0), q(2)), q(2));
    out.terminal = std::abs(q(0)) > kPositionLimit || out.next.t >= options_.max_steps;
    return out;
}

Eigen::VectorXd CartPoleSwingUp::observe(const EnvState& state) const {
    const auto& q = state.physical;
    if (options_.swingup_encoding == AngleEncoding::Angle) {
        Eigen::VectorXd obs(4);
        obs << q(0), q(1), wrap_angle(q(2)), q(3);
        return obs;
    }
    Eigen::VectorXd obs(5);
    obs << q(0), q(1), std::cos(q(2)), std::sin(q(2)), q(3);
    return obs;
}

std::unique_ptr<Environment> make_environment(const TaskParams& params, const EnvOptions& options) {
    switch (params.family) {
    case Family::CartPoleBalance: return std::make_unique<CartPoleBalance>(params, options);
    case Family::Pendulum: return std::make_unique<Pendulum>(params, options);
    case Family::CartPoleSwingUp: return std::make_unique<CartPoleSwingUp>(params, options);
    }
    throw ArgumentError("unknown environment family");
}

// ---------------------------------------------------------------- gridworld

tabular::TabularMdp make_gridworld(std::size_t n, double noise, double discount, Rng& rng) {
    if (n < 2) throw ArgumentError("gridworld side must be at least 2");
    if (!(noise >= 0.0 && noise < 1.0)) throw ArgumentError("gridworld noise must lie in [0, 1)");
    const std::size_t cells = n * n;
    constexpr std::size_t kActions = 4;
    std::uniform_int_distribution<std::size_t> pick(0, cells - 1);
    const std::size_t goal = pick(rng);

    auto move = [n](std::size_t cell, std::size_t action) {
        std::size_t r = cell / n, c = cell % n;
        switch (action) {
        case 0: r = r > 0 ? r - 1 : r; break;
        case 1: c = c + 1 < n ? c + 1 : c; break;
        case 2: r = r + 1 < n ? r + 1 : r; break;
        default: c = c > 0 ? c - 1 : c; break;
        }
        return r * n + c;
    };

    tabular::TabularMdp mdp;
    mdp.name = "gridworld" + std::to_string(n) + "_goal" + std::to_string(goal);
    mdp.n_states = cells;
    mdp.n_actions = kActions;
    mdp.discount = discount;
    mdp.reward_bound = 1.0;
    mdp.transition = tabular::Matrix::Zero(static_cast<Eigen::Index>(cells * kActions),
                                           static_cast<Eigen::Index>(cells));
    mdp.reward = tabular::Matrix::Zero(static_cast<Eigen::Index>(cells), kActions);
    for (std::size_t s = 0; s < cells; ++s) {
        for (std::size_t a = 0; a < kActions; ++a) {
            auto row = mdp.transition.row(static_cast<Eigen::Index>(mdp.row(s, a)));
            if (s == goal) {
                row(static_cast<Eigen::Index>(goal)) = 1.0;
                mdp.reward(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = 1.0;
                continue;
            }
            row(static_cast<Eigen::Index>(move(s, a))) += 1.0 - noise;
            if (noise > 0.0)
                for (std::size_t b = 0; b < kActions; ++b)
                    row(static_cast<Eigen::Index>(move(s, b))) += noise / kActions;
        }
    }
    mdp.initial_dist = tabular::Vector::Constant(static_cast<Eigen::Index>(cells), 1.0 / double(cells - 1));
    mdp.initial_dist(static_cast<Eigen::Index>(goal)) = 0.0;
    mdp.validate();
    return mdp;
}

} // namespace diffdac::envs
