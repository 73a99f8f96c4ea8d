#include "diffdac/experiment.hpp"

#include "diffdac/errors.hpp"
#include "diffdac/mdp_io.hpp"
#include "diffdac/tabular.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

namespace diffdac::experiment {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError(path, "expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : obj.items())
        if (!ok.count(key)) throw ConfigError(path.empty() ? key : path + "." + key, "unknown key");
}

template <class T>
void read(const json& obj, const std::string& path, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(path + "." + key, e.what());
    }
}

json task_params_to_json(const envs::TaskParams& p) {
    json j;
    if (const auto* cp = std::get_if<envs::CartPoleParams>(&p.physics)) {
        j["pole_mass"] = cp->pole_mass;
        j["pole_half_length"] = cp->pole_half_length;
        j["cart_mass"] = cp->cart_mass;
    } else {
        const auto& pp = std::get<envs::PendulumParams>(p.physics);
        j["mass"] = pp.mass;
        j["length"] = pp.length;
    }
    j["task_id"] = p.task_id;
    return j;
}

envs::TaskParams task_params_from_json(const json& j, const std::string& path, envs::Family family) {
    envs::TaskParams p;
    p.family = family;
    if (family == envs::Family::Pendulum) {
        check_keys(j, path, {"mass", "length", "task_id"});
        envs::PendulumParams pp;
        read(j, path, "mass", pp.mass);
        read(j, path, "length", pp.length);
        p.physics = pp;
    } else {
        check_keys(j, path, {"pole_mass", "pole_half_length", "cart_mass", "task_id"});
        envs::CartPoleParams cp;
        if (family == envs::Family::CartPoleSwingUp) cp = {0.5, 0.25, 0.5};
        read(j, path, "pole_mass", cp.pole_mass);
        read(j, path, "pole_half_length", cp.pole_half_length);
        read(j, path, "cart_mass", cp.cart_mass);
        p.physics = cp;
    }
    read(j, path, "task_id", p.task_id);
    try {
        p.validate();
    } catch (const ArgumentError& e) {
        throw ConfigError(path, e.what());
    }
    return p;
}

std::string env_string(const char* name) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string();
}

std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

} // namespace

std::string to_string(Algorithm a) {
    switch (a) {
    case Algorithm::DiffDac: return "diffdac";
    case Algorithm::CentAc: return "cent_ac";
    case Algorithm::Tabular: return "tabular";
    }
    return "unknown";
}

Algorithm algorithm_from_string(std::string_view name) {
    if (name == "diffdac") return Algorithm::DiffDac;
    if (name == "cent_ac") return Algorithm::CentAc;
    if (name == "tabular") return Algorithm::Tabular;
    throw ConfigError("algorithm", "unknown algorithm '" + std::string(name) + "'");
}

// ---------------------------------------------------------------- (de)serialization

ExperimentConfig parse_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError("<root>", e.what());
    }
    check_keys(doc, "", {"name", "algorithm", "output_dir", "seeds", "env", "net", "run", "tabular"});
    ExperimentConfig c;
    read(doc, "", "name", c.name);
    std::string algo = to_string(c.algorithm);
    read(doc, "", "algorithm", algo);
    c.algorithm = algorithm_from_string(algo);
    std::string out = c.output_dir.string();
    read(doc, "", "output_dir", out);
    c.output_dir = out;
    read(doc, "", "seeds", c.seeds);

    if (doc.contains("env")) {
        const auto& e = doc.at("env");
        check_keys(e, "env", {"family", "task_grid", "single_task_params", "task_overrides", "swingup_encoding"});
        std::string family = envs::to_string(c.env.family);
        read(e, "env", "family", family);
        try {
            c.env.family = envs::family_from_string(family);
        } catch (const ArgumentError& err) {
            throw ConfigError("env.family", err.what());
        }
        std::string grid = "single";
        read(e, "env", "task_grid", grid);
        if (grid != "single" && grid != "grid") throw ConfigError("env.task_grid", "expected 'single' or 'grid'");
        c.env.use_grid = grid == "grid";
        if (e.contains("single_task_params"))
            c.env.single_task_params =
                task_params_from_json(e.at("single_task_params"), "env.single_task_params", c.env.family);
        if (e.contains("task_overrides")) {
            const auto& arr = e.at("task_overrides");
            if (!arr.is_array()) throw ConfigError("env.task_overrides", "expected an array");
            for (std::size_t i = 0; i < arr.size(); ++i) {
                const std::string path = "env.task_overrides[" + std::to_string(i) + "]";
                check_keys(arr[i], path, {"agent", "params"});
                TaskOverride o;
                read(arr[i], path, "agent", o.agent);
                if (!arr[i].contains("params")) throw ConfigError(path + ".params", "missing");
                o.params = task_params_from_json(arr[i].at("params"), path + ".params", c.env.family);
                c.env.task_overrides.push_back(o);
            }
        }
        std::string enc = "sincos";
        read(e, "env", "swingup_encoding", enc);
        if (enc != "sincos" && enc != "angle") throw ConfigError("env.swingup_encoding", "expected 'sincos' or 'angle'");
        c.env.swingup_encoding = enc == "angle" ? envs::AngleEncoding::Angle : envs::AngleEncoding::SinCos;
    }

    if (doc.contains("net")) {
        const auto& n = doc.at("net");
        check_keys(n, "net", {"topology", "preset", "n_agents", "radius", "seed", "file"});
        read(n, "net", "topology", c.net.topology);
        read(n, "net", "preset", c.net.preset);
        read(n, "net", "n_agents", c.net.n_agents);
        read(n, "net", "radius", c.net.radius);
        read(n, "net", "seed", c.net.seed);
        read(n, "net", "file", c.net.file);
    }

    if (doc.contains("run")) {
        const auto& r = doc.at("run");
        check_keys(r, "run",
                   {"max_episodes", "max_steps", "critic_rate", "actor_rate", "rate_decay", "episodes_per_step",
                    "discount", "entropy_coeff", "entropy_sign", "optimizer", "gauss_seidel", "hidden",
                    "min_variance", "identical_init", "eval_every", "eval_episodes", "eval_designated",
                    "checkpoint_every", "target_return", "workers"});
        auto& rc = c.run;
        read(r, "run", "max_episodes", rc.max_episodes);
        read(r, "run", "max_steps", rc.max_steps);
        read(r, "run", "critic_rate", rc.critic_rate.base);
        read(r, "run", "actor_rate", rc.actor_rate.base);
        std::string decay = "constant";
        read(r, "run", "rate_decay", decay);
        if (decay != "constant" && decay != "inverse") throw ConfigError("run.rate_decay", "expected 'constant' or 'inverse'");
        const auto kind = decay == "inverse" ? training::RateSchedule::Kind::InverseDecay
                                             : training::RateSchedule::Kind::Constant;
        rc.critic_rate.kind = rc.actor_rate.kind = kind;
        read(r, "run", "episodes_per_step", rc.episodes_per_step);
        read(r, "run", "discount", rc.discount);
        read(r, "run", "entropy_coeff", rc.entropy_coeff);
        std::string sign = "bonus";
        read(r, "run", "entropy_sign", sign);
        if (sign != "bonus" && sign != "penalty") throw ConfigError("run.entropy_sign", "expected 'bonus' or 'penalty'");
        rc.entropy_sign = sign == "penalty" ? training::EntropySign::Penalty : training::EntropySign::Bonus;
        std::string opt = "adam";
        read(r, "run", "optimizer", opt);
        if (opt != "adam" && opt != "sgd") throw ConfigError("run.optimizer", "expected 'adam' or 'sgd'");
        rc.optimizer = opt == "sgd" ? training::Optimizer::Sgd : training::Optimizer::Adam;
        read(r, "run", "gauss_seidel", rc.gauss_seidel);
        read(r, "run", "hidden", rc.hidden);
        read(r, "run", "min_variance", rc.min_variance);
        read(r, "run", "identical_init", rc.identical_init);
        read(r, "run", "eval_every", rc.eval_every);
        read(r, "run", "eval_episodes", rc.eval_episodes);
        read(r, "run", "eval_designated", rc.eval_designated);
        read(r, "run", "checkpoint_every", rc.checkpoint_every);
        if (r.contains("target_return") && !r.at("target_return").is_null()) {
            double t = 0.0;
            read(r, "run", "target_return", t);
            rc.target_return = t;
        }
        read(r, "run", "workers", rc.workers);
    }

    if (doc.contains("tabular")) {
        const auto& t = doc.at("tabular");
        check_keys(t, "tabular",
                   {"source", "n_tasks", "size", "n_actions", "noise", "discount", "files", "step", "inverse_decay",
                    "iters", "tol"});
        auto& tc = c.tabular;
        read(t, "tabular", "source", tc.source);
        read(t, "tabular", "n_tasks", tc.n_tasks);
        read(t, "tabular", "size", tc.size);
        read(t, "tabular", "n_actions", tc.n_actions);
        read(t, "tabular", "noise", tc.noise);
        read(t, "tabular", "discount", tc.discount);
        read(t, "tabular", "files", tc.files);
        read(t, "tabular", "step", tc.step);
        read(t, "tabular", "inverse_decay", tc.inverse_decay);
        read(t, "tabular", "iters", tc.iters);
        read(t, "tabular", "tol", tc.tol);
    }
    c.validate();
    return c;
}

std::string serialize_config(const ExperimentConfig& c) {
    json doc;
    doc["name"] = c.name;
    doc["algorithm"] = to_string(c.algorithm);
    doc["output_dir"] = c.output_dir.string();
    doc["seeds"] = c.seeds;

    json env;
    env["family"] = envs::to_string(c.env.family);
    env["task_grid"] = c.env.use_grid ? "grid" : "single";
    if (c.env.single_task_params) env["single_task_params"] = task_params_to_json(*c.env.single_task_params);
    json overrides = json::array();
    for (const auto& o : c.env.task_overrides)
        overrides.push_back({{"agent", o.agent}, {"params", task_params_to_json(o.params)}});
    env["task_overrides"] = overrides;
    env["swingup_encoding"] = c.env.swingup_encoding == envs::AngleEncoding::Angle ? "angle" : "sincos";
    doc["env"] = env;

    doc["net"] = {{"topology", c.net.topology}, {"preset", c.net.preset}, {"n_agents", c.net.n_agents},
                  {"radius", c.net.radius},     {"seed", c.net.seed},     {"file", c.net.file}};

    const auto& rc = c.run;
    json run;
    run["max_episodes"] = rc.max_episodes;
    run["max_steps"] = rc.max_steps;
    run["critic_rate"] = rc.critic_rate.base;
    run["actor_rate"] = rc.actor_rate.base;
    run["rate_decay"] = rc.critic_rate.kind == training::RateSchedule::Kind::InverseDecay ? "inverse" : "constant";
    run["episodes_per_step"] = rc.episodes_per_step;
    run["discount"] = rc.discount;
    run["entropy_coeff"] = rc.entropy_coeff;
    run["entropy_sign"] = rc.entropy_sign == training::EntropySign::Penalty ? "penalty" : "bonus";
    run["optimizer"] = rc.optimizer == training::Optimizer::Sgd ? "sgd" : "adam";
    run["gauss_seidel"] = rc.gauss_seidel;
    run["hidden"] = rc.hidden;
    run["min_variance"] = rc.min_variance;
    run["identical_init"] = rc.identical_init;
    run["eval_every"] = rc.eval_every;
    run["eval_episodes"] = rc.eval_episodes;
    run["eval_designated"] = rc.eval_designated;
    run["checkpoint_every"] = rc.checkpoint_every;
    run["target_return"] = rc.target_return ? json(*rc.target_return) : json(nullptr);
    run["workers"] = rc.workers;
    doc["run"] = run;

    const auto& tc = c.tabular;
    doc["tabular"] = {{"source", tc.source},   {"n_tasks", tc.n_tasks},
                      {"size", tc.size},       {"n_actions", tc.n_actions},
                      {"noise", tc.noise},     {"discount", tc.discount},
                      {"files", tc.files},     {"step", tc.step},
                      {"inverse_decay", tc.inverse_decay}, {"iters", tc.iters},
                      {"tol", tc.tol}};
    return doc.dump(2);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string(), "cannot open config file");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

void apply_environment_overrides(ExperimentConfig& config) {
    if (const auto seed = env_string("DIFFDAC_SEED"); !seed.empty()) {
        try {
            config.seeds = {std::stoull(seed)};
        } catch (const std::exception&) {
            throw ConfigError("DIFFDAC_SEED", "not an unsigned integer");
        }
    }
    if (const auto dir = env_string("DIFFDAC_OUTPUT_DIR"); !dir.empty()) config.output_dir = dir;
}

// ---------------------------------------------------------------- validation

void ExperimentConfig::validate() const {
    if (name.empty() || name.find('/') != std::string::npos)
        throw ConfigError("name", "must be a nonempty path component");
    if (seeds.empty()) throw ConfigError("seeds", "at least one seed required");
    if (algorithm == Algorithm::Tabular) {
        const auto& t = tabular;
        if (t.source != "gridworld" && t.source != "random" && t.source != "files")
            throw ConfigError("tabular.source", "expected gridworld, random or files");
        if (t.source == "files" && t.files.empty()) throw ConfigError("tabular.files", "no MDP files listed");
        if (t.source != "files" && t.n_tasks == 0) throw ConfigError("tabular.n_tasks", "must be positive");
        if (t.source == "gridworld" && t.size < 2) throw ConfigError("tabular.size", "gridworld side must be >= 2");
        if (t.source == "random" && (t.size == 0 || t.n_actions == 0))
            throw ConfigError("tabular.size", "random MDPs need states and actions");
        if (!(t.noise >= 0.0 && t.noise < 1.0)) throw ConfigError("tabular.noise", "must lie in [0, 1)");
        if (!(t.discount >= 0.0 && t.discount < 1.0)) throw ConfigError("tabular.discount", "must lie in [0, 1)");
        if (!(t.step > 0.0)) throw ConfigError("tabular.step", "must be positive");
        if (t.iters == 0) throw ConfigError("tabular.iters", "must be positive");
        if (!(t.tol > 0.0)) throw ConfigError("tabular.tol", "must be positive");
        return;
    }
    run.validate();
    const auto& n = net;
    if (n.topology != "geometric" && n.topology != "ring" && n.topology != "complete" && n.topology != "file")
        throw ConfigError("net.topology", "expected geometric, ring, complete or file");
    if (!n.preset.empty()) {
        try {
            net::find_preset(n.preset);
        } catch (const ArgumentError& e) {
            throw ConfigError("net.preset", e.what());
        }
    } else if (n.topology == "file") {
        if (n.file.empty()) throw ConfigError("net.file", "topology file required");
    } else {
        if (n.n_agents == 0) throw ConfigError("net.n_agents", "must be positive");
        if (n.topology == "geometric" && !(n.radius > 0.0)) throw ConfigError("net.radius", "must be positive");
    }
    const std::size_t agents = !n.preset.empty() ? net::find_preset(n.preset).n_agents
                               : n.topology == "file" ? 0
                                                      : n.n_agents;
    if (env.use_grid && agents != 0) {
        const auto grid = envs::make_family(env.family).grid.size();
        if (agents != grid)
            throw ConfigError("env.task_grid", "grid of " + std::to_string(grid) + " tasks needs exactly " +
                                                   std::to_string(grid) + " agents, network has " +
                                                   std::to_string(agents));
    }
    for (std::size_t i = 0; i < env.task_overrides.size(); ++i) {
        const auto& o = env.task_overrides[i];
        if (agents != 0 && o.agent >= agents)
            throw ConfigError("env.task_overrides[" + std::to_string(i) + "].agent", "agent index out of range");
    }
}

// ---------------------------------------------------------------- presets

namespace {

ExperimentConfig full_scale_run(std::string name, envs::Family family, bool grid, Algorithm algo) {
    ExperimentConfig c;
    c.name = std::move(name);
    c.algorithm = algo;
    c.env.family = family;
    c.env.use_grid = grid;
    c.net.preset = "n25_sparse";
    c.run.max_episodes = 3000;
    c.run.checkpoint_every = 500;
    c.seeds = {1, 2, 3, 4, 5, 6};
    return c;
}

} // namespace

std::vector<std::string> preset_names() {
    return {"cartpole_balance_single_n25", "cartpole_balance_multi_n25", "pendulum_single_n25",
            "pendulum_multi_n25",          "cartpole_swingup_single_n25", "cartpole_swingup_multi_n25",
            "topology_study",              "long_comparison",             "comparison",
            "desk_cartpole_ring5",         "tabular_gridworld"};
}

std::vector<ExperimentConfig> make_preset(std::string_view name) {
    using envs::Family;
    const std::string n(name);
    if (n == "cartpole_balance_single_n25") return {full_scale_run(n, Family::CartPoleBalance, false, Algorithm::DiffDac)};
    if (n == "cartpole_balance_multi_n25") return {full_scale_run(n, Family::CartPoleBalance, true, Algorithm::DiffDac)};
    if (n == "pendulum_single_n25") return {full_scale_run(n, Family::Pendulum, false, Algorithm::DiffDac)};
    if (n == "pendulum_multi_n25") return {full_scale_run(n, Family::Pendulum, true, Algorithm::DiffDac)};
    if (n == "cartpole_swingup_single_n25") return {full_scale_run(n, Family::CartPoleSwingUp, false, Algorithm::DiffDac)};
    if (n == "cartpole_swingup_multi_n25") return {full_scale_run(n, Family::CartPoleSwingUp, true, Algorithm::DiffDac)};
    if (n == "topology_study") {
        std::vector<ExperimentConfig> out;
        for (const char* preset : {"n25_sparse", "n25_dense", "n100"}) {
            auto c = full_scale_run(std::string("topology_") + preset, Family::CartPoleBalance, false, Algorithm::DiffDac);
            c.net.preset = preset;
            out.push_back(std::move(c));
        }
        return out;
    }
    if (n == "long_comparison") {
        auto d = full_scale_run("long_comparison_diffdac", Family::CartPoleBalance, false, Algorithm::DiffDac);
        auto c = full_scale_run("long_comparison_cent_ac", Family::CartPoleBalance, false, Algorithm::CentAc);
        return {d, c};
    }
    if (n == "comparison") {
        // Small two-algorithm run for checking the harness end to end.
        ExperimentConfig base;
        base.env.family = Family::CartPoleBalance;
        base.net.topology = "ring";
        base.net.n_agents = 3;
        base.run.max_episodes = 20;
        base.run.hidden = {16, 16};
        base.run.eval_every = 10;
        base.run.eval_episodes = 2;
        base.run.checkpoint_every = 20;
        base.seeds = {1, 2};
        auto d = base;
        d.name = "comparison_diffdac";
        d.algorithm = Algorithm::DiffDac;
        auto c = base;
        c.name = "comparison_cent_ac";
        c.algorithm = Algorithm::CentAc;
        return {d, c};
    }
    if (n == "desk_cartpole_ring5") {
        ExperimentConfig c;
        c.name = n;
        c.env.family = Family::CartPoleBalance;
        c.net.topology = "ring";
        c.net.n_agents = 5;
        c.run.max_episodes = 3000;
        c.run.target_return = 150.0;
        c.run.checkpoint_every = 3000;
        c.seeds = {1, 2, 3, 4, 5, 6};
        return {c};
    }
    if (n == "tabular_gridworld") {
        ExperimentConfig c;
        c.name = n;
        c.algorithm = Algorithm::Tabular;
        c.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
        return {c};
    }
    throw ConfigError("preset", "unknown preset '" + n + "'");
}

// ---------------------------------------------------------------- running

net::Topology build_topology(const NetConfig& config) {
    if (!config.preset.empty()) return net::make_preset(config.preset);
    if (config.topology == "ring") return net::ring_topology(config.n_agents);
    if (config.topology == "complete") return net::complete_topology(config.n_agents);
    if (config.topology == "file") return net::load_topology(config.file);
    Rng rng = make_rng({config.seed});
    return net::random_geometric_topology(config.n_agents, config.radius, rng);
}

std::vector<envs::TaskParams> task_assignment(const ExperimentConfig& config, std::size_t n_agents) {
    const auto family = envs::make_family(config.env.family);
    std::vector<envs::TaskParams> tasks;
    if (config.env.use_grid) {
        if (n_agents != family.grid.size())
            throw ConfigError("env.task_grid", "grid size does not match the number of agents");
        tasks = family.grid;
    } else {
        tasks.assign(n_agents, config.env.single_task_params.value_or(family.single_task));
    }
    for (std::size_t i = 0; i < config.env.task_overrides.size(); ++i) {
        const auto& o = config.env.task_overrides[i];
        if (o.agent >= n_agents)
            throw ConfigError("env.task_overrides[" + std::to_string(i) + "].agent", "agent index out of range");
        tasks[o.agent] = o.params;
    }
    // give unlabelled override tasks fresh ids so metrics keep them apart
    int next_id = 0;
    for (const auto& t : tasks) next_id = std::max(next_id, t.task_id + 1);
    std::vector<std::pair<envs::TaskParams, int>> labelled;
    for (auto& t : tasks) {
        if (t.task_id >= 0) continue;
        auto same = std::find_if(labelled.begin(), labelled.end(), [&](const auto& e) {
            return e.first.describe() == t.describe();
        });
        if (same != labelled.end()) {
            t.task_id = same->second;
        } else {
            labelled.push_back({t, next_id});
            t.task_id = next_id++;
        }
    }
    return tasks;
}

namespace {

std::vector<tabular::TabularMdp> tabular_tasks(const TabularConfig& t, std::uint64_t seed) {
    std::vector<tabular::TabularMdp> tasks;
    if (t.source == "files") {
        for (const auto& f : t.files) tasks.push_back(tabular::load_mdp(f));
        return tasks;
    }
    Rng rng = make_rng({seed, 0x7ab});
    for (std::size_t k = 0; k < t.n_tasks; ++k) {
        if (t.source == "gridworld")
            tasks.push_back(envs::make_gridworld(t.size, t.noise, t.discount, rng));
        else
            tasks.push_back(tabular::random_mdp(t.size, t.n_actions, t.discount, rng, "random" + std::to_string(k)));
    }
    return tasks;
}

SeedSummary run_tabular(const ExperimentConfig& config, std::uint64_t seed, const std::filesystem::path& dir) {
    const auto& t = config.tabular;
    const auto tasks = tabular_tasks(t, seed);
    tabular::StepSchedule schedule{t.inverse_decay ? tabular::StepSchedule::Kind::InverseDecay
                                                   : tabular::StepSchedule::Kind::Constant,
                                   t.step};
    const auto sol = tabular::tabular_actor_critic(tasks, schedule, t.iters, t.tol);
    const auto avg = tabular::average_mdps(tasks);
    const auto v_star = tabular::value_iteration(avg, std::min(t.tol, 1e-8), 1000000);
    const double err = (sol.value - v_star).lpNorm<Eigen::Infinity>();

    std::filesystem::create_directories(dir);
    json report;
    report["seed"] = seed;
    report["tasks"] = avg.provenance;
    report["iterations"] = sol.iterations;
    report["value"] = std::vector<double>(sol.value.begin(), sol.value.end());
    report["optimal_value"] = std::vector<double>(v_star.begin(), v_star.end());
    report["sup_error"] = err;
    std::ofstream(dir / "report.json") << report.dump(2) << '\n';

    SeedSummary s;
    s.seed = seed;
    s.directory = dir;
    s.episodes_per_agent = sol.iterations;
    s.final_median = err;
    return s;
}

} // namespace

std::vector<SeedSummary> run_experiment(const ExperimentConfig& config, std::ostream& log) {
    config.validate();
    const auto root = config.output_dir / config.name;
    std::filesystem::create_directories(root);
    std::ofstream(root / "config.json") << serialize_config(config) << '\n';

    std::vector<SeedSummary> out;
    if (config.algorithm == Algorithm::Tabular) {
        for (auto seed : config.seeds) {
            auto s = run_tabular(config, seed, root / ("tabular_seed" + std::to_string(seed)));
            log << config.name << " tabular seed=" << seed << " iterations=" << s.episodes_per_agent
                << " sup_error=" << format_double(s.final_median) << "\n";
            out.push_back(s);
        }
        return out;
    }

    const auto topology = build_topology(config.net);
    const auto tasks = task_assignment(config, topology.size());
    envs::EnvOptions env_options;
    env_options.swingup_encoding = config.env.swingup_encoding;
    for (auto seed : config.seeds) {
        auto rc = config.run;
        rc.seed = seed;
        const auto dir = root / (to_string(config.algorithm) + "_seed" + std::to_string(seed));
        training::RunOutputs outputs{dir};
        training::RunResult result;
        if (config.algorithm == Algorithm::DiffDac)
            result = training::diffdac_run(rc, net::hastings_weights(topology), tasks, env_options, outputs);
        else
            result = training::cent_ac_run(rc, tasks, env_options, outputs);
        SeedSummary s;
        s.seed = seed;
        s.directory = dir;
        s.episodes_per_agent = result.episodes_per_agent;
        s.final_median = result.metrics.back().return_median;
        s.reached_target = result.reached_target;
        log << config.name << " " << to_string(config.algorithm) << " seed=" << seed
            << " agents=" << topology.size() << " avg_degree=" << format_double(topology.average_degree())
            << " episodes=" << s.episodes_per_agent << " final_median=" << format_double(s.final_median)
            << (rc.target_return ? (s.reached_target ? " target=reached" : " target=missed") : "") << "\n";
        out.push_back(s);
    }
    return out;
}

// ---------------------------------------------------------------- tabular oracle

bool OracleReport::passed() const {
    return std::all_of(cases.begin(), cases.end(), [](const OracleCase& c) { return c.passed; });
}

std::vector<std::vector<tabular::TabularMdp>> oracle_battery(std::string_view kind, std::size_t cases,
                                                             std::uint64_t base_seed) {
    std::vector<std::vector<tabular::TabularMdp>> out;
    for (std::size_t i = 0; i < cases; ++i) {
        const std::uint64_t seed = base_seed + i;
        Rng rng = make_rng({seed, 0x0ac1e});
        std::vector<tabular::TabularMdp> tasks;
        if (kind == "gridworld") {
            for (int k = 0; k < 2; ++k) tasks.push_back(envs::make_gridworld(3, 0.1, 0.9, rng));
        } else if (kind == "random") {
            const auto n_tasks = std::uniform_int_distribution<std::size_t>(2, 5)(rng);
            const auto n_states = std::uniform_int_distribution<std::size_t>(9, 25)(rng);
            const auto n_actions = std::uniform_int_distribution<std::size_t>(3, 4)(rng);
            for (std::size_t k = 0; k < n_tasks; ++k)
                tasks.push_back(tabular::random_mdp(n_states, n_actions, 0.9, rng, "random" + std::to_string(k)));
        } else if (kind == "identical") {
            const auto task = envs::make_gridworld(3, 0.1, 0.9, rng);
            tasks = {task, task};
        } else {
            throw ArgumentError("unknown oracle battery '" + std::string(kind) + "'");
        }
        out.push_back(std::move(tasks));
    }
    return out;
}

OracleReport oracle_check(const std::vector<std::vector<tabular::TabularMdp>>& battery, double tolerance) {
    OracleReport report;
    report.tolerance = tolerance;
    std::uint64_t index = 0;
    for (const auto& tasks : battery) {
        OracleCase c;
        c.seed = ++index;
        c.n_tasks = tasks.size();
        c.n_states = tasks.front().n_states;
        c.n_actions = tasks.front().n_actions;
        const auto sol = tabular::tabular_actor_critic(tasks, {}, 20000, 1e-6);
        const auto v_star = tabular::value_iteration(tabular::average_mdps(tasks), 1e-10, 1000000);
        c.error = (sol.value - v_star).lpNorm<Eigen::Infinity>();
        c.iterations = sol.iterations;
        c.passed = c.error <= tolerance;
        report.cases.push_back(c);
    }
    return report;
}

} // namespace diffdac::experiment
