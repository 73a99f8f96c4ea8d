// diffdac command line: run experiments, check the tabular oracle, plot learning
// curves and manage network topologies.

#include "diffdac/errors.hpp"
#include "diffdac/experiment.hpp"
#include "diffdac/net.hpp"
#include "diffdac/plot.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iomanip>
#include <iostream>

using namespace diffdac;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kNumeric = 3 };

int cmd_run(const std::string& config_path, const std::string& preset, bool list) {
    if (list) {
        for (const auto& n : experiment::preset_names()) std::cout << n << "\n";
        return kOk;
    }
    if (config_path.empty() == preset.empty()) {
        std::cerr << "run: give exactly one of a config file or --preset\n";
        return kConfig;
    }
    std::vector<experiment::ExperimentConfig> configs;
    try {
        configs = preset.empty() ? std::vector{experiment::load_config(config_path)} : experiment::make_preset(preset);
        for (auto& c : configs) {
            experiment::apply_environment_overrides(c);
            c.validate();
            // resolve networks and tasks up front so a bad setup leaves no output behind
            if (c.algorithm != experiment::Algorithm::Tabular)
                experiment::task_assignment(c, experiment::build_topology(c.net).size());
        }
    } catch (const ConfigError& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return kConfig;
    }
    try {
        for (const auto& c : configs) experiment::run_experiment(c, std::cout);
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kNumeric;
    }
    return kOk;
}

int cmd_oracle(const std::string& kind, std::size_t cases, std::uint64_t seed, double tol, bool empty) {
    if (empty) cases = 0;
    const auto battery = experiment::oracle_battery(kind, cases, seed);
    if (battery.empty()) std::cerr << "warning: empty battery, nothing was checked\n";
    const auto report = experiment::oracle_check(battery, tol);
    for (const auto& c : report.cases)
        std::cout << "case " << c.seed << " (battery seed " << seed + c.seed - 1 << "): tasks=" << c.n_tasks
                  << " states=" << c.n_states << " actions=" << c.n_actions << " iters=" << c.iterations
                  << " error=" << std::scientific << std::setprecision(3) << c.error << std::defaultfloat
                  << (c.passed ? " ok" : " FAIL") << "\n";
    if (!report.passed()) {
        std::cout << "oracle check failed for battery seeds:";
        for (const auto& c : report.cases)
            if (!c.passed) std::cout << ' ' << seed + c.seed - 1;
        std::cout << "\n";
        return kFailure;
    }
    std::cout << "oracle check passed (" << report.cases.size() << " cases, tol " << tol << ")\n";
    return kOk;
}

void describe(const net::Topology& t) {
    const auto c = net::hastings_weights(t);
    std::size_t edges = 0;
    for (std::size_t k = 0; k < t.size(); ++k)
        for (std::size_t l = k + 1; l < t.size(); ++l) edges += t.linked(k, l);
    std::cout << "agents " << t.size() << "\nedges " << edges << "\naverage_degree " << t.average_degree()
              << "\nradius " << t.radius() << "\nconnected " << (t.connected() ? "yes" : "no")
              << "\nconsensus_iterations(1e-6) " << net::consensus_check(c, 1e-6) << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Diffusion distributed actor-critic experiments"};
    app.require_subcommand(1);

    std::string config_path, preset;
    bool list_presets = false;
    auto* run = app.add_subcommand("run", "Run an experiment from a JSON config or a named preset");
    run->add_option("config", config_path, "Experiment config (JSON)");
    run->add_option("--preset", preset, "Named preset");
    run->add_flag("--list-presets", list_presets, "Print preset names");

    std::string kind = "gridworld";
    std::size_t cases = 10;
    std::uint64_t oracle_seed = 1;
    double tol = 1e-2;
    bool empty = false;
    auto* oracle = app.add_subcommand("oracle-check", "Tabular actor-critic vs value iteration");
    oracle->add_option("--kind", kind, "gridworld | random | identical")->check(
        CLI::IsMember({"gridworld", "random", "identical"}));
    oracle->add_option("--cases", cases, "Number of task sets");
    oracle->add_option("--seed", oracle_seed, "First battery seed");
    oracle->add_option("--tol", tol, "Sup-norm tolerance");
    oracle->add_flag("--empty", empty, "Run an empty battery");

    std::vector<std::string> series;
    std::string plot_out = "learning_curve.svg", title = "Learning curve";
    auto* plot = app.add_subcommand("plot", "Median + interquartile learning curves from metrics CSVs");
    plot->add_option("csv", series, "[label:]metrics.csv, repeated labels are pooled")->required();
    plot->add_option("-o,--output", plot_out, "Output SVG");
    plot->add_option("--title", title, "Plot title");

    auto* topo = app.add_subcommand("topology", "Generate, inspect or export a network");
    topo->require_subcommand(1);
    std::string shape = "geometric", topo_out, topo_in, topo_preset;
    std::size_t n_agents = 25;
    double radius = 0.2;
    std::uint64_t net_seed = 1;
    auto* gen = topo->add_subcommand("generate", "Build a network and write it to a file");
    gen->add_option("--shape", shape, "geometric | ring | complete")->check(
        CLI::IsMember({"geometric", "ring", "complete"}));
    gen->add_option("--agents", n_agents, "Number of agents");
    gen->add_option("--radius", radius, "Connection radius (geometric)");
    gen->add_option("--seed", net_seed, "Placement seed (geometric)");
    gen->add_option("-o,--output", topo_out, "Topology file")->required();
    auto* inspect = topo->add_subcommand("inspect", "Print statistics of a network");
    inspect->add_option("file", topo_in, "Topology file");
    inspect->add_option("--preset", topo_preset, "Named network");
    auto* exp = topo->add_subcommand("export", "Write a named network to a file");
    exp->add_option("preset", topo_preset, "Named network")->required();
    exp->add_option("-o,--output", topo_out, "Topology file")->required();
    auto* list = topo->add_subcommand("presets", "List named networks");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(config_path, preset, list_presets);
        if (*oracle) return cmd_oracle(kind, cases, oracle_seed, tol, empty);
        if (*plot) {
            const auto specs = plot::parse_series_args(series);
            plot::plot(specs, plot_out, title);
            std::cout << "wrote " << plot_out << "\n";
            return kOk;
        }
        if (*gen) {
            net::Topology t = shape == "ring"       ? net::ring_topology(n_agents)
                              : shape == "complete" ? net::complete_topology(n_agents)
                                                    : [&] {
                                                          Rng rng = make_rng({net_seed});
                                                          return net::random_geometric_topology(n_agents, radius, rng);
                                                      }();
            net::save_topology(t, topo_out);
            describe(t);
            return kOk;
        }
        if (*inspect) {
            if (topo_in.empty() == topo_preset.empty()) {
                std::cerr << "inspect: give exactly one of a file or --preset\n";
                return kConfig;
            }
            describe(topo_preset.empty() ? net::load_topology(topo_in) : net::make_preset(topo_preset));
            return kOk;
        }
        if (*exp) {
            const auto t = net::make_preset(topo_preset);
            net::save_topology(t, topo_out);
            describe(t);
            return kOk;
        }
        if (*list) {
            for (const auto& p : net::presets())
                std::cout << p.name << " agents=" << p.n_agents << " radius=" << p.radius << " seed=" << p.seed
                          << "\n";
            return kOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfig;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kFailure;
}
