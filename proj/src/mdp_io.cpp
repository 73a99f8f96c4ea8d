#include "diffdac/mdp_io.hpp"

#include "diffdac/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace diffdac::tabular {

using nlohmann::json;

namespace {

std::vector<double> read_array(const json& doc, const char* key, std::size_t expected) {
    if (!doc.contains(key) || !doc.at(key).is_array()) throw ConfigError(key, "missing array");
    auto values = doc.at(key).get<std::vector<double>>();
    if (values.size() != expected)
        throw ShapeError(std::string(key) + ": expected " + std::to_string(expected) + " entries, got " +
                         std::to_string(values.size()));
    return values;
}

} // namespace

TabularMdp parse_mdp(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError("<root>", e.what());
    }
    TabularMdp mdp;
    try {
        mdp.name = doc.value("name", std::string("mdp"));
        mdp.n_states = doc.at("n_states").get<std::size_t>();
        mdp.n_actions = doc.at("n_actions").get<std::size_t>();
        mdp.discount = doc.at("discount").get<double>();
    } catch (const json::exception& e) {
        throw ConfigError("<root>", e.what());
    }
    const std::size_t sa = mdp.n_states * mdp.n_actions;
    const auto p = read_array(doc, "transition", sa * mdp.n_states);
    const auto r = read_array(doc, "reward", sa);
    const auto mu = read_array(doc, "initial_dist", mdp.n_states);

    mdp.transition = Matrix(static_cast<Eigen::Index>(sa), static_cast<Eigen::Index>(mdp.n_states));
    for (std::size_t i = 0; i < sa; ++i)
        for (std::size_t j = 0; j < mdp.n_states; ++j)
            mdp.transition(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                p[i * mdp.n_states + j];
    mdp.reward = Matrix(static_cast<Eigen::Index>(mdp.n_states), static_cast<Eigen::Index>(mdp.n_actions));
    for (std::size_t s = 0; s < mdp.n_states; ++s)
        for (std::size_t a = 0; a < mdp.n_actions; ++a)
            mdp.reward(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = r[s * mdp.n_actions + a];
    mdp.initial_dist = Eigen::Map<const Vector>(mu.data(), static_cast<Eigen::Index>(mu.size()));
    mdp.reward_bound = doc.contains("reward_bound") ? doc.at("reward_bound").get<double>()
                                                    : mdp.reward.cwiseAbs().maxCoeff();
    mdp.validate();
    return mdp;
}

std::string serialize_mdp(const TabularMdp& mdp) {
    json doc;
    doc["name"] = mdp.name;
    doc["n_states"] = mdp.n_states;
    doc["n_actions"] = mdp.n_actions;
    doc["discount"] = mdp.discount;
    doc["reward_bound"] = mdp.reward_bound;
    std::vector<double> p, r;
    for (Eigen::Index i = 0; i < mdp.transition.rows(); ++i)
        for (Eigen::Index j = 0; j < mdp.transition.cols(); ++j) p.push_back(mdp.transition(i, j));
    for (Eigen::Index s = 0; s < mdp.reward.rows(); ++s)
        for (Eigen::Index a = 0; a < mdp.reward.cols(); ++a) r.push_back(mdp.reward(s, a));
    doc["transition"] = p;
    doc["reward"] = r;
    doc["initial_dist"] = std::vector<double>(mdp.initial_dist.begin(), mdp.initial_dist.end());
    return doc.dump(2);
}

TabularMdp load_mdp(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string(), "cannot open MDP file");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_mdp(buf.str());
}

void save_mdp(const TabularMdp& mdp, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError(path.string(), "cannot write MDP file");
    out << serialize_mdp(mdp) << '\n';
}

} // namespace diffdac::tabular
