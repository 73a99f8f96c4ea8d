#pragma once

#include "diffdac/tabular.hpp"

#include <filesystem>
#include <string>

namespace diffdac::tabular {

/// JSON layout:
///   { "name": str, "n_states": int, "n_actions": int, "discount": real,
///     "reward_bound": real (optional, defaults to max |reward|),
///     "transition": [ |S||A||S| reals, row-major over (s, a, s') ],
///     "reward": [ |S||A| reals, row-major over (s, a) ],
///     "initial_dist": [ |S| reals ] }
TabularMdp parse_mdp(const std::string& json_text);
std::string serialize_mdp(const TabularMdp& mdp);

TabularMdp load_mdp(const std::filesystem::path& path);
void save_mdp(const TabularMdp& mdp, const std::filesystem::path& path);

} // namespace diffdac::tabular
