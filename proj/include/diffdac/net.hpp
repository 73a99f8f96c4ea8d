#pragma once

#include "diffdac/random.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace diffdac::net {

/// Undirected agent graph. Every node is its own neighbor.
class Topology {
public:
    Topology() = default;
    /// `adjacency` must be square and symmetric; the diagonal is forced to true.
    explicit Topology(std::vector<std::vector<bool>> adjacency,
                      std::vector<std::array<double, 2>> positions = {}, double radius = 0.0);

    std::size_t size() const { return adjacency_.size(); }
    bool linked(std::size_t k, std::size_t l) const { return adjacency_[k][l]; }
    /// Neighborhood of k, including k itself, in increasing index order.
    std::vector<std::size_t> neighborhood(std::size_t k) const;
    std::size_t neighborhood_size(std::size_t k) const;
    /// Mean neighborhood size, self included.
    double average_degree() const;
    bool connected() const;

    const std::vector<std::array<double, 2>>& positions() const { return positions_; }
    /// Connection radius of a geometric graph (0 for other constructions).
    double radius() const { return radius_; }

private:
    std::vector<std::vector<bool>> adjacency_;
    std::vector<std::array<double, 2>> positions_;
    double radius_ = 0.0;
};

/// Agents uniform in the unit square, linked when within `radius`. A disconnected draw
/// keeps the positions and grows the radius by 10% until the graph connects.
Topology random_geometric_topology(std::size_t n, double radius, Rng& rng);

Topology ring_topology(std::size_t n);
Topology complete_topology(std::size_t n);

/// Named networks used by the experiments.
struct Preset {
    std::string name;
    std::size_t n_agents;
    double radius;
    std::uint64_t seed;
    double target_degree;
};

const std::vector<Preset>& presets();
const Preset& find_preset(std::string_view name);
Topology make_preset(std::string_view name);

/// Doubly-stochastic, primitive weights; column k holds agent k's combination weights.
class CombinationMatrix {
public:
    CombinationMatrix() = default;
    /// Validates nonnegativity, double stochasticity (1e-12) and positive trace.
    explicit CombinationMatrix(Eigen::MatrixXd weights);

    const Eigen::MatrixXd& weights() const { return weights_; }
    std::size_t size() const { return static_cast<std::size_t>(weights_.rows()); }
    double operator()(std::size_t l, std::size_t k) const {
        return weights_(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k));
    }
    /// Pairs (l, c_lk) with c_lk > 0, increasing l.
    std::vector<std::pair<std::size_t, double>> incoming(std::size_t k) const;
    /// True when every positive weight sits on an edge of `topology`.
    bool respects(const Topology& topology) const;

private:
    Eigen::MatrixXd weights_;
};

/// Metropolis-Hastings rule: c_lk = 1 / max(|N_k|, |N_l|) off the diagonal, remainder on it.
CombinationMatrix hastings_weights(const Topology& topology);

/// Smallest i with max |(C^i)_lk - 1/N| <= tol. Throws ConvergenceError past `max_iters`.
std::size_t consensus_check(const CombinationMatrix& c, double tol, std::size_t max_iters = 100000);

/// Text format:
///   diffdac-topology 1
///   n_agents <N>
///   radius <r>
///   position <k> <x> <y>      (optional, one per agent)
///   edge <k> <l>              (k < l, self-loops implicit)
void save_topology(const Topology& topology, const std::filesystem::path& path);
Topology load_topology(const std::filesystem::path& path);
std::string serialize_topology(const Topology& topology);
Topology parse_topology(const std::string& text);

} // namespace diffdac::net
