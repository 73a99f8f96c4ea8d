#include "diffdac/net.hpp"

#include "diffdac/errors.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace diffdac::net {

Topology::Topology(std::vector<std::vector<bool>> adjacency, std::vector<std::array<double, 2>> positions,
                   double radius)
    : adjacency_(std::move(adjacency)), positions_(std::move(positions)), radius_(radius) {
    const std::size_t n = adjacency_.size();
    for (std::size_t k = 0; k < n; ++k) {
        if (adjacency_[k].size() != n) throw ShapeError("adjacency matrix is not square");
        adjacency_[k][k] = true;
    }
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = 0; l < k; ++l)
            if (adjacency_[k][l] != adjacency_[l][k]) throw ArgumentError("adjacency matrix is not symmetric");
    if (!positions_.empty() && positions_.size() != n) throw ShapeError("one position per agent expected");
}

std::vector<std::size_t> Topology::neighborhood(std::size_t k) const {
    std::vector<std::size_t> out;
    for (std::size_t l = 0; l < size(); ++l)
        if (adjacency_[k][l]) out.push_back(l);
    return out;
}

std::size_t Topology::neighborhood_size(std::size_t k) const {
    std::size_t count = 0;
    for (bool linked : adjacency_[k]) count += linked ? 1 : 0;
    return count;
}

double Topology::average_degree() const {
    if (size() == 0) return 0.0;
    double total = 0.0;
    for (std::size_t k = 0; k < size(); ++k) total += static_cast<double>(neighborhood_size(k));
    return total / static_cast<double>(size());
}

bool Topology::connected() const {
    if (size() == 0) return true;
    std::vector<bool> seen(size(), false);
    std::vector<std::size_t> stack{0};
    seen[0] = true;
    std::size_t visited = 1;
    while (!stack.empty()) {
        const auto k = stack.back();
        stack.pop_back();
        for (std::size_t l = 0; l < size(); ++l) {
            if (adjacency_[k][l] && !seen[l]) {
                seen[l] = true;
                ++visited;
                stack.push_back(l);
            }
        }
    }
    return visited == size();
}

namespace {

Topology geometric_graph(const std::vector<std::array<double, 2>>& pos, double radius) {
    const std::size_t n = pos.size();
    std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = 0; l < n; ++l)
            adj[k][l] = std::hypot(pos[k][0] - pos[l][0], pos[k][1] - pos[l][1]) <= radius;
    return Topology(std::move(adj), pos, radius);
}

} // namespace

Topology random_geometric_topology(std::size_t n, double radius, Rng& rng) {
    if (n == 0) throw ArgumentError("a network needs at least one agent");
    if (!(radius > 0.0)) throw ArgumentError("connection radius must be positive");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::array<double, 2>> pos(n);
    for (auto& p : pos) {
        p[0] = unif(rng);
        p[1] = unif(rng);
    }
    Topology topo = geometric_graph(pos, radius);
    // Terminates: once radius >= sqrt(2) every pair is linked.
    while (!topo.connected()) {
        radius *= 1.1;
        topo = geometric_graph(pos, radius);
    }
    return topo;
}

Topology ring_topology(std::size_t n) {
    if (n == 0) throw ArgumentError("a network needs at least one agent");
    std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
    for (std::size_t k = 0; k < n; ++k) {
        adj[k][(k + 1) % n] = true;
        adj[(k + 1) % n][k] = true;
    }
    return Topology(std::move(adj));
}

Topology complete_topology(std::size_t n) {
    if (n == 0) throw ArgumentError("a network needs at least one agent");
    return Topology(std::vector<std::vector<bool>>(n, std::vector<bool>(n, true)));
}

const std::vector<Preset>& presets() {
    // Seeds and radii chosen so the draws land near the reported average degrees.
    static const std::vector<Preset> table{
        {"n25_sparse", 25, 0.25, 2, 4.2},
        {"n25_dense", 25, 0.30, 55, 7.4},
        {"n100", 100, 0.26, 166, 20.0},
    };
    return table;
}

const Preset& find_preset(std::string_view name) {
    for (const auto& p : presets())
        if (p.name == name) return p;
    throw ArgumentError("unknown network preset '" + std::string(name) + "'");
}

Topology make_preset(std::string_view name) {
    const auto& p = find_preset(name);
    Rng rng = make_rng({p.seed});
    return random_geometric_topology(p.n_agents, p.radius, rng);
}

CombinationMatrix::CombinationMatrix(Eigen::MatrixXd weights) : weights_(std::move(weights)) {
    constexpr double tol = 1e-12;
    if (weights_.rows() != weights_.cols()) throw ShapeError("combination matrix must be square");
    if (weights_.size() == 0) throw ShapeError("combination matrix is empty");
    if (!weights_.allFinite() || weights_.minCoeff() < 0.0)
        throw InvariantError("combination weights must be finite and nonnegative");
    for (Eigen::Index i = 0; i < weights_.rows(); ++i) {
        if (std::abs(weights_.row(i).sum() - 1.0) > tol) throw InvariantError("row sum differs from 1");
        if (std::abs(weights_.col(i).sum() - 1.0) > tol) throw InvariantError("column sum differs from 1");
    }
    if (!(weights_.trace() > 0.0)) throw InvariantError("combination matrix needs a positive trace");
}

std::vector<std::pair<std::size_t, double>> CombinationMatrix::incoming(std::size_t k) const {
    std::vector<std::pair<std::size_t, double>> out;
    for (std::size_t l = 0; l < size(); ++l)
        if ((*this)(l, k) > 0.0) out.emplace_back(l, (*this)(l, k));
    return out;
}

bool CombinationMatrix::respects(const Topology& topology) const {
    if (topology.size() != size()) return false;
    for (std::size_t l = 0; l < size(); ++l)
        for (std::size_t k = 0; k < size(); ++k)
            if ((*this)(l, k) > 0.0 && !topology.linked(l, k)) return false;
    return true;
}

CombinationMatrix hastings_weights(const Topology& topology) {
    if (topology.size() == 0) throw ArgumentError("empty topology");
    if (!topology.connected()) throw ArgumentError("Hastings weights need a connected topology");
    const auto n = static_cast<Eigen::Index>(topology.size());
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto nk = topology.neighborhood_size(static_cast<std::size_t>(k));
        double off_diagonal = 0.0;
        for (Eigen::Index l = 0; l < n; ++l) {
            if (l == k || !topology.linked(static_cast<std::size_t>(l), static_cast<std::size_t>(k))) continue;
            const auto nl = topology.neighborhood_size(static_cast<std::size_t>(l));
            c(l, k) = 1.0 / static_cast<double>(std::max(nk, nl));
            off_diagonal += c(l, k);
        }
        c(k, k) = 1.0 - off_diagonal;
    }
    return CombinationMatrix(std::move(c));
}

std::size_t consensus_check(const CombinationMatrix& c, double tol, std::size_t max_iters) {
    if (!(tol > 0.0)) throw ArgumentError("consensus tolerance must be positive");
    const auto n = static_cast<Eigen::Index>(c.size());
    const double avg = 1.0 / static_cast<double>(n);
    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(n, n);
    double gap = 0.0;
    for (std::size_t i = 0; i <= max_iters; ++i) {
        gap = (power.array() - avg).abs().maxCoeff();
        if (gap <= tol) return i;
        power = power * c.weights();
    }
    throw ConvergenceError("powers of the combination matrix did not reach consensus", gap);
}

std::string serialize_topology(const Topology& topology) {
    std::ostringstream os;
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    os << "diffdac-topology 1\n";
    os << "n_agents " << topology.size() << "\n";
    os << "radius " << topology.radius() << "\n";
    for (std::size_t k = 0; k < topology.positions().size(); ++k)
        os << "position " << k << " " << topology.positions()[k][0] << " " << topology.positions()[k][1] << "\n";
    for (std::size_t k = 0; k < topology.size(); ++k)
        for (std::size_t l = k + 1; l < topology.size(); ++l)
            if (topology.linked(k, l)) os << "edge " << k << " " << l << "\n";
    return os.str();
}

Topology parse_topology(const std::string& text) {
    std::istringstream in(text);
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != "diffdac-topology" || version != 1)
        throw ConfigError("topology", "missing 'diffdac-topology 1' header");
    std::size_t n = 0;
    double radius = 0.0;
    std::vector<std::vector<bool>> adj;
    std::vector<std::array<double, 2>> pos;
    std::string key;
    while (in >> key) {
        if (key == "n_agents") {
            if (!(in >> n) || n == 0) throw ConfigError("topology.n_agents", "expected a positive count");
            adj.assign(n, std::vector<bool>(n, false));
        } else if (key == "radius") {
            if (!(in >> radius)) throw ConfigError("topology.radius", "expected a number");
        } else if (key == "position") {
            std::size_t k;
            double x, y;
            if (!(in >> k >> x >> y) || k >= n) throw ConfigError("topology.position", "malformed entry");
            if (pos.empty()) pos.assign(n, {0.0, 0.0});
            pos[k] = {x, y};
        } else if (key == "edge") {
            std::size_t k, l;
            if (!(in >> k >> l) || k >= n || l >= n) throw ConfigError("topology.edge", "malformed entry");
            adj[k][l] = adj[l][k] = true;
        } else {
            throw ConfigError("topology", "unknown key '" + key + "'");
        }
    }
    if (n == 0) throw ConfigError("topology.n_agents", "missing");
    return Topology(std::move(adj), std::move(pos), radius);
}

void save_topology(const Topology& topology, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError(path.string(), "cannot write topology file");
    out << serialize_topology(topology);
}

Topology load_topology(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string(), "cannot open topology file");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_topology(buf.str());
}

} // namespace diffdac::net
