#include "diffdac/nn.hpp"

#include "diffdac/errors.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

namespace diffdac::nn {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112; // ln(2 pi)

void apply_activation(Activation act, Matrix& m) {
    switch (act) {
    case Activation::Relu: m = m.cwiseMax(0.0); break;
    case Activation::Linear: break;
    case Activation::Tanh: m = m.array().tanh().matrix(); break;
    case Activation::Softplus: m = m.unaryExpr([](double x) { return softplus(x); }); break;
    }
}

void apply_activation(Activation act, Vector& v) {
    switch (act) {
    case Activation::Relu: v = v.cwiseMax(0.0); break;
    case Activation::Linear: break;
    case Activation::Tanh: v = v.array().tanh().matrix(); break;
    case Activation::Softplus: v = v.unaryExpr([](double x) { return softplus(x); }); break;
    }
}

// Multiplies `delta` in place by the activation derivative at (pre, post).
void scale_by_derivative(Activation act, const Matrix& pre, const Matrix& post, Matrix& delta) {
    switch (act) {
    case Activation::Relu: delta = (pre.array() > 0.0).select(delta, 0.0); break;
    case Activation::Linear: break;
    case Activation::Tanh: delta.array() *= 1.0 - post.array().square(); break;
    case Activation::Softplus:
        delta.array() *= pre.unaryExpr([](double x) { return sigmoid(x); }).array();
        break;
    }
}

void check_input(const MlpParams& params, Eigen::Index rows) {
    if (params.layers().empty()) throw ShapeError("network has no layers");
    if (static_cast<std::size_t>(rows) != params.input_dim())
        throw ShapeError("network expects input of size " + std::to_string(params.input_dim()) + ", got " +
                         std::to_string(rows));
}

void check_head(const GaussianPolicyHead& head) {
    if (head.backbone.output_dim() != 2) throw ShapeError("Gaussian head backbone must have two outputs");
}

struct HeadDerivatives {
    double mean;
    double variance;
    double dmean_dout; // d mean / d o_mean
    double dvar_dout;  // d variance / d o_var
};

HeadDerivatives head_terms(const GaussianPolicyHead& head, double o_mean, double o_var) {
    const double t = std::tanh(o_mean);
    return {head.action_bound * t, softplus(o_var) + head.min_variance, head.action_bound * (1.0 - t * t),
            sigmoid(o_var)};
}

} // namespace

std::string to_string(Activation a) {
    switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Linear: return "linear";
    case Activation::Tanh: return "tanh";
    case Activation::Softplus: return "softplus";
    }
    return "unknown";
}

Activation activation_from_string(std::string_view name) {
    if (name == "relu") return Activation::Relu;
    if (name == "linear") return Activation::Linear;
    if (name == "tanh") return Activation::Tanh;
    if (name == "softplus") return Activation::Softplus;
    throw ArgumentError("unknown activation '" + std::string(name) + "'");
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// ---------------------------------------------------------------- MlpParams

MlpParams::MlpParams(std::vector<Layer> layers) : layers_(std::move(layers)) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& l = layers_[i];
        if (l.bias.size() != l.weight.rows()) throw ShapeError("layer " + std::to_string(i) + ": bias/weight mismatch");
        if (i > 0 && l.weight.cols() != layers_[i - 1].weight.rows())
            throw ShapeError("layer " + std::to_string(i) + " does not chain with its predecessor");
    }
}

std::size_t MlpParams::input_dim() const {
    return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().weight.cols());
}

std::size_t MlpParams::output_dim() const {
    return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.back().weight.rows());
}

std::size_t MlpParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

Vector MlpParams::flat() const {
    Vector out(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index at = 0;
    for (const auto& l : layers_) {
        out.segment(at, l.weight.size()) = l.weight.reshaped();
        at += l.weight.size();
        out.segment(at, l.bias.size()) = l.bias;
        at += l.bias.size();
    }
    return out;
}

void MlpParams::set_flat(const Vector& values) {
    if (static_cast<std::size_t>(values.size()) != parameter_count())
        throw ShapeError("flat parameter vector has " + std::to_string(values.size()) + " entries, expected " +
                         std::to_string(parameter_count()));
    Eigen::Index at = 0;
    for (auto& l : layers_) {
        l.weight.reshaped() = values.segment(at, l.weight.size());
        at += l.weight.size();
        l.bias = values.segment(at, l.bias.size());
        at += l.bias.size();
    }
}

MlpParams MlpParams::zeros_like() const {
    std::vector<Layer> out;
    out.reserve(layers_.size());
    for (const auto& l : layers_)
        out.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size()), l.activation});
    return MlpParams(std::move(out));
}

bool MlpParams::same_shape(const MlpParams& other) const {
    if (layers_.size() != other.layers_.size()) return false;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& a = layers_[i];
        const auto& b = other.layers_[i];
        if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols() || a.activation != b.activation)
            return false;
    }
    return true;
}

MlpParams make_mlp(std::span<const std::size_t> sizes, Activation hidden, Activation output, Rng& rng,
                   double output_scale) {
    if (sizes.size() < 2) throw ArgumentError("a network needs input and output sizes");
    std::vector<Layer> layers;
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
        const bool last = i + 2 == sizes.size();
        const Activation act = last ? output : hidden;
        const auto fan_in = static_cast<double>(sizes[i]);
        const double scale = last ? output_scale
                             : act == Activation::Relu ? std::sqrt(6.0 / fan_in)
                                                       : 1.0 / std::sqrt(fan_in);
        std::uniform_real_distribution<double> unif(-scale, scale);
        Layer l{Matrix(static_cast<Eigen::Index>(sizes[i + 1]), static_cast<Eigen::Index>(sizes[i])),
                Vector::Zero(static_cast<Eigen::Index>(sizes[i + 1])), act};
        for (Eigen::Index j = 0; j < l.weight.size(); ++j) l.weight(j) = unif(rng);
        layers.push_back(std::move(l));
    }
    return MlpParams(std::move(layers));
}

// ---------------------------------------------------------------- forward / backward

Vector forward(const MlpParams& params, const Vector& input) {
    check_input(params, input.size());
    Vector x = input;
    for (const auto& l : params.layers()) {
        Vector y = l.bias;
        y.noalias() += l.weight * x;
        apply_activation(l.activation, y);
        x = std::move(y);
    }
    return x;
}

Matrix forward_batch(const MlpParams& params, const Matrix& inputs) {
    check_input(params, inputs.rows());
    Matrix x = inputs;
    for (const auto& l : params.layers()) {
        Matrix y = l.weight * x;
        y.colwise() += l.bias;
        apply_activation(l.activation, y);
        x = std::move(y);
    }
    return x;
}

ForwardTrace forward_trace(const MlpParams& params, const Matrix& inputs) {
    check_input(params, inputs.rows());
    ForwardTrace trace;
    trace.activations.push_back(inputs);
    for (const auto& l : params.layers()) {
        Matrix pre = l.weight * trace.activations.back();
        pre.colwise() += l.bias;
        Matrix post = pre;
        apply_activation(l.activation, post);
        trace.pre.push_back(std::move(pre));
        trace.activations.push_back(std::move(post));
    }
    return trace;
}

MlpParams backward_batch(const MlpParams& params, const ForwardTrace& trace, const Matrix& upstream) {
    const auto& layers = params.layers();
    if (trace.pre.size() != layers.size()) throw ShapeError("forward trace does not match the network");
    if (upstream.rows() != trace.output().rows() || upstream.cols() != trace.output().cols())
        throw ShapeError("upstream gradient does not match the network output");
    MlpParams grad = params.zeros_like();
    Matrix delta = upstream;
    for (std::size_t i = layers.size(); i-- > 0;) {
        scale_by_derivative(layers[i].activation, trace.pre[i], trace.activations[i + 1], delta);
        auto& g = grad.layers()[i];
        g.weight.noalias() = delta * trace.activations[i].transpose();
        g.bias = delta.rowwise().sum();
        if (i > 0) {
            Matrix next = layers[i].weight.transpose() * delta;
            delta = std::move(next);
        }
    }
    return grad;
}

MlpParams backward(const MlpParams& params, const Vector& input, const Vector& upstream) {
    const ForwardTrace trace = forward_trace(params, input);
    return backward_batch(params, trace, upstream);
}

// ---------------------------------------------------------------- Gaussian head

GaussianPolicyHead make_gaussian_head(std::span<const std::size_t> hidden_sizes, std::size_t obs_dim,
                                      double action_bound, double min_variance, Rng& rng) {
    if (!(action_bound > 0.0)) throw ArgumentError("action bound must be positive");
    if (!(min_variance >= 0.0)) throw ArgumentError("variance floor must be nonnegative");
    std::vector<std::size_t> sizes{obs_dim};
    sizes.insert(sizes.end(), hidden_sizes.begin(), hidden_sizes.end());
    sizes.push_back(2);
    return {make_mlp(sizes, Activation::Relu, Activation::Linear, rng), action_bound, min_variance};
}

GaussianMoments gaussian_moments(const GaussianPolicyHead& head, const Vector& state) {
    check_head(head);
    const Vector out = forward(head.backbone, state);
    const auto t = head_terms(head, out(0), out(1));
    return {t.mean, t.variance};
}

double sample_action(const GaussianPolicyHead& head, const Vector& state, Rng& rng) {
    const auto m = gaussian_moments(head, state);
    std::normal_distribution<double> normal(0.0, 1.0);
    return m.mean + std::sqrt(m.variance) * normal(rng);
}

double gaussian_log_prob(const GaussianPolicyHead& head, const Vector& state, double action) {
    if (!std::isfinite(action)) throw NumericError("log-probability of a non-finite action");
    const auto m = gaussian_moments(head, state);
    const double diff = action - m.mean;
    return -0.5 * (kLog2Pi + std::log(m.variance)) - diff * diff / (2.0 * m.variance);
}

ValueAndGradient gaussian_log_prob_grad(const GaussianPolicyHead& head, const Vector& state, double action) {
    Matrix states = state;
    const double a[] = {action};
    const double w[] = {1.0};
    return policy_objective(head, states, a, w, 0.0);
}

double gaussian_entropy(const GaussianPolicyHead& head, const Vector& state) {
    const auto m = gaussian_moments(head, state);
    return 0.5 * (kLog2Pi + 1.0 + std::log(m.variance));
}

ValueAndGradient gaussian_entropy_grad(const GaussianPolicyHead& head, const Vector& state) {
    Matrix states = state;
    const double a[] = {0.0};
    const double w[] = {0.0};
    return policy_objective(head, states, a, w, 1.0);
}

ValueAndGradient policy_objective(const GaussianPolicyHead& head, const Matrix& states,
                                  std::span<const double> actions, std::span<const double> weights,
                                  double entropy_coeff) {
    check_head(head);
    const auto batch = static_cast<std::size_t>(states.cols());
    if (actions.size() != batch || weights.size() != batch)
        throw ShapeError("policy objective needs one action and one weight per state");
    const ForwardTrace trace = forward_trace(head.backbone, states);
    const Matrix& out = trace.output();
    Matrix upstream(2, states.cols());
    double value = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        const auto col = static_cast<Eigen::Index>(b);
        if (!std::isfinite(actions[b])) throw NumericError("non-finite action in policy objective");
        const auto t = head_terms(head, out(0, col), out(1, col));
        const double diff = actions[b] - t.mean;
        const double log_prob = -0.5 * (kLog2Pi + std::log(t.variance)) - diff * diff / (2.0 * t.variance);
        const double entropy = 0.5 * (kLog2Pi + 1.0 + std::log(t.variance));
        value += weights[b] * log_prob + entropy_coeff * entropy;

        const double dlogp_dmean = diff / t.variance;
        const double dlogp_dvar = -0.5 / t.variance + diff * diff / (2.0 * t.variance * t.variance);
        const double dent_dvar = 0.5 / t.variance;
        upstream(0, col) = weights[b] * dlogp_dmean * t.dmean_dout;
        upstream(1, col) = (weights[b] * dlogp_dvar + entropy_coeff * dent_dvar) * t.dvar_dout;
    }
    return {value, backward_batch(head.backbone, trace, upstream)};
}

// ---------------------------------------------------------------- optimizers

AdamState::AdamState(std::size_t n, double b1, double b2, double eps)
    : first_moment(Vector::Zero(static_cast<Eigen::Index>(n))),
      second_moment(Vector::Zero(static_cast<Eigen::Index>(n))), beta1(b1), beta2(b2), epsilon(eps) {}

void adam_step(AdamState& state, Vector& params, const Vector& gradient, double rate) {
    if (gradient.size() != params.size() || state.first_moment.size() != params.size())
        throw ShapeError("ADAM state, parameters and gradient must have the same length");
    ++state.step;
    state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * gradient;
    state.second_moment = state.beta2 * state.second_moment + (1.0 - state.beta2) * gradient.cwiseAbs2();
    const double step = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, step);
    const double c2 = 1.0 - std::pow(state.beta2, step);
    params.array() -= rate * (state.first_moment.array() / c1) /
                      ((state.second_moment.array() / c2).sqrt() + state.epsilon);
}

void sgd_step(Vector& params, const Vector& gradient, double rate) {
    if (gradient.size() != params.size()) throw ShapeError("parameters and gradient must have the same length");
    params -= rate * gradient;
}

// ---------------------------------------------------------------- checkpoints

std::string serialize_params(const MlpParams& params) {
    std::ostringstream os;
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    os << "diffdac-mlp 1\n";
    os << "layers " << params.layers().size() << "\n";
    for (const auto& l : params.layers())
        os << "layer " << l.weight.cols() << " " << l.weight.rows() << " " << to_string(l.activation) << "\n";
    const Vector flat = params.flat();
    os << "values " << flat.size() << "\n";
    for (Eigen::Index i = 0; i < flat.size(); ++i) os << flat(i) << "\n";
    return os.str();
}

MlpParams parse_params(const std::string& text) {
    std::istringstream in(text);
    std::string word;
    int version = 0;
    if (!(in >> word >> version) || word != "diffdac-mlp" || version != 1)
        throw ConfigError("checkpoint", "missing 'diffdac-mlp 1' header");
    std::size_t n_layers = 0;
    if (!(in >> word >> n_layers) || word != "layers") throw ConfigError("checkpoint.layers", "malformed");
    std::vector<Layer> layers;
    for (std::size_t i = 0; i < n_layers; ++i) {
        std::size_t fan_in = 0, fan_out = 0;
        std::string act;
        if (!(in >> word >> fan_in >> fan_out >> act) || word != "layer")
            throw ConfigError("checkpoint.layer", "malformed layer line " + std::to_string(i));
        layers.push_back({Matrix::Zero(static_cast<Eigen::Index>(fan_out), static_cast<Eigen::Index>(fan_in)),
                          Vector::Zero(static_cast<Eigen::Index>(fan_out)), activation_from_string(act)});
    }
    MlpParams params(std::move(layers));
    std::size_t count = 0;
    if (!(in >> word >> count) || word != "values") throw ConfigError("checkpoint.values", "malformed");
    if (count != params.parameter_count()) throw ShapeError("checkpoint value count does not match its layers");
    Vector flat(static_cast<Eigen::Index>(count));
    for (Eigen::Index i = 0; i < flat.size(); ++i) {
        // operator>> rejects "inf"/"nan", so parse tokens with strtod.
        if (!(in >> word)) throw ConfigError("checkpoint.values", "truncated");
        flat(i) = std::strtod(word.c_str(), nullptr);
    }
    params.set_flat(flat);
    return params;
}

void save_params(const MlpParams& params, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError(path.string(), "cannot write checkpoint");
    out << serialize_params(params);
}

MlpParams load_params(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string(), "cannot open checkpoint");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_params(buf.str());
}

} // namespace diffdac::nn
