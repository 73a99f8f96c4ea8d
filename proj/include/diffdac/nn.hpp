#pragma once

#include "diffdac/random.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace diffdac::nn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Activation { Relu, Linear, Tanh, Softplus };

std::string to_string(Activation a);
Activation activation_from_string(std::string_view name);

/// ln(1 + e^x) without overflow.
double softplus(double x);
double sigmoid(double x);

struct Layer {
    Matrix weight; // out x in
    Vector bias;   // out
    Activation activation = Activation::Linear;
};

/// Dense feed-forward network. The flat view concatenates, layer by layer, the
/// column-major weight followed by the bias.
class MlpParams {
public:
    MlpParams() = default;
    /// Throws ShapeError when consecutive layers do not chain.
    explicit MlpParams(std::vector<Layer> layers);

    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }
    std::size_t input_dim() const;
    std::size_t output_dim() const;
    std::size_t parameter_count() const;

    Vector flat() const;
    /// Overwrites every parameter from `values`; throws ShapeError on a length mismatch.
    void set_flat(const Vector& values);
    /// Same shapes and activations, all entries zero.
    MlpParams zeros_like() const;
    bool same_shape(const MlpParams& other) const;

private:
    std::vector<Layer> layers_;
};

/// Fully connected net `sizes[0] -> ... -> sizes.back()`. Hidden layers use `hidden`,
/// the last layer `output`. ReLU layers draw U(+-sqrt(6 / fan_in)), others
/// U(+-1 / sqrt(fan_in)); the output layer draws U(+-output_scale). Biases start at zero.
MlpParams make_mlp(std::span<const std::size_t> sizes, Activation hidden, Activation output, Rng& rng,
                   double output_scale = 3e-3);

Vector forward(const MlpParams& params, const Vector& input);
/// Columns are samples.
Matrix forward_batch(const MlpParams& params, const Matrix& inputs);

/// Intermediates of a batched forward pass: `activations[0]` is the input,
/// `activations[l + 1]` the output of layer l, `pre[l]` its pre-activation.
struct ForwardTrace {
    std::vector<Matrix> pre;
    std::vector<Matrix> activations;
    const Matrix& output() const { return activations.back(); }
};

ForwardTrace forward_trace(const MlpParams& params, const Matrix& inputs);

/// Reverse-mode gradient of sum_b upstream(:, b) . output(:, b) with respect to the
/// parameters, summed over the batch.
MlpParams backward_batch(const MlpParams& params, const ForwardTrace& trace, const Matrix& upstream);
MlpParams backward(const MlpParams& params, const Vector& input, const Vector& upstream);

// ---------------------------------------------------------------- Gaussian policy

/// The backbone has two linear outputs (o_mean, o_var):
/// mean = action_bound * tanh(o_mean), variance = softplus(o_var) + min_variance.
struct GaussianPolicyHead {
    MlpParams backbone;
    double action_bound = 1.0;
    double min_variance = 0.0;
};

struct GaussianMoments {
    double mean = 0.0;
    double variance = 1.0;
};

GaussianPolicyHead make_gaussian_head(std::span<const std::size_t> hidden_sizes, std::size_t obs_dim,
                                      double action_bound, double min_variance, Rng& rng);

GaussianMoments gaussian_moments(const GaussianPolicyHead& head, const Vector& state);
/// Draws mean + sqrt(variance) * z with z ~ N(0, 1).
double sample_action(const GaussianPolicyHead& head, const Vector& state, Rng& rng);

struct ValueAndGradient {
    double value = 0.0;
    MlpParams gradient;
};

double gaussian_log_prob(const GaussianPolicyHead& head, const Vector& state, double action);
ValueAndGradient gaussian_log_prob_grad(const GaussianPolicyHead& head, const Vector& state, double action);
/// 0.5 * ln(2 pi e variance).
double gaussian_entropy(const GaussianPolicyHead& head, const Vector& state);
ValueAndGradient gaussian_entropy_grad(const GaussianPolicyHead& head, const Vector& state);

/// sum_b weights_b * log pi(actions_b | states_b) + entropy_coeff * sum_b H(pi(.|states_b)),
/// with its gradient. `states` has one column per sample. Throws NumericError on a
/// non-finite action.
ValueAndGradient policy_objective(const GaussianPolicyHead& head, const Matrix& states,
                                  std::span<const double> actions, std::span<const double> weights,
                                  double entropy_coeff);

// ---------------------------------------------------------------- optimizers

struct AdamState {
    AdamState() = default;
    explicit AdamState(std::size_t n, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

    Vector first_moment;
    Vector second_moment;
    std::size_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Bias-corrected ADAM descent step on `params` along `gradient`.
void adam_step(AdamState& state, Vector& params, const Vector& gradient, double rate);
void sgd_step(Vector& params, const Vector& gradient, double rate);

// ---------------------------------------------------------------- checkpoints

/// Text dump:
///   diffdac-mlp 1
///   layers <L>
///   layer <in> <out> <activation>      (L lines)
///   values <count>
///   <one value per line, 17 significant digits>
std::string serialize_params(const MlpParams& params);
MlpParams parse_params(const std::string& text);
void save_params(const MlpParams& params, const std::filesystem::path& path);
MlpParams load_params(const std::filesystem::path& path);

} // namespace diffdac::nn
