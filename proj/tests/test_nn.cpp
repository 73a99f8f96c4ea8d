#include "diffdac/errors.hpp"
#include "diffdac/nn.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace diffdac;
using namespace diffdac::nn;

namespace {

Vector random_vector(Eigen::Index n, Rng& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Vector v(n);
    for (auto& x : v) x = g(rng);
    return v;
}

// Naive per-neuron evaluation.
Vector reference_forward(const MlpParams& p, const Vector& x) {
    std::vector<double> a(x.data(), x.data() + x.size());
    for (const auto& l : p.layers()) {
        std::vector<double> next(static_cast<std::size_t>(l.weight.rows()));
        for (Eigen::Index i = 0; i < l.weight.rows(); ++i) {
            double z = l.bias(i);
            for (Eigen::Index j = 0; j < l.weight.cols(); ++j) z += l.weight(i, j) * a[static_cast<std::size_t>(j)];
            switch (l.activation) {
            case Activation::Relu: z = z > 0 ? z : 0; break;
            case Activation::Tanh: z = std::tanh(z); break;
            case Activation::Softplus: z = std::log1p(std::exp(z)); break;
            case Activation::Linear: break;
            }
            next[static_cast<std::size_t>(i)] = z;
        }
        a = std::move(next);
    }
    return Eigen::Map<Vector>(a.data(), static_cast<Eigen::Index>(a.size()));
}

GaussianPolicyHead head_with_outputs(double o_mean, double o_var, double bound, double min_var) {
    Layer l{Matrix::Zero(2, 3), Vector(2), Activation::Linear};
    l.bias << o_mean, o_var;
    return {MlpParams({l}), bound, min_var};
}

// Relative error of an analytic flat gradient against central differences on sampled coordinates.
double worst_fd_error(const std::function<double(const Vector&)>& f, const Vector& x, const Vector& grad,
                      std::size_t samples, Rng& rng, double h = 1e-5) {
    std::uniform_int_distribution<Eigen::Index> pick(0, x.size() - 1);
    double worst = 0;
    for (std::size_t i = 0; i < samples; ++i) {
        const auto j = pick(rng);
        worst = std::max(worst, testutil::relative_error(grad(j), testutil::central_difference(f, x, j, h), 1e-7));
    }
    return worst;
}

} // namespace

TEST(Softplus, ValuesAndAsymptotes) {
    EXPECT_NEAR(softplus(0.0), 0.693147180559945, 1e-12);
    EXPECT_NEAR(softplus(100.0), 100.0, 1e-12);
    EXPECT_GT(softplus(-100.0), 0.0);
    EXPECT_NEAR(softplus(-100.0) / std::exp(-100.0), 1.0, 1e-12);
    EXPECT_TRUE(std::isfinite(softplus(1000.0)));
}

TEST(Forward, ZeroNetworkGivesZero) {
    Layer l{Matrix::Zero(3, 4), Vector::Zero(3), Activation::Linear};
    EXPECT_EQ(forward(MlpParams({l}), Vector::Ones(4)), Vector(Vector::Zero(3)));
}

TEST(Forward, IdentityRelu) {
    Layer l{Matrix::Identity(2, 2), Vector::Zero(2), Activation::Relu};
    EXPECT_EQ(forward(MlpParams({l}), Vector{{-1.0, 2.0}}), (Vector{{0.0, 2.0}}));
}

TEST(Forward, MatchesNaiveEvaluation) {
    Rng rng = make_rng({1});
    for (auto hidden : {Activation::Relu, Activation::Tanh, Activation::Softplus}) {
        const std::size_t sizes[] = {5, 17, 9, 3};
        const auto p = make_mlp(sizes, hidden, Activation::Linear, rng, 0.5);
        for (int t = 0; t < 20; ++t) {
            const Vector x = random_vector(5, rng);
            EXPECT_LE((forward(p, x) - reference_forward(p, x)).cwiseAbs().maxCoeff(), 1e-12);
        }
        const Matrix batch = Matrix::Random(5, 8);
        const Matrix out = forward_batch(p, batch);
        for (Eigen::Index c = 0; c < 8; ++c)
            EXPECT_LE((out.col(c) - reference_forward(p, batch.col(c))).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Forward, ShapeMismatchThrows) {
    Rng rng = make_rng({2});
    const std::size_t sizes[] = {3, 4, 1};
    const auto p = make_mlp(sizes, Activation::Relu, Activation::Linear, rng);
    EXPECT_THROW(forward(p, Vector::Zero(2)), ShapeError);
    EXPECT_THROW(backward(p, Vector::Zero(3), Vector::Zero(2)), ShapeError);
    Layer a{Matrix::Zero(4, 3), Vector::Zero(4), Activation::Relu};
    Layer b{Matrix::Zero(1, 5), Vector::Zero(1), Activation::Linear};
    EXPECT_THROW(MlpParams({a, b}), ShapeError);
}

TEST(Backward, ZeroUpstreamGivesZeroGradient) {
    Rng rng = make_rng({3});
    const std::size_t sizes[] = {3, 8, 2};
    const auto p = make_mlp(sizes, Activation::Tanh, Activation::Linear, rng);
    EXPECT_EQ(backward(p, Vector::Ones(3), Vector::Zero(2)).flat().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Backward, LinearLayerWeightGradientIsTheInput) {
    Layer l{Matrix{{0.3, -0.2, 0.9}}, Vector::Constant(1, 0.1), Activation::Linear};
    const Vector x{{1.5, -2.0, 0.25}};
    const auto g = backward(MlpParams({l}), x, Vector::Ones(1));
    EXPECT_EQ(Vector(g.layers()[0].weight.row(0).transpose()), x);
    EXPECT_EQ(g.layers()[0].bias(0), 1.0);
}

TEST(Backward, LargeReluNetMatchesFiniteDifferences) {
    Rng rng = make_rng({4});
    const std::size_t sizes[] = {2, 400, 400, 1};
    auto p = make_mlp(sizes, Activation::Relu, Activation::Linear, rng, 0.5);
    const Vector x = random_vector(2, rng);
    const Vector grad = backward(p, x, Vector::Ones(1)).flat();
    auto f = [&](const Vector& flat) {
        auto q = p;
        q.set_flat(flat);
        return forward(q, x)(0);
    };
    EXPECT_LE(worst_fd_error(f, p.flat(), grad, 100, rng), 1e-4);
}

TEST(Backward, BatchSumsPerSampleGradients) {
    Rng rng = make_rng({5});
    const std::size_t sizes[] = {3, 6, 6, 2};
    const auto p = make_mlp(sizes, Activation::Softplus, Activation::Tanh, rng, 0.5);
    const Matrix x = Matrix::Random(3, 4), up = Matrix::Random(2, 4);
    Vector sum = Vector::Zero(static_cast<Eigen::Index>(p.parameter_count()));
    for (Eigen::Index c = 0; c < 4; ++c) sum += backward(p, x.col(c), up.col(c)).flat();
    const Vector batch = backward_batch(p, forward_trace(p, x), up).flat();
    EXPECT_LE((batch - sum).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Backward, DeterministicAcrossCalls) {
    Rng rng = make_rng({6});
    const std::size_t sizes[] = {4, 16, 1};
    const auto p = make_mlp(sizes, Activation::Relu, Activation::Linear, rng);
    const Vector x = random_vector(4, rng);
    EXPECT_EQ(backward(p, x, Vector::Ones(1)).flat(), backward(p, x, Vector::Ones(1)).flat());
    EXPECT_EQ(forward(p, x), forward(p, x));
}

TEST(FlatView, RoundTripIsBitExact) {
    Rng rng = make_rng({7});
    const std::size_t sizes[] = {4, 10, 7, 2};
    auto p = make_mlp(sizes, Activation::Relu, Activation::Linear, rng, 0.2);
    const Vector flat = p.flat();
    auto q = p.zeros_like();
    q.set_flat(flat);
    EXPECT_EQ(q.flat(), flat);
    for (std::size_t i = 0; i < p.layers().size(); ++i) EXPECT_EQ(q.layers()[i].weight, p.layers()[i].weight);
    EXPECT_THROW(q.set_flat(Vector::Zero(3)), ShapeError);
}

TEST(Checkpoint, TextRoundTripIsBitExact) {
    Rng rng = make_rng({8});
    const std::size_t sizes[] = {3, 5, 2};
    const auto p = make_mlp(sizes, Activation::Tanh, Activation::Softplus, rng, 0.7);
    const auto back = parse_params(serialize_params(p));
    EXPECT_EQ(back.flat(), p.flat());
    EXPECT_EQ(back.layers()[1].activation, Activation::Softplus);
    EXPECT_THROW(parse_params("garbage"), ConfigError);
}

TEST(GaussianHead, StandardNormalLogProbAndEntropy) {
    const auto head = head_with_outputs(0.0, std::log(std::numbers::e - 1.0), 10.0, 0.0);
    const auto m = gaussian_moments(head, Vector::Zero(3));
    EXPECT_NEAR(m.mean, 0.0, 1e-15);
    EXPECT_NEAR(m.variance, 1.0, 1e-14);
    EXPECT_NEAR(gaussian_log_prob(head, Vector::Zero(3), 0.0), -0.918938533204673, 1e-12);
    EXPECT_NEAR(gaussian_entropy(head, Vector::Zero(3)), 1.418938533204673, 1e-12);
}

TEST(GaussianHead, ZeroEntropyVariance) {
    const double var = 1.0 / (2 * std::numbers::pi * std::numbers::e);
    const auto head = head_with_outputs(0.3, std::log(std::expm1(var)), 2.0, 0.0);
    EXPECT_NEAR(gaussian_entropy(head, Vector::Zero(3)), 0.0, 1e-12);
}

TEST(GaussianHead, LogProbPeaksAtTheMean) {
    Rng rng = make_rng({9});
    const std::size_t hidden[] = {8};
    auto head = make_gaussian_head(hidden, 3, 2.0, 1e-6, rng);
    for (int t = 0; t < 20; ++t) {
        const Vector s = random_vector(3, rng);
        const double mu = gaussian_moments(head, s).mean;
        const double peak = gaussian_log_prob(head, s, mu);
        for (double d : {-1.0, -1e-3, 1e-3, 0.5}) EXPECT_GT(peak, gaussian_log_prob(head, s, mu + d));
    }
    EXPECT_THROW(gaussian_log_prob(head, Vector::Zero(3), std::nan("")), NumericError);
}

TEST(GaussianHead, MomentsStayInRangeForExtremeInputs) {
    Rng rng = make_rng({10});
    const std::size_t hidden[] = {32, 32};
    auto head = make_gaussian_head(hidden, 4, 10.0, 1e-6, rng);
    auto flat = head.backbone.flat();
    head.backbone.set_flat(flat * 50.0); // push outputs into saturation
    for (int t = 0; t < 2000; ++t) {
        const auto m = gaussian_moments(head, random_vector(4, rng, 100.0));
        EXPECT_GT(m.variance, 0.0);
        EXPECT_LE(std::abs(m.mean), 10.0);
    }
}

TEST(GaussianHead, LogProbGradientMatchesFiniteDifferences) {
    Rng rng = make_rng({11});
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t sizes[] = {3, 12, 12, 2};
        GaussianPolicyHead head{make_mlp(sizes, Activation::Relu, Activation::Linear, rng, 0.8), 2.0, 1e-3};
        const Vector s = random_vector(3, rng);
        const double a = std::normal_distribution<double>(0.0, 1.5)(rng);
        const auto vg = gaussian_log_prob_grad(head, s, a);
        EXPECT_NEAR(vg.value, gaussian_log_prob(head, s, a), 1e-13);
        auto f = [&](const Vector& flat) {
            auto h = head;
            h.backbone.set_flat(flat);
            return gaussian_log_prob(h, s, a);
        };
        EXPECT_LE(worst_fd_error(f, head.backbone.flat(), vg.gradient.flat(), 40, rng), 1e-4);
    }
}

TEST(GaussianHead, EntropyGradientMatchesFiniteDifferences) {
    Rng rng = make_rng({12});
    const std::size_t sizes[] = {3, 10, 2};
    GaussianPolicyHead head{make_mlp(sizes, Activation::Tanh, Activation::Linear, rng, 0.8), 10.0, 1e-4};
    const Vector s = random_vector(3, rng);
    const auto vg = gaussian_entropy_grad(head, s);
    auto f = [&](const Vector& flat) {
        auto h = head;
        h.backbone.set_flat(flat);
        return gaussian_entropy(h, s);
    };
    // only the variance path carries gradient; sample every coordinate
    const Vector x = head.backbone.flat();
    for (Eigen::Index j = 0; j < x.size(); ++j)
        EXPECT_LE(testutil::relative_error(vg.gradient.flat()(j), testutil::central_difference(f, x, j, 1e-5), 1e-7),
                  1e-4);
}

TEST(GaussianHead, PolicyObjectiveIsTheWeightedSum) {
    Rng rng = make_rng({13});
    const std::size_t hidden[] = {6};
    auto head = make_gaussian_head(hidden, 3, 2.0, 1e-6, rng);
    const Matrix states = Matrix::Random(3, 5);
    const std::vector<double> actions{0.1, -0.5, 1.2, 0.0, 3.0}, weights{1.0, -2.0, 0.5, 0.0, 0.3};
    const double c = 0.01;
    const auto vg = policy_objective(head, states, actions, weights, c);
    double expected = 0;
    Vector grad = Vector::Zero(static_cast<Eigen::Index>(head.backbone.parameter_count()));
    for (Eigen::Index b = 0; b < 5; ++b) {
        const auto lp = gaussian_log_prob_grad(head, states.col(b), actions[static_cast<std::size_t>(b)]);
        const auto h = gaussian_entropy_grad(head, states.col(b));
        expected += weights[static_cast<std::size_t>(b)] * lp.value + c * h.value;
        grad += weights[static_cast<std::size_t>(b)] * lp.gradient.flat() + c * h.gradient.flat();
    }
    EXPECT_NEAR(vg.value, expected, 1e-12);
    EXPECT_LE((vg.gradient.flat() - grad).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GaussianHead, SamplingIsSeeded) {
    Rng rng = make_rng({14});
    const std::size_t hidden[] = {6};
    auto head = make_gaussian_head(hidden, 3, 2.0, 1e-6, rng);
    Rng a = make_rng({99}), b = make_rng({99});
    for (int i = 0; i < 10; ++i) EXPECT_EQ(sample_action(head, Vector::Ones(3), a), sample_action(head, Vector::Ones(3), b));
}

TEST(Adam, ZeroGradientLeavesParameters) {
    AdamState st(3);
    Vector p{{1.0, -2.0, 3.0}};
    const Vector before = p;
    adam_step(st, p, Vector::Zero(3), 0.01);
    EXPECT_EQ(p, before);
    EXPECT_EQ(st.step, 1u);
}

TEST(Adam, FirstStepHasMagnitudeRate) {
    for (double g : {1e-3, -0.5, 7.0, -300.0}) {
        AdamState st(1);
        Vector p = Vector::Zero(1);
        adam_step(st, p, Vector::Constant(1, g), 0.01);
        EXPECT_NEAR(std::abs(p(0)), 0.01 * std::abs(g) / (std::abs(g) + 1e-8), 1e-15);
        EXPECT_LT(p(0) * g, 0.0); // descent
    }
}

TEST(Adam, ThreeStepTraceMatchesTheRecurrences) {
    AdamState st(1);
    Vector p = Vector::Constant(1, 0.5);
    double m = 0, v = 0, x = 0.5;
    for (int t = 1; t <= 3; ++t) {
        adam_step(st, p, Vector::Ones(1), 0.01);
        m = 0.9 * m + 0.1;
        v = 0.999 * v + 0.001;
        const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
        x -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
        EXPECT_NEAR(p(0), x, 1e-15);
        EXPECT_EQ(st.step, static_cast<std::size_t>(t));
    }
    EXPECT_NEAR(x, 0.5 - 3 * 0.01 / (1 + 1e-8), 1e-15);
    AdamState wrong(2);
    EXPECT_THROW(adam_step(wrong, p, Vector::Ones(1), 0.01), ShapeError);
}

TEST(Sgd, PlainDescentStep) {
    Vector p{{1.0, 2.0}};
    sgd_step(p, Vector{{0.5, -1.0}}, 0.1);
    EXPECT_EQ(p, (Vector{{0.95, 2.1}}));
}
