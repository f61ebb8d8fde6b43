#pragma once

#include <utility>
#include <vector>

#include "apogee/rng.hpp"

namespace apogee::nn {

/// Dense row-major matrix of doubles. Small on purpose: the whole training
/// stack works on explicit loops so results are bit-reproducible.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> d;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), d(static_cast<size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return d[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return d[static_cast<size_t>(r) * cols + c]; }
    double* row(int r) { return d.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return d.data() + static_cast<size_t>(r) * cols; }
};

struct NetworkConfig {
    int input_dim = 5;
    std::vector<int> hidden_dims{128, 256, 128};
    int output_dim = 2;
    double dropout_p = 0.1;
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;
    /// Per-output (low, high); the head maps pre-activations onto these
    /// ranges with a scaled sigmoid. Defaults to the parameter prior box.
    std::vector<std::pair<double, double>> output_ranges{{0.3, 0.9}, {0.8, 1.2}};

    void validate() const; // throws ValidationError
};

/// One hidden block: affine -> batch norm -> ReLU -> dropout.
/// Weights are stored (out x in) so both the forward dot products and the
/// backward accumulations run over contiguous rows.
struct HiddenLayer {
    Matrix w; // out x in
    std::vector<double> b;
    std::vector<double> gamma;
    std::vector<double> beta;
    std::vector<double> running_mean;
    std::vector<double> running_var;
};

struct OutputLayer {
    Matrix w; // out x in
    std::vector<double> b;
};

struct MlpParams {
    std::vector<HiddenLayer> hidden;
    OutputLayer out;
};

/// He-uniform weights (U(-sqrt(6/fan_in), +sqrt(6/fan_in))), zero biases,
/// BN gamma=1 beta=0, running mean 0 / var 1.
MlpParams init_network(const NetworkConfig& cfg, RngStream& rng);

/// Everything backward() needs from a training forward pass.
struct LayerCache {
    Matrix input;  // n x in
    Matrix z;      // n x out, pre-BN
    std::vector<double> mean; // batch mean per unit
    std::vector<double> var;  // batch variance per unit (population)
    Matrix xhat;   // normalized z
    Matrix bn_out; // gamma * xhat + beta (pre-ReLU)
    Matrix mask;   // dropout multiplier, 0 or 1/(1-p); empty when p == 0
};

struct ForwardCache {
    std::vector<LayerCache> layers;
    Matrix head_input; // n x last_hidden
    Matrix sigmoid;    // n x out, sigmoid(z_out)
};

/// Training-mode forward: BN uses batch statistics (and, unless
/// update_running is false, folds them into the running estimates), dropout
/// draws one mask per activation from rng. Returns predictions in physical
/// units, strictly inside the configured output ranges.
Matrix forward_train(MlpParams& params, const NetworkConfig& cfg, const Matrix& batch,
                     RngStream& rng, ForwardCache& cache, bool update_running = true);

/// Eval-mode forward: running BN statistics, no dropout, no side effects.
Matrix forward_eval(const MlpParams& params, const NetworkConfig& cfg, const Matrix& batch);

/// Mean over all n*output_dim squared errors.
double mse_loss(const Matrix& pred, const Matrix& target);

/// dL/dpred for mse_loss.
Matrix mse_grad(const Matrix& pred, const Matrix& target);

struct HiddenGrads {
    Matrix w;
    std::vector<double> b;
    std::vector<double> gamma;
    std::vector<double> beta;
};

struct Gradients {
    std::vector<HiddenGrads> hidden;
    Matrix out_w;
    std::vector<double> out_b;
};

/// Exact gradients for every parameter, including the batch-norm
/// batch-statistics terms and the scaled-sigmoid head.
Gradients backward(const MlpParams& params, const NetworkConfig& cfg, const ForwardCache& cache,
                   const Matrix& dpred);

} // namespace apogee::nn
