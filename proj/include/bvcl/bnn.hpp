#pragma once

#include <cstdint>
#include <set>
#include <vector>

#include "bvcl/dataset.hpp"
#include "bvcl/matrix.hpp"
#include "bvcl/random.hpp"

namespace bvcl {

// Fully-connected multi-head classifier: shared trunk of rectified hidden
// layers, one linear output head per task.
struct NetworkArchitecture {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden_sizes;
    std::vector<std::size_t> head_sizes;  // classes per task

    std::size_t shared_layers() const { return hidden_sizes.size(); }
    std::size_t shared_fan_in(std::size_t layer) const {
        return layer == 0 ? input_dim : hidden_sizes[layer - 1];
    }
    std::size_t shared_fan_out(std::size_t layer) const { return hidden_sizes[layer]; }
    std::size_t head_fan_in() const { return hidden_sizes.back(); }

    void validate() const;
};

// One factorized Gaussian block: weights (fan_in x fan_out, row-major)
// followed by biases (fan_out), one (mu, log_sigma) pair per parameter.
struct MeanFieldGaussian {
    std::vector<double> mu;
    std::vector<double> log_sigma;

    std::size_t size() const { return mu.size(); }
};

struct VariationalPosterior {
    NetworkArchitecture arch;
    std::vector<MeanFieldGaussian> shared;  // one per hidden layer
    std::vector<MeanFieldGaussian> heads;   // one per task
    std::set<std::size_t> trained_heads;

    std::size_t param_count() const;
};

struct HyperParams {
    double learning_rate = 1e-3;
    double beta = 0.1;  // KL weight in [0, 1]
    std::size_t epochs = 120;
    std::size_t batch_size = 128;
    std::size_t s_train = 10;   // MC draws per forward pass during training
    std::size_t s_test = 100;   // MC draws at inference time
    double prior_sigma = 1.0;
    double init_log_sigma = -6.0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;

    void validate() const;
};

// Gradients of the loss w.r.t. the trainable blocks (shared trunk plus the
// active head), same shapes as the posterior blocks.
struct BlockGrad {
    std::vector<double> mu;
    std::vector<double> log_sigma;
};

struct GradientSet {
    std::vector<BlockGrad> shared;
    BlockGrad head;
    std::size_t head_index = 0;
};

// Every block at mu = 0, sigma = prior_sigma; no head trained.
VariationalPosterior init_prior(const NetworkArchitecture& arch, double prior_sigma);

// Means drawn from N(0, 2/fan_in) per layer, all log_sigma set to
// init_log_sigma; deterministic given seed.
VariationalPosterior init_variational(const VariationalPosterior& prior, std::uint64_t seed,
                                      double init_log_sigma);

// Closed-form KL between two factorized Gaussian blocks.
double kl_divergence_block(const MeanFieldGaussian& q, const MeanFieldGaussian& p);

// KL over the shared trunk plus one head.
double kl_divergence(const VariationalPosterior& q, const VariationalPosterior& p,
                     std::size_t head);

// One stochastic forward pass per row: pre-activations sampled from their
// analytic mean/variance with fresh noise per layer, row and unit.
Matrix forward_local_reparam(const VariationalPosterior& post, std::size_t head,
                             const Matrix& x, RandomStream& noise);

// Deterministic pass through the means (the sigma -> 0 limit).
Matrix forward_mean(const VariationalPosterior& post, std::size_t head, const Matrix& x);

struct LossResult {
    double loss = 0.0;
    GradientSet grads;
};

// Monte Carlo beta-weighted variational loss on one mini-batch plus exact
// pathwise gradients at the drawn noise. n_task is the full training-set size
// of the current task; the KL term enters as beta * KL / n_task.
LossResult beta_elbo_loss(const VariationalPosterior& post, const VariationalPosterior& prior,
                          std::size_t head, const Matrix& x, const std::vector<int>& y,
                          std::size_t n_task, const HyperParams& hyper, RandomStream& noise);

// Trains shared + one head on a task with adaptive-moment steps; q_prev is
// the frozen KL anchor and is never mutated. A head not trained before is
// freshly initialized (random means, init_log_sigma); every other block
// starts bitwise at q_prev. Inactive heads stay bitwise untouched.
VariationalPosterior train_task(const VariationalPosterior& q_prev, const TaskDataset& train,
                                std::size_t head, const HyperParams& hyper, std::uint64_t seed);

}  // namespace bvcl
