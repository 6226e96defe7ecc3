#include "bvcl/bnn.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "bvcl/error.hpp"
#include "bvcl/kernels.hpp"
#include "bvcl/special.hpp"

namespace bvcl {

void NetworkArchitecture::validate() const {
    if (input_dim == 0) throw std::invalid_argument("architecture: input_dim must be > 0");
    if (hidden_sizes.empty())
        throw std::invalid_argument("architecture: at least one hidden layer required");
    for (std::size_t h : hidden_sizes)
        if (h == 0) throw std::invalid_argument("architecture: hidden layer width must be > 0");
    if (head_sizes.empty()) throw std::invalid_argument("architecture: at least one head required");
    for (std::size_t c : head_sizes)
        if (c < 2) throw std::invalid_argument("architecture: every head needs >= 2 classes");
}

void HyperParams::validate() const {
    if (!(learning_rate > 0)) throw std::invalid_argument("hyper: learning_rate must be > 0");
    if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("hyper: beta must be in [0,1]");
    if (batch_size < 1) throw std::invalid_argument("hyper: batch_size must be >= 1");
    if (s_train < 1) throw std::invalid_argument("hyper: s_train must be >= 1");
    if (s_test < 1) throw std::invalid_argument("hyper: s_test must be >= 1");
    if (!(prior_sigma > 0)) throw std::invalid_argument("hyper: prior_sigma must be > 0");
}

std::size_t VariationalPosterior::param_count() const {
    std::size_t n = 0;
    for (const auto& b : shared) n += b.size();
    for (const auto& b : heads) n += b.size();
    return n;
}

namespace {

MeanFieldGaussian const_block(std::size_t fan_in, std::size_t fan_out, double mu_val,
                              double ls_val) {
    const std::size_t n = (fan_in + 1) * fan_out;
    MeanFieldGaussian g;
    g.mu.assign(n, mu_val);
    g.log_sigma.assign(n, ls_val);
    return g;
}

// Fills a block's means with N(0, 2/fan_in) draws and pins log_sigma.
void randomize_block(MeanFieldGaussian& g, std::size_t fan_in, double init_log_sigma,
                     RandomStream& rs) {
    const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& m : g.mu) m = scale * rs.next_normal();
    for (auto& l : g.log_sigma) l = init_log_sigma;
}

}  // namespace

VariationalPosterior init_prior(const NetworkArchitecture& arch, double prior_sigma) {
    arch.validate();
    if (!(prior_sigma > 0)) throw std::invalid_argument("init_prior: prior_sigma must be > 0");
    const double ls = std::log(prior_sigma);
    VariationalPosterior post;
    post.arch = arch;
    for (std::size_t l = 0; l < arch.shared_layers(); ++l)
        post.shared.push_back(const_block(arch.shared_fan_in(l), arch.shared_fan_out(l), 0.0, ls));
    for (std::size_t c : arch.head_sizes)
        post.heads.push_back(const_block(arch.head_fan_in(), c, 0.0, ls));
    return post;
}

VariationalPosterior init_variational(const VariationalPosterior& prior, std::uint64_t seed,
                                      double init_log_sigma) {
    VariationalPosterior post = prior;
    RandomStream rs(seed, 0x1417);
    for (std::size_t l = 0; l < post.shared.size(); ++l)
        randomize_block(post.shared[l], post.arch.shared_fan_in(l), init_log_sigma, rs);
    for (auto& h : post.heads) randomize_block(h, post.arch.head_fan_in(), init_log_sigma, rs);
    return post;
}

double kl_divergence_block(const MeanFieldGaussian& q, const MeanFieldGaussian& p) {
    if (q.size() != p.size() || q.mu.size() != q.log_sigma.size())
        throw std::invalid_argument("kl_divergence: block shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        const double lq = q.log_sigma[i];
        const double lp = p.log_sigma[i];
        const double dmu = q.mu[i] - p.mu[i];
        acc += (lp - lq) + 0.5 * (std::exp(2.0 * (lq - lp)) + dmu * dmu * std::exp(-2.0 * lp)) -
               0.5;
    }
    return acc;
}

double kl_divergence(const VariationalPosterior& q, const VariationalPosterior& p,
                     std::size_t head) {
    if (q.shared.size() != p.shared.size() || head >= q.heads.size() || head >= p.heads.size())
        throw std::invalid_argument("kl_divergence: posterior shape mismatch");
    double acc = 0.0;
    for (std::size_t l = 0; l < q.shared.size(); ++l)
        acc += kl_divergence_block(q.shared[l], p.shared[l]);
    acc += kl_divergence_block(q.heads[head], p.heads[head]);
    return acc;
}

namespace {

struct BlockView {
    const double* mu_w;
    const double* mu_b;
    const double* ls_w;
    const double* ls_b;
    std::size_t fan_in;
    std::size_t fan_out;
};

BlockView view_of(const MeanFieldGaussian& g, std::size_t fan_in, std::size_t fan_out) {
    const std::size_t wn = fan_in * fan_out;
    return {g.mu.data(), g.mu.data() + wn, g.log_sigma.data(), g.log_sigma.data() + wn,
            fan_in, fan_out};
}

// Per-layer intermediates kept for the backward pass.
struct LayerCache {
    Matrix a;                     // input activations, R x fan_in
    Matrix u;                     // a elementwise squared
    Matrix sigma_w2;              // exp(2 log_sigma), weights
    std::vector<double> sigma_b2; // exp(2 log_sigma), biases
    Matrix sd;                    // sqrt of pre-activation variance
    Matrix eps;                   // noise draws
    Matrix z;                     // sampled pre-activations
};

// Samples pre-activations from their analytic mean and variance:
// M = A W_mu + b_mu, V = (A.A) sigma_w^2 + sigma_b^2, Z = M + sqrt(V).eps.
void layer_forward(const BlockView& blk, RandomStream& noise, LayerCache& cache) {
    const std::size_t r = cache.a.rows;
    const std::size_t fi = blk.fan_in;
    const std::size_t fo = blk.fan_out;

    cache.sigma_w2 = Matrix(fi, fo);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(fi * fo); ++i)
        cache.sigma_w2.data[static_cast<std::size_t>(i)] =
            std::exp(2.0 * blk.ls_w[static_cast<std::size_t>(i)]);
    cache.sigma_b2.resize(fo);
    for (std::size_t j = 0; j < fo; ++j) cache.sigma_b2[j] = std::exp(2.0 * blk.ls_b[j]);

    cache.u = Matrix(r, fi);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(cache.a.size()); ++i) {
        const double v = cache.a.data[static_cast<std::size_t>(i)];
        cache.u.data[static_cast<std::size_t>(i)] = v * v;
    }

    cache.z = Matrix(r, fo);
    kernels::matmul(cache.a.data.data(), r, fi, blk.mu_w, fo, cache.z.data.data());
    cache.sd = Matrix(r, fo);
    kernels::matmul(cache.u.data.data(), r, fi, cache.sigma_w2.data.data(), fo,
                    cache.sd.data.data());
    cache.eps = Matrix(r, fo);
    kernels::fill_normal(noise, cache.eps);

#pragma omp parallel for schedule(static)
    for (long long row = 0; row < static_cast<long long>(r); ++row) {
        double* zr = cache.z.row_ptr(static_cast<std::size_t>(row));
        double* sdr = cache.sd.row_ptr(static_cast<std::size_t>(row));
        const double* er = cache.eps.row_ptr(static_cast<std::size_t>(row));
        for (std::size_t j = 0; j < fo; ++j) {
            const double sd = std::sqrt(sdr[j] + cache.sigma_b2[j]);
            sdr[j] = sd;
            zr[j] += blk.mu_b[j] + sd * er[j];
        }
    }
}

Matrix relu(const Matrix& z) {
    Matrix a(z.rows, z.cols);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(z.size()); ++i) {
        const double v = z.data[static_cast<std::size_t>(i)];
        a.data[static_cast<std::size_t>(i)] = v > 0.0 ? v : 0.0;
    }
    return a;
}

// Forward through shared trunk and one head; caches one entry per layer,
// head last.
Matrix forward_cached(const VariationalPosterior& post, std::size_t head, const Matrix& x,
                      RandomStream& noise, std::vector<LayerCache>& caches) {
    const auto& arch = post.arch;
    if (head >= post.heads.size())
        throw std::invalid_argument("forward: head index out of range");
    if (x.cols != arch.input_dim)
        throw std::invalid_argument("forward: input dimension mismatch");

    const std::size_t layers = arch.shared_layers();
    caches.resize(layers + 1);
    Matrix a = x;
    for (std::size_t l = 0; l < layers; ++l) {
        caches[l].a = std::move(a);
        const auto blk = view_of(post.shared[l], arch.shared_fan_in(l), arch.shared_fan_out(l));
        layer_forward(blk, noise, caches[l]);
        a = relu(caches[l].z);
    }
    caches[layers].a = std::move(a);
    const auto blk = view_of(post.heads[head], arch.head_fan_in(), arch.head_sizes[head]);
    layer_forward(blk, noise, caches[layers]);
    return caches[layers].z;
}

}  // namespace

Matrix forward_local_reparam(const VariationalPosterior& post, std::size_t head,
                             const Matrix& x, RandomStream& noise) {
    std::vector<LayerCache> caches;
    return forward_cached(post, head, x, noise, caches);
}

Matrix forward_mean(const VariationalPosterior& post, std::size_t head, const Matrix& x) {
    const auto& arch = post.arch;
    if (head >= post.heads.size())
        throw std::invalid_argument("forward_mean: head index out of range");
    if (x.cols != arch.input_dim)
        throw std::invalid_argument("forward_mean: input dimension mismatch");
    Matrix a = x;
    for (std::size_t l = 0; l <= arch.shared_layers(); ++l) {
        const bool is_head = l == arch.shared_layers();
        const std::size_t fi = is_head ? arch.head_fan_in() : arch.shared_fan_in(l);
        const std::size_t fo = is_head ? arch.head_sizes[head] : arch.shared_fan_out(l);
        const auto blk = view_of(is_head ? post.heads[head] : post.shared[l], fi, fo);
        Matrix z(a.rows, fo);
        kernels::matmul(a.data.data(), a.rows, fi, blk.mu_w, fo, z.data.data());
#pragma omp parallel for schedule(static)
        for (long long rr = 0; rr < static_cast<long long>(z.rows); ++rr) {
            double* zr = z.row_ptr(static_cast<std::size_t>(rr));
            for (std::size_t j = 0; j < fo; ++j) zr[j] += blk.mu_b[j];
        }
        a = is_head ? std::move(z) : relu(z);
    }
    return a;
}

namespace {

BlockGrad zero_grad(std::size_t n) {
    BlockGrad g;
    g.mu.assign(n, 0.0);
    g.log_sigma.assign(n, 0.0);
    return g;
}

// Accumulates gradients for one layer given dLoss/dZ; returns dLoss/dZ of the
// previous layer (empty for the first).
Matrix layer_backward(const BlockView& blk, const LayerCache& cache, const Matrix& g_z,
                      const Matrix* z_prev, BlockGrad& grad) {
    const std::size_t r = cache.a.rows;
    const std::size_t fi = blk.fan_in;
    const std::size_t fo = blk.fan_out;

    // dLoss/dV through Z = M + sqrt(V).eps
    Matrix g_v(r, fo);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(g_v.size()); ++i) {
        const std::size_t idx = static_cast<std::size_t>(i);
        const double sd = cache.sd.data[idx];
        g_v.data[idx] = sd > 0.0 ? g_z.data[idx] * cache.eps.data[idx] / (2.0 * sd) : 0.0;
    }

    // mean gradients
    kernels::matmul_at(cache.a.data.data(), r, fi, g_z.data.data(), fo, grad.mu.data());
    double* gmu_b = grad.mu.data() + fi * fo;
    for (std::size_t row = 0; row < r; ++row) {
        const double* gzr = g_z.row_ptr(row);
        for (std::size_t j = 0; j < fo; ++j) gmu_b[j] += gzr[j];
    }

    // log-sigma gradients: dV/d(sigma^2) chained with d(sigma^2)/d(log sigma) = 2 sigma^2
    kernels::matmul_at(cache.u.data.data(), r, fi, g_v.data.data(), fo, grad.log_sigma.data());
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(fi * fo); ++i) {
        const std::size_t idx = static_cast<std::size_t>(i);
        grad.log_sigma[idx] *= 2.0 * cache.sigma_w2.data[idx];
    }
    double* gls_b = grad.log_sigma.data() + fi * fo;
    for (std::size_t row = 0; row < r; ++row) {
        const double* gvr = g_v.row_ptr(row);
        for (std::size_t j = 0; j < fo; ++j) gls_b[j] += gvr[j];
    }
    for (std::size_t j = 0; j < fo; ++j) gls_b[j] *= 2.0 * cache.sigma_b2[j];

    if (z_prev == nullptr) return Matrix();

    // dLoss/dA = G_Z W_mu^T + 2 A . (G_V sigma_w2^T), then through the rectifier
    Matrix g_a(r, fi);
    kernels::matmul_bt(g_z.data.data(), r, fo, blk.mu_w, fi, g_a.data.data());
    Matrix g_a_var(r, fi);
    kernels::matmul_bt(g_v.data.data(), r, fo, cache.sigma_w2.data.data(), fi,
                       g_a_var.data.data());
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(g_a.size()); ++i) {
        const std::size_t idx = static_cast<std::size_t>(i);
        g_a.data[idx] += 2.0 * cache.a.data[idx] * g_a_var.data[idx];
        g_a.data[idx] = z_prev->data[idx] > 0.0 ? g_a.data[idx] : 0.0;
    }
    return g_a;
}

}  // namespace

LossResult beta_elbo_loss(const VariationalPosterior& post, const VariationalPosterior& prior,
                          std::size_t head, const Matrix& x, const std::vector<int>& y,
                          std::size_t n_task, const HyperParams& hyper, RandomStream& noise) {
    if (x.rows == 0) throw std::invalid_argument("beta_elbo_loss: empty batch");
    if (x.rows != y.size()) throw std::invalid_argument("beta_elbo_loss: feature/label mismatch");
    if (head >= post.heads.size())
        throw std::invalid_argument("beta_elbo_loss: head index out of range");
    const std::size_t c_count = post.arch.head_sizes[head];
    for (int label : y)
        if (label < 0 || static_cast<std::size_t>(label) >= c_count)
            throw std::invalid_argument("beta_elbo_loss: label out of range for head");
    if (n_task == 0) throw std::invalid_argument("beta_elbo_loss: n_task must be > 0");

    const std::size_t b_count = x.rows;
    const std::size_t s = hyper.s_train;
    const std::size_t r = b_count * s;

    // One effective batch of B*S rows: the batch tiled once per MC draw, each
    // row with its own noise.
    Matrix x_tiled(r, x.cols);
#pragma omp parallel for schedule(static)
    for (long long row = 0; row < static_cast<long long>(r); ++row) {
        const std::size_t src = static_cast<std::size_t>(row) % b_count;
        const double* from = x.row_ptr(src);
        double* to = x_tiled.row_ptr(static_cast<std::size_t>(row));
        for (std::size_t j = 0; j < x.cols; ++j) to[j] = from[j];
    }

    std::vector<LayerCache> caches;
    const Matrix logits = forward_cached(post, head, x_tiled, noise, caches);

    // Negative expected log-likelihood normalized per example and per draw,
    // with its gradient on the logits.
    Matrix g_z(r, c_count);
    std::vector<double> row_nll(r);
    const double inv_r = 1.0 / static_cast<double>(r);
#pragma omp parallel for schedule(static)
    for (long long row = 0; row < static_cast<long long>(r); ++row) {
        const std::size_t rr = static_cast<std::size_t>(row);
        const double* zr = logits.row_ptr(rr);
        const int label = y[rr % b_count];
        double m = zr[0];
        for (std::size_t j = 1; j < c_count; ++j) m = std::max(m, zr[j]);
        double acc = 0.0;
        for (std::size_t j = 0; j < c_count; ++j) acc += std::exp(zr[j] - m);
        const double lse = m + std::log(acc);
        row_nll[rr] = lse - zr[static_cast<std::size_t>(label)];
        double* gr = g_z.row_ptr(rr);
        for (std::size_t j = 0; j < c_count; ++j) {
            const double p = std::exp(zr[j] - lse);
            gr[j] = (p - (static_cast<std::size_t>(label) == j ? 1.0 : 0.0)) * inv_r;
        }
    }
    double nll = 0.0;
    for (std::size_t rr = 0; rr < r; ++rr) nll += row_nll[rr];
    nll *= inv_r;

    LossResult result;
    result.grads.head_index = head;
    const std::size_t layers = post.arch.shared_layers();
    result.grads.shared.resize(layers);
    for (std::size_t l = 0; l < layers; ++l)
        result.grads.shared[l] = zero_grad(post.shared[l].size());
    result.grads.head = zero_grad(post.heads[head].size());

    // Backward walk: head first, then the trunk.
    {
        const auto blk = view_of(post.heads[head], post.arch.head_fan_in(), c_count);
        Matrix g = layer_backward(blk, caches[layers], g_z,
                                  layers > 0 ? &caches[layers - 1].z : nullptr,
                                  result.grads.head);
        for (std::size_t l = layers; l-- > 0;) {
            const auto sblk =
                view_of(post.shared[l], post.arch.shared_fan_in(l), post.arch.shared_fan_out(l));
            g = layer_backward(sblk, caches[l], g, l > 0 ? &caches[l - 1].z : nullptr,
                               result.grads.shared[l]);
        }
    }

    result.loss = nll;

    // beta-weighted KL of shared + active head against the anchor, scaled per example.
    if (hyper.beta > 0.0) {
        const double kl_scale = hyper.beta / static_cast<double>(n_task);
        double kl = 0.0;
        auto add_block = [&](const MeanFieldGaussian& q, const MeanFieldGaussian& p,
                             BlockGrad& grad) {
            kl += kl_divergence_block(q, p);
            for (std::size_t i = 0; i < q.size(); ++i) {
                const double inv_vp = std::exp(-2.0 * p.log_sigma[i]);
                grad.mu[i] += kl_scale * (q.mu[i] - p.mu[i]) * inv_vp;
                grad.log_sigma[i] +=
                    kl_scale * (std::exp(2.0 * q.log_sigma[i]) * inv_vp - 1.0);
            }
        };
        for (std::size_t l = 0; l < layers; ++l)
            add_block(post.shared[l], prior.shared[l], result.grads.shared[l]);
        add_block(post.heads[head], prior.heads[head], result.grads.head);
        result.loss += kl_scale * kl;
    }

    return result;
}

namespace {

struct AdamState {
    std::vector<double> m_mu, v_mu, m_ls, v_ls;

    explicit AdamState(std::size_t n)
        : m_mu(n, 0.0), v_mu(n, 0.0), m_ls(n, 0.0), v_ls(n, 0.0) {}
};

void adam_step(MeanFieldGaussian& block, const BlockGrad& grad, AdamState& state,
               std::size_t t, const HyperParams& hyper) {
    const double b1 = hyper.adam_beta1;
    const double b2 = hyper.adam_beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(t));
    const double lr = hyper.learning_rate;
    const double eps = hyper.adam_epsilon;
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(block.size()); ++i) {
        const std::size_t idx = static_cast<std::size_t>(i);
        double g = grad.mu[idx];
        state.m_mu[idx] = b1 * state.m_mu[idx] + (1.0 - b1) * g;
        state.v_mu[idx] = b2 * state.v_mu[idx] + (1.0 - b2) * g * g;
        block.mu[idx] -=
            lr * (state.m_mu[idx] / corr1) / (std::sqrt(state.v_mu[idx] / corr2) + eps);
        g = grad.log_sigma[idx];
        state.m_ls[idx] = b1 * state.m_ls[idx] + (1.0 - b1) * g;
        state.v_ls[idx] = b2 * state.v_ls[idx] + (1.0 - b2) * g * g;
        block.log_sigma[idx] -=
            lr * (state.m_ls[idx] / corr1) / (std::sqrt(state.v_ls[idx] / corr2) + eps);
    }
}

}  // namespace

VariationalPosterior train_task(const VariationalPosterior& q_prev, const TaskDataset& train,
                                std::size_t head, const HyperParams& hyper, std::uint64_t seed) {
    hyper.validate();
    if (head >= q_prev.heads.size())
        throw std::invalid_argument("train_task: head index out of range");
    if (train.size() == 0) throw std::invalid_argument("train_task: empty training set");

    VariationalPosterior q = q_prev;
    RandomStream base(seed, 0x7a5c);
    RandomStream head_init_rs = base.derive(0);
    RandomStream shuffle_rs = base.derive(1);
    RandomStream noise_rs = base.derive(2);

    if (!q.trained_heads.contains(head)) {
        randomize_block(q.heads[head], q.arch.head_fan_in(), hyper.init_log_sigma, head_init_rs);
        q.trained_heads.insert(head);
    }
    if (hyper.epochs == 0) return q;

    const std::size_t n = train.size();
    const std::size_t d = train.dim();
    std::vector<AdamState> shared_state;
    shared_state.reserve(q.shared.size());
    for (const auto& b : q.shared) shared_state.emplace_back(b.size());
    AdamState head_state(q.heads[head].size());

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rs.next_below(i)]);
        for (std::size_t start = 0; start < n; start += hyper.batch_size) {
            const std::size_t b_count = std::min(hyper.batch_size, n - start);
            Matrix xb(b_count, d);
            std::vector<int> yb(b_count);
            for (std::size_t i = 0; i < b_count; ++i) {
                const std::size_t src = order[start + i];
                yb[i] = train.labels[src];
                const double* from = train.features.row_ptr(src);
                double* to = xb.row_ptr(i);
                for (std::size_t j = 0; j < d; ++j) to[j] = from[j];
            }
            const LossResult res =
                beta_elbo_loss(q, q_prev, head, xb, yb, n, hyper, noise_rs);
            if (!std::isfinite(res.loss))
                throw NumericError("train_task: non-finite loss at step " +
                                   std::to_string(step));
            ++step;
            for (std::size_t l = 0; l < q.shared.size(); ++l)
                adam_step(q.shared[l], res.grads.shared[l], shared_state[l], step, hyper);
            adam_step(q.heads[head], res.grads.head, head_state, step, hyper);
        }
    }
    return q;
}

}  // namespace bvcl
