// Compares the serial reference kernels against the OpenMP versions and
// times a training-shaped forward/backward step.

#include <chrono>
#include <cstdio>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "bvcl/bnn.hpp"
#include "bvcl/kernels.hpp"
#include "bvcl/random.hpp"

using namespace bvcl;

namespace {

double now_ms() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

template <typename F>
double time_ms(F&& f, int reps) {
    f();  // warm-up
    const double t0 = now_ms();
    for (int i = 0; i < reps; ++i) f();
    return (now_ms() - t0) / reps;
}

void bench_matmul(std::size_t n, int reps) {
    RandomStream rs(42, 0);
    Matrix a(n, n), b(n, n), c(n, n), c_ref(n, n);
    kernels::fill_normal(rs, a);
    kernels::fill_normal(rs, b);

    const double t_serial = time_ms([&] { kernels::serial::matmul(a, b, c_ref); }, reps);
    const double t_omp = time_ms([&] { kernels::matmul(a, b, c); }, reps);
    const bool equal = std::memcmp(c.data.data(), c_ref.data.data(),
                                   c.size() * sizeof(double)) == 0;
    const double gflops = 2.0 * n * n * n / 1e6;  // per ms
    std::printf("matmul %4zu^3   serial %8.2f ms (%5.2f GF/s)   omp %8.2f ms (%5.2f GF/s)   "
                "speedup %.2fx   bitexact %s\n",
                n, t_serial, gflops / t_serial, t_omp, gflops / t_omp, t_serial / t_omp,
                equal ? "yes" : "NO");
}

void bench_training_step(int reps) {
    NetworkArchitecture arch{168, {512, 512, 512}, {10}};
    const VariationalPosterior prior = init_prior(arch, 1.0);
    VariationalPosterior post = init_variational(prior, 7, -6.0);
    HyperParams hyper;
    hyper.s_train = 10;
    RandomStream rs(3, 1);
    Matrix x(128, 168);
    kernels::fill_normal(rs, x);
    std::vector<int> y(128);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(i % 10);

    RandomStream noise(11, 2);
    const double t = time_ms(
        [&] {
            RandomStream step_noise = noise;
            (void)beta_elbo_loss(post, prior, 0, x, y, 1280, hyper, step_noise);
        },
        reps);
    std::printf("beta-ELBO step, 128x10 rows through 168-512-512-512-10: %.2f ms\n", t);
}

}  // namespace

int main(int argc, char** argv) {
    int reps = 3;
    if (argc > 1) reps = std::atoi(argv[1]);
#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads %d\n", omp_get_max_threads());
#else
    std::printf("OpenMP disabled (serial build)\n");
#endif
    for (std::size_t n : {128, 256, 512}) bench_matmul(n, reps);
    bench_training_step(reps);
    return 0;
}
