// Times the OpenMP kernels against the serial reference implementations.

#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "covidcare/kernels.hpp"
#include "covidcare/tensor.hpp"

using namespace covidcare;
using clock_type = std::chrono::steady_clock;

namespace {

Tensor random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Tensor t(r, c);
    for (double& x : t.v) x = u(rng);
    return t;
}

template <class F>
double time_ms(F&& fn, int reps) {
    // One warmup, then best-of-reps.
    fn();
    double best = 1e300;
    for (int i = 0; i < reps; ++i) {
        auto t0 = clock_type::now();
        fn();
        auto t1 = clock_type::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

void row(const char* name, double serial_ms, double parallel_ms) {
    std::printf("%-28s %10.3f ms %10.3f ms %8.2fx\n", name, serial_ms, parallel_ms,
                serial_ms / parallel_ms);
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
    std::printf("built without OpenMP; both columns are serial\n");
#endif
    std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

    std::mt19937_64 rng(42);

    for (std::size_t n : {128u, 256u, 512u}) {
        Tensor a = random_matrix(rng, n, n);
        Tensor b = random_matrix(rng, n, n);
        Tensor c(n, n);
        char name[64];
        std::snprintf(name, sizeof name, "matmul %zux%zu", n, n);
        const double serial = time_ms(
            [&] { kern::ref::matmul(a.v.data(), b.v.data(), c.v.data(), n, n, n); }, 5);
        const double parallel =
            time_ms([&] { kern::matmul(a.v.data(), b.v.data(), c.v.data(), n, n, n); }, 5);
        row(name, serial, parallel);
    }

    {
        const std::size_t rows = 4096, cols = 512;
        Tensor a = random_matrix(rng, rows, cols);
        Tensor out(rows, cols);
        const double serial = time_ms(
            [&] { kern::ref::softmax_rows(a.v.data(), out.v.data(), rows, cols); }, 10);
        const double parallel =
            time_ms([&] { kern::softmax_rows(a.v.data(), out.v.data(), rows, cols); }, 10);
        row("softmax 4096x512", serial, parallel);
    }

    {
        const std::size_t n = 1 << 22;
        Tensor a = random_matrix(rng, n, 1);
        Tensor b = random_matrix(rng, n, 1);
        Tensor out(n, 1);
        double serial = time_ms([&] { kern::ref::add(a.v.data(), b.v.data(), out.v.data(), n); }, 10);
        double parallel = time_ms([&] { kern::add(a.v.data(), b.v.data(), out.v.data(), n); }, 10);
        row("add 4M", serial, parallel);

        serial = time_ms([&] { kern::ref::sigmoid(a.v.data(), out.v.data(), n); }, 10);
        parallel = time_ms([&] { kern::sigmoid(a.v.data(), out.v.data(), n); }, 10);
        row("sigmoid 4M", serial, parallel);

        volatile double sink = 0.0;
        serial = time_ms([&] { sink = kern::ref::sum(a.v.data(), n); }, 10);
        parallel = time_ms([&] { sink = kern::sum(a.v.data(), n); }, 10);
        row("sum 4M", serial, parallel);
        (void)sink;
    }
    return 0;
}
