// Timing comparison of the serial reference kernels against the OpenMP
// worksharing variants, plus an equality check (the two paths must agree
// bit for bit).

#include <chrono>
#include <cstdio>
#include <cstring>
#include <random>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "bicnet/kernels.hpp"

using clock_type = std::chrono::steady_clock;
using bicnet::kernels::kParGrain;

namespace {

double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

template <typename F>
double time_best_of(F&& f, int reps) {
    double best = 1e100;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = clock_type::now();
        f();
        best = std::min(best, seconds_since(t0));
    }
    return best;
}

std::vector<float> random_buf(std::size_t n, std::uint32_t seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> d(-1.f, 1.f);
    std::vector<float> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

bool bits_equal(const std::vector<float>& a, const std::vector<float>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * 4) == 0;
}

void report(const char* name, double serial_s, double par_s, bool equal) {
    std::printf("%-24s serial %9.4f ms   parallel %9.4f ms   speedup %5.2fx   %s\n", name,
                serial_s * 1e3, par_s * 1e3, serial_s / par_s,
                equal ? "bitwise-equal" : "MISMATCH");
}

} // namespace

int main(int argc, char** argv) {
    int size = 256;
    int reps = 5;
    for (int i = 1; i < argc; ++i) {
        if (std::string(argv[i]) == "--size" && i + 1 < argc) size = std::atoi(argv[++i]);
        if (std::string(argv[i]) == "--reps" && i + 1 < argc) reps = std::atoi(argv[++i]);
    }
    const std::size_t n = std::size_t(size);
#ifdef _OPENMP
    std::printf("openmp threads: %d, problem size: %d\n", omp_get_max_threads(), size);
#else
    std::printf("built without openmp, problem size: %d\n", size);
#endif

    namespace ks = bicnet::kernels::serial;
    namespace kp = bicnet::kernels::par;

    const auto a = random_buf(n * n, 1);
    const auto b = random_buf(n * n, 2);
    std::vector<float> c1(n * n), c2(n * n);

    {
        const double ts = time_best_of([&] { ks::matmul_nn(a.data(), b.data(), c1.data(), n, n, n); }, reps);
        const double tp = time_best_of([&] { kp::matmul_nn(a.data(), b.data(), c2.data(), n, n, n); }, reps);
        report("matmul_nn", ts, tp, bits_equal(c1, c2));
    }
    {
        const double ts = time_best_of([&] { ks::matmul_nt(a.data(), b.data(), c1.data(), n, n, n); }, reps);
        const double tp = time_best_of([&] { kp::matmul_nt(a.data(), b.data(), c2.data(), n, n, n); }, reps);
        report("matmul_nt", ts, tp, bits_equal(c1, c2));
    }
    {
        const double ts = time_best_of([&] { ks::softmax_rows(a.data(), c1.data(), n, n); }, reps);
        const double tp = time_best_of([&] { kp::softmax_rows(a.data(), c2.data(), n, n); }, reps);
        report("softmax_rows", ts, tp, bits_equal(c1, c2));
    }
    {
        const double ts = time_best_of([&] { ks::gelu(a.data(), c1.data(), n * n); }, reps);
        const double tp = time_best_of([&] { kp::gelu(a.data(), c2.data(), n * n); }, reps);
        report("gelu", ts, tp, bits_equal(c1, c2));
    }
    {
        const auto gamma = random_buf(n, 3);
        const auto beta = random_buf(n, 4);
        std::vector<float> mu1(n), ie1(n), mu2(n), ie2(n);
        const double ts = time_best_of(
            [&] {
                ks::layer_norm_rows(a.data(), gamma.data(), beta.data(), c1.data(), mu1.data(),
                                    ie1.data(), n, n, 1e-5f);
            },
            reps);
        const double tp = time_best_of(
            [&] {
                kp::layer_norm_rows(a.data(), gamma.data(), beta.data(), c2.data(), mu2.data(),
                                    ie2.data(), n, n, 1e-5f);
            },
            reps);
        report("layer_norm_rows", ts, tp, bits_equal(c1, c2));
    }
    // attention-shaped composite: logits + softmax + weighted sum
    {
        auto attn = [n](auto&& mm_nt, auto&& sm, auto&& mm_nn, const float* q, const float* k,
                        const float* v, float* logits, float* w, float* out) {
            mm_nt(q, k, logits, n, n, n);
            sm(logits, w, n, n);
            mm_nn(w, v, out, n, n, n);
        };
        const auto v = random_buf(n * n, 5);
        std::vector<float> logits(n * n), w(n * n);
        const double ts = time_best_of(
            [&] {
                attn([](auto... xs) { ks::matmul_nt(xs...); }, [](auto... xs) { ks::softmax_rows(xs...); },
                     [](auto... xs) { ks::matmul_nn(xs...); }, a.data(), b.data(), v.data(),
                     logits.data(), w.data(), c1.data());
            },
            reps);
        const double tp = time_best_of(
            [&] {
                attn([](auto... xs) { kp::matmul_nt(xs...); }, [](auto... xs) { kp::softmax_rows(xs...); },
                     [](auto... xs) { kp::matmul_nn(xs...); }, a.data(), b.data(), v.data(),
                     logits.data(), w.data(), c2.data());
            },
            reps);
        report("attention_forward", ts, tp, bits_equal(c1, c2));
    }
    return 0;
}
