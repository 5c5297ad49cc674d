#pragma once

#include <cstddef>
#include <span>

// Data-parallel inner loops used by the evaluation and estimation engines.
// Every kernel has a scalar reference implementation; vector variants are
// picked once per process from the CPU's capabilities and can be pinned with
// CLUSTERDYN_SIMD=scalar|avx2|neon.

namespace clusterdyn::kernels {

enum class Isa { Scalar, Avx2, Neon };

struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // sum_i w_i * x_i^2
  double (*weighted_sum_squares)(const double* w, const double* x, std::size_t n);
};

const char* isa_name(Isa isa) noexcept;
bool isa_available(Isa isa) noexcept;
// Throws if the ISA is not compiled in or not supported by this CPU.
const KernelTable& table(Isa isa);
Isa active_isa() noexcept;

double dot(std::span<const double> a, std::span<const double> b);
double sum(std::span<const double> x);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
double weighted_sum_squares(std::span<const double> w, std::span<const double> x);

// out[i + j] += a[i] * b[j]; out must hold a.size() + b.size() - 1 entries.
void convolve_accumulate(std::span<const double> a, std::span<const double> b, std::span<double> out);

namespace detail {
extern const KernelTable scalar_table;
#if defined(__x86_64__) || defined(_M_X64)
extern const KernelTable avx2_table;
#endif
#if defined(__aarch64__)
extern const KernelTable neon_table;
#endif
}  // namespace detail

}  // namespace clusterdyn::kernels
