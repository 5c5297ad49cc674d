#include <cstdlib>
#include <stdexcept>
#include <string_view>

#include "clusterdyn/error.hpp"
#include "clusterdyn/kernels.hpp"

namespace clusterdyn::kernels {

const char* isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

bool isa_available(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::Neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Isa isa) {
  if (!isa_available(isa))
    throw Error(ErrorKind::InvalidArgument, std::string("kernel ISA not available: ") + isa_name(isa));
  switch (isa) {
#if defined(__x86_64__) || defined(_M_X64)
    case Isa::Avx2: return detail::avx2_table;
#endif
#if defined(__aarch64__)
    case Isa::Neon: return detail::neon_table;
#endif
    default: return detail::scalar_table;
  }
}

namespace {

Isa select_isa() {
  if (const char* env = std::getenv("CLUSTERDYN_SIMD")) {
    const std::string_view want(env);
    for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Neon})
      if (want == isa_name(isa) && isa_available(isa)) return isa;
  }
  if (isa_available(Isa::Avx2)) return Isa::Avx2;
  if (isa_available(Isa::Neon)) return Isa::Neon;
  return Isa::Scalar;
}

const KernelTable& active_table() {
  static const KernelTable& t = table(active_isa());
  return t;
}

}  // namespace

Isa active_isa() noexcept {
  static const Isa isa = select_isa();
  return isa;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorKind::SizeMismatch, "dot operands differ in length");
  return active_table().dot(a.data(), b.data(), a.size());
}

double sum(std::span<const double> x) { return active_table().sum(x.data(), x.size()); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::SizeMismatch, "axpy operands differ in length");
  active_table().axpy(alpha, x.data(), y.data(), x.size());
}

double weighted_sum_squares(std::span<const double> w, std::span<const double> x) {
  if (w.size() != x.size()) throw Error(ErrorKind::SizeMismatch, "weighted_sum_squares operands differ in length");
  return active_table().weighted_sum_squares(w.data(), x.data(), w.size());
}

void convolve_accumulate(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  if (a.empty() || b.empty()) return;
  if (out.size() < a.size() + b.size() - 1) throw Error(ErrorKind::SizeMismatch, "convolution output too short");
  const auto& t = active_table();
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != 0.0) t.axpy(a[i], b.data(), out.data() + i, b.size());
}

}  // namespace clusterdyn::kernels
