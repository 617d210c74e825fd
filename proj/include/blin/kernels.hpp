#pragma once

// Dense double-precision kernels behind the data-parallel loops (column
// sums, centring, column dot products). Every kernel has a portable scalar
// reference; vectorised variants are selected once per process at runtime
// and must agree with the reference to rounding (see tests/test_kernels.cpp).
//
// The environment variable BLIN_KERNELS=scalar|avx2 pins the selection.

#include <cstddef>
#include <span>
#include <string_view>

namespace blin::kernels {

enum class Isa { scalar, avx2 };

struct KernelTable {
  Isa isa;
  const char* name;
  double (*sum)(const double* x, std::size_t n);
  double (*dot)(const double* x, const double* y, std::size_t n);
  // out[k] = x[k] - shift
  void (*subtract)(const double* x, double shift, double* out, std::size_t n);
};

const KernelTable& scalar_table();
bool isa_available(Isa isa);
/// Throws InputError when the ISA was not compiled in or the CPU lacks it.
const KernelTable& table(Isa isa);
const KernelTable& active();

std::string_view isa_name(Isa isa);

inline double sum(std::span<const double> x) { return active().sum(x.data(), x.size()); }
double dot(std::span<const double> x, std::span<const double> y);
void subtract(std::span<const double> x, double shift, std::span<double> out);

namespace detail {
#if defined(BLIN_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
}  // namespace detail

}  // namespace blin::kernels
