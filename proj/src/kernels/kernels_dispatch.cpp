#include <cstdlib>
#include <string>

#include "blin/common.hpp"
#include "blin/kernels.hpp"

namespace blin::kernels {

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
  }
  return "unknown";
}

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(BLIN_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Isa isa) {
  if (!isa_available(isa)) {
    throw InputError("kernel set '" + std::string(isa_name(isa)) + "' is not available on this build/CPU");
  }
#if defined(BLIN_HAVE_AVX2)
  if (isa == Isa::avx2) return detail::avx2_table();
#endif
  return scalar_table();
}

namespace {

const KernelTable& select() {
  if (const char* env = std::getenv("BLIN_KERNELS")) {
    const std::string want(env);
    if (want == "scalar") return scalar_table();
    if (want == "avx2" && isa_available(Isa::avx2)) return table(Isa::avx2);
  }
  if (isa_available(Isa::avx2)) return table(Isa::avx2);
  return scalar_table();
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& t = select();
  return t;
}

double dot(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("dot: length mismatch");
  return active().dot(x.data(), y.data(), x.size());
}

void subtract(std::span<const double> x, double shift, std::span<double> out) {
  if (x.size() != out.size()) throw InputError("subtract: length mismatch");
  active().subtract(x.data(), shift, out.data(), x.size());
}

}  // namespace blin::kernels
