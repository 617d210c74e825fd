#include "blin/kernels.hpp"

namespace blin::kernels {
namespace {

double sum_scalar(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += x[k];
  return s;
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += x[k] * y[k];
  return s;
}

void subtract_scalar(const double* x, double shift, double* out, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) out[k] = x[k] - shift;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable t{Isa::scalar, "scalar", &sum_scalar, &dot_scalar, &subtract_scalar};
  return t;
}

}  // namespace blin::kernels
