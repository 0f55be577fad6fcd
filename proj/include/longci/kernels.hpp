#pragma once

// Dense double-precision inner loops shared by the regression, estimator and
// exact-DP code. Every kernel has a scalar reference implementation; vector
// variants (AVX2+FMA on x86-64, NEON on aarch64) are selected once at runtime.
//
// Set LONGCI_KERNELS=scalar|avx2|neon in the environment to pin a backend.

#include <cstddef>
#include <span>
#include <string_view>

namespace longci::kernels {

enum class Backend { Scalar, Avx2, Neon };

std::string_view backend_name(Backend b);

/// True if the backend was compiled in and the running CPU supports it.
bool backend_supported(Backend b);

Backend active_backend();

/// Pin the backend used by all kernel calls (process-wide). Throws
/// std::invalid_argument if the backend is not supported on this machine.
void force_backend(Backend b);

/// sum_i x[i] * y[i]
double dot(std::span<const double> x, std::span<const double> y);

/// sum_i w[i] * x[i] * y[i]
double wdot(std::span<const double> w, std::span<const double> x,
            std::span<const double> y);

double sum(std::span<const double> x);

/// sum_i x[i]^2
double sumsq(std::span<const double> x);

/// y += a * x
void axpy(double a, std::span<const double> x, std::span<double> y);

/// out[i] = x[i] * y[i]; out may alias x or y.
void mul(std::span<const double> x, std::span<const double> y,
         std::span<double> out);

/// Function table implemented once per backend.
struct Table {
  double (*dot)(const double*, const double*, std::size_t);
  double (*wdot)(const double*, const double*, const double*, std::size_t);
  double (*sum)(const double*, std::size_t);
  double (*sumsq)(const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*mul)(const double*, const double*, double*, std::size_t);
};

namespace detail {
const Table& scalar_table();
const Table* avx2_table();  // nullptr when not compiled in
const Table* neon_table();  // nullptr when not compiled in
const Table& table_for(Backend b);
}  // namespace detail

/// RAII guard that pins a backend for its lifetime (tests only; not
/// thread-safe against concurrent kernel calls on other threads).
class ScopedBackend {
 public:
  explicit ScopedBackend(Backend b) : previous_(active_backend()) {
    force_backend(b);
  }
  ~ScopedBackend() { force_backend(previous_); }
  ScopedBackend(const ScopedBackend&) = delete;
  ScopedBackend& operator=(const ScopedBackend&) = delete;

 private:
  Backend previous_;
};

}  // namespace longci::kernels
