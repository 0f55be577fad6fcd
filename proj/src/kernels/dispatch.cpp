#include <atomic>
#include <cassert>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "longci/kernels.hpp"

namespace longci::kernels {
namespace detail {

#if !defined(LONGCI_HAVE_AVX2)
const Table* avx2_table() { return nullptr; }
#endif
#if !defined(LONGCI_HAVE_NEON)
const Table* neon_table() { return nullptr; }
#endif

const Table& table_for(Backend b) {
  switch (b) {
    case Backend::Avx2:
      if (const Table* t = avx2_table()) return *t;
      break;
    case Backend::Neon:
      if (const Table* t = neon_table()) return *t;
      break;
    case Backend::Scalar:
      break;
  }
  return scalar_table();
}

}  // namespace detail

namespace {

bool cpu_has_avx2() {
#if defined(LONGCI_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend detect() {
  if (const char* env = std::getenv("LONGCI_KERNELS")) {
    const std::string want(env);
    if (want == "scalar") return Backend::Scalar;
    if (want == "avx2" && backend_supported(Backend::Avx2)) return Backend::Avx2;
    if (want == "neon" && backend_supported(Backend::Neon)) return Backend::Neon;
  }
  if (backend_supported(Backend::Avx2)) return Backend::Avx2;
  if (backend_supported(Backend::Neon)) return Backend::Neon;
  return Backend::Scalar;
}

struct State {
  std::atomic<Backend> backend;
  std::atomic<const Table*> table;
  State() {
    const Backend b = detect();
    backend.store(b);
    table.store(&detail::table_for(b));
  }
};

State& state() {
  static State s;
  return s;
}

inline const Table& active() {
  return *state().table.load(std::memory_order_relaxed);
}

}  // namespace

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::Scalar: return "scalar";
    case Backend::Avx2: return "avx2";
    case Backend::Neon: return "neon";
  }
  return "unknown";
}

bool backend_supported(Backend b) {
  switch (b) {
    case Backend::Scalar: return true;
    case Backend::Avx2: return detail::avx2_table() != nullptr && cpu_has_avx2();
    case Backend::Neon: return detail::neon_table() != nullptr;
  }
  return false;
}

Backend active_backend() { return state().backend.load(); }

void force_backend(Backend b) {
  if (!backend_supported(b)) {
    throw std::invalid_argument("kernel backend '" + std::string(backend_name(b)) +
                                "' is not supported on this machine");
  }
  state().backend.store(b);
  state().table.store(&detail::table_for(b));
}

double dot(std::span<const double> x, std::span<const double> y) {
  assert(x.size() == y.size());
  return active().dot(x.data(), y.data(), x.size());
}

double wdot(std::span<const double> w, std::span<const double> x,
            std::span<const double> y) {
  assert(w.size() == x.size() && x.size() == y.size());
  return active().wdot(w.data(), x.data(), y.data(), x.size());
}

double sum(std::span<const double> x) { return active().sum(x.data(), x.size()); }

double sumsq(std::span<const double> x) {
  return active().sumsq(x.data(), x.size());
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  active().axpy(a, x.data(), y.data(), x.size());
}

void mul(std::span<const double> x, std::span<const double> y,
         std::span<double> out) {
  assert(x.size() == y.size() && x.size() == out.size());
  active().mul(x.data(), y.data(), out.data(), x.size());
}

}  // namespace longci::kernels
