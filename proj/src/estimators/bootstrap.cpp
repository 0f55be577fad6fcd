#include <cmath>
#include <random>

#include "longci/error.hpp"
#include "longci/estimators.hpp"
#include "longci/parallel.hpp"
#include "longci/rng.hpp"

namespace longci {

BootstrapResult bootstrap_ci(const Panel& panel, const TreatmentRegime& regime,
                             const EstimatorOptions& options, std::size_t b, double level,
                             std::uint64_t seed, unsigned workers) {
  if (b < 2) throw ConfigError("bootstrap needs at least 2 replicates");
  if (!(level > 0.0 && level < 100.0)) throw ConfigError("level must be in (0, 100)");
  BootstrapResult out;
  out.point = estimate(panel, regime, options);

  const std::size_t n = panel.n();
  std::vector<double> psi(b, std::nan(""));
  parallel_for(b, workers, [&](std::size_t r) {
    Rng rng = make_rng(seed, Stream::Bootstrap, r);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> idx(n);
    for (auto& j : idx) j = pick(rng);
    const Estimate e = estimate(panel.select(idx), regime, options);
    if (e.defined && std::isfinite(e.psi)) psi[r] = e.psi;
  });
  for (double x : psi) {
    if (std::isnan(x)) {
      ++out.skipped;
    } else {
      out.replicates.push_back(x);
    }
  }
  if (out.replicates.empty()) {
    out.lo = out.hi = std::nan("");
    return out;
  }
  const double tail = (100.0 - level) / 2.0;
  out.lo = percentile(out.replicates, tail);
  out.hi = percentile(out.replicates, 100.0 - tail);
  return out;
}

}  // namespace longci
