#include "longci/coarsen.hpp"

#include <algorithm>

#include "longci/error.hpp"

namespace longci {

bool CoarseGrid::retains(std::size_t t) const {
  return std::binary_search(indices.begin(), indices.end(), t);
}

std::size_t coarse_length(std::size_t t_star, int delta) {
  if (delta < 1) throw ConfigError("delta must be >= 1");
  if (t_star < 1) throw ConfigError("t_star must be >= 1");
  return (t_star - 1) / static_cast<std::size_t>(delta) + 1;
}

CoarseGrid coarse_indices(std::size_t t_star, int delta) {
  coarse_length(t_star, delta);  // validates
  CoarseGrid g;
  g.t_star = t_star;
  g.delta = delta;
  const auto step = static_cast<std::size_t>(delta);
  for (std::size_t s = t_star;; s -= step) {
    g.indices.push_back(s);
    if (s <= step) break;
  }
  if (g.indices.back() != 1) g.indices.push_back(1);
  std::reverse(g.indices.begin(), g.indices.end());
  return g;
}

CoarseGrid identity_grid(std::size_t t_star) { return coarse_indices(t_star, 1); }

CoarseGrid custom_grid(std::size_t t_star, std::vector<std::size_t> indices, int delta) {
  if (indices.empty() || indices.front() != 1 || indices.back() != t_star) {
    throw ConfigError("grid must start at 1 and end at t_star");
  }
  for (std::size_t k = 1; k < indices.size(); ++k) {
    if (indices[k] <= indices[k - 1]) throw ConfigError("grid indices must increase");
  }
  if (delta < 1) throw ConfigError("delta must be >= 1");
  return CoarseGrid{t_star, delta, std::move(indices)};
}

Panel coarsen_panel(const Panel& panel, const CoarseGrid& grid) {
  if (grid.t_star != panel.t()) {
    throw DataError("grid length " + std::to_string(grid.t_star) +
                    " does not match panel length " + std::to_string(panel.t()));
  }
  if (grid.indices.empty() || grid.indices.back() > panel.t() || grid.indices.front() < 1) {
    throw DataError("grid index out of range");
  }
  const auto& src = panel.data();
  const std::size_t n = panel.n(), m = grid.size(), ld = panel.l_dim();

  Panel::Data d;
  d.n = n;
  d.t = m;
  d.delta = panel.delta() * grid.delta;
  d.v_names = src.v_names;
  d.l_names = src.l_names;
  d.v = src.v;
  d.y = src.y;
  d.weight = src.weight;
  d.grid.resize(m);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t col = grid.indices[k] - 1;
    d.grid[k] = src.grid.empty() ? col + 1 : src.grid[col];
  }
  d.l.resize(n * m * ld);
  d.a.resize(n * m);
  if (panel.has_censoring()) d.c.resize(n * m);

  for (std::size_t i = 0; i < n; ++i) {
    std::size_t prev = 0;  // first fine column of the current bin
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t col = grid.indices[k] - 1;
      std::size_t from = col;
      if (panel.has_censoring() && k > 0) {
        // censored strictly inside the bin: carry the last observed features
        for (std::size_t j = prev; j < col; ++j) {
          if (panel.censored(i, j) && !panel.censored_before(i, j)) {
            from = j;
            break;
          }
        }
      }
      const auto l = panel.l(i, from);
      std::copy(l.begin(), l.end(), d.l.begin() + (i * m + k) * ld);
      d.a[i * m + k] = static_cast<std::uint8_t>(panel.a(i, col));
      if (panel.has_censoring()) d.c[i * m + k] = panel.censored(i, col) ? 1 : 0;
      prev = col + 1;
    }
  }
  return Panel(std::move(d));
}

TreatmentRegime coarsen_regime(const TreatmentRegime& regime, const CoarseGrid& grid) {
  if (regime.length() != grid.t_star) {
    throw DataError("regime length does not match the grid");
  }
  std::vector<std::uint8_t> prefix;
  if (!regime.fully_specified()) {
    const std::size_t boundary = regime.specified();
    if (boundary > 0 && !grid.retains(boundary)) {
      throw DataError("regime boundary index " + std::to_string(boundary) +
                      " is not retained by the grid");
    }
  }
  for (std::size_t idx : grid.indices) {
    if (idx > regime.specified()) break;
    prefix.push_back(static_cast<std::uint8_t>(regime.at(idx - 1)));
  }
  return TreatmentRegime(std::move(prefix), grid.size());
}

}  // namespace longci
