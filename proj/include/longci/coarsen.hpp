#pragma once

#include <cstddef>
#include <vector>

#include "longci/panel.hpp"
#include "longci/regime.hpp"

namespace longci {

/// Retained subset of a time axis. Indices are 1-based positions on the axis
/// being coarsened (the finest grid unless coarsening is composed).
struct CoarseGrid {
  std::size_t t_star = 0;
  int delta = 1;
  std::vector<std::size_t> indices;

  std::size_t size() const { return indices.size(); }
  bool is_identity() const { return indices.size() == t_star; }
  /// True if 1-based index `t` is retained.
  bool retains(std::size_t t) const;
};

/// floor((t_star - 1) / delta) + 1. Throws ConfigError if delta < 1 or
/// t_star < 1.
std::size_t coarse_length(std::size_t t_star, int delta);

/// {t_star, t_star - delta, ...} down to the smallest value >= 1, with 1
/// appended if absent, sorted ascending. When delta does not divide
/// t_star - 1 the first gap is shorter than delta and the grid has one more
/// point than coarse_length().
CoarseGrid coarse_indices(std::size_t t_star, int delta);

/// Grid that keeps every index.
CoarseGrid identity_grid(std::size_t t_star);

/// Builds a grid from explicit 1-based indices (must be strictly increasing,
/// start at 1 and end at t_star). `delta` is recorded as metadata only.
CoarseGrid custom_grid(std::size_t t_star, std::vector<std::size_t> indices,
                       int delta);

/// Keeps only the grid's time columns. grid.t_star must equal panel.t().
/// Treatment and censoring are absorbing, so the retained columns summarise
/// the dropped ones. A subject censored strictly inside a bin reports its
/// last observed features at the bin end.
Panel coarsen_panel(const Panel& panel, const CoarseGrid& grid);

/// Subsets a regime to the grid. Throws DataError if the regime has an
/// unspecified tail whose boundary index is not retained.
TreatmentRegime coarsen_regime(const TreatmentRegime& regime,
                               const CoarseGrid& grid);

}  // namespace longci
