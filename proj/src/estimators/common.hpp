#pragma once

#include <optional>
#include <vector>

#include "longci/panel.hpp"
#include "longci/regime.hpp"

namespace longci::detail {

/// V followed by L_k without the death column.
void feature_row(const Panel& panel, std::size_t i, std::size_t k,
                 const std::optional<std::size_t>& death, std::vector<double>& out);

/// Number of leading columns subject i follows; follows through k iff
/// k < result[i].
std::vector<std::size_t> follow_until(const Panel& panel, const TreatmentRegime& regime,
                                      const std::optional<std::size_t>& death);

void check_regime(const Panel& panel, const TreatmentRegime& regime);

}  // namespace longci::detail
