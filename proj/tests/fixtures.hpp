#pragma once

#include <cmath>
#include <vector>

#include "longci/panel.hpp"

namespace fixture {

/// One time-varying feature, no baseline features. `l` and `a` are
/// subject-major n x t; NaN in l marks unobserved.
inline longci::Panel panel(std::size_t t, const std::vector<double>& l,
                           const std::vector<std::uint8_t>& a, const std::vector<double>& y,
                           std::vector<double> weight = {}, std::vector<std::uint8_t> c = {}) {
  longci::Panel::Data d;
  d.n = y.size();
  d.t = t;
  d.l_names = {"l1"};
  d.l = l;
  d.a = a;
  d.c = std::move(c);
  d.y = y;
  d.weight = std::move(weight);
  return longci::Panel(std::move(d));
}

inline const double kNa = std::nan("");

}  // namespace fixture
