#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace longci {

/// N subject trajectories on one time grid, ordered
/// V, L_1, (C_1), A_1, ..., L_T, (C_T), A_T, Y.
///
/// Storage is subject-major: feature d of subject i at 0-based time k lives at
/// l[(i * t + k) * l_dim + d]. Features measured after censoring are NaN, and
/// the outcome of a censored subject is NaN. Treatment after censoring repeats
/// the last observed value so rows stay monotone.
class Panel {
 public:
  struct Data {
    std::size_t n = 0;
    std::size_t t = 0;
    int delta = 1;
    /// 1-based finest-grid index of each column; empty means 1..t.
    std::vector<std::size_t> grid;
    std::vector<std::string> v_names;
    std::vector<std::string> l_names;
    std::vector<double> v;
    std::vector<double> l;
    std::vector<std::uint8_t> a;
    std::vector<std::uint8_t> c;  // empty when there is no censoring
    std::vector<double> y;
    std::vector<double> weight;  // empty means unit case weights
  };

  Panel() = default;
  /// Validates shapes and the single-jump / absorbing invariants; throws
  /// DataError on violation.
  explicit Panel(Data data);

  std::size_t n() const { return d_.n; }
  std::size_t t() const { return d_.t; }
  int delta() const { return d_.delta; }
  std::size_t v_dim() const { return d_.v_names.size(); }
  std::size_t l_dim() const { return d_.l_names.size(); }
  const std::vector<std::size_t>& grid() const { return d_.grid; }
  const std::vector<std::string>& v_names() const { return d_.v_names; }
  const std::vector<std::string>& l_names() const { return d_.l_names; }
  bool has_censoring() const { return !d_.c.empty(); }
  bool has_case_weights() const { return !d_.weight.empty(); }

  std::span<const double> v(std::size_t i) const {
    return {d_.v.data() + i * v_dim(), v_dim()};
  }
  std::span<const double> l(std::size_t i, std::size_t k) const {
    return {d_.l.data() + (i * d_.t + k) * l_dim(), l_dim()};
  }
  int a(std::size_t i, std::size_t k) const { return d_.a[i * d_.t + k]; }
  /// Treatment at 0-based time k-1, with A_0 = 0.
  int a_prev(std::size_t i, std::size_t k) const {
    return k == 0 ? 0 : a(i, k - 1);
  }
  bool censored(std::size_t i, std::size_t k) const {
    return !d_.c.empty() && d_.c[i * d_.t + k] != 0;
  }
  /// Censored at or before 0-based time k-1 (so L_k is unobserved).
  bool censored_before(std::size_t i, std::size_t k) const {
    return k > 0 && censored(i, k - 1);
  }
  double y(std::size_t i) const { return d_.y[i]; }
  double weight(std::size_t i) const {
    return d_.weight.empty() ? 1.0 : d_.weight[i];
  }

  /// Jump time as a 0-based column index, or t() if never treated.
  std::size_t jump_index(std::size_t i) const;

  const Data& data() const { return d_; }

  /// Copy with the given subjects (indices may repeat).
  Panel select(std::span<const std::size_t> subjects) const;

 private:
  Data d_;
};

/// Long-format layout: one row per (subject, time) with columns
/// subject_id, t, <v names...>, <l names...>, a, c. Missing values are "NA".
/// Outcomes go to a sibling file with columns subject_id, y[, weight].
/// Lines starting with '#' carry metadata (delta, grid).
void write_panel_csv(const Panel& panel, std::ostream& rows,
                     std::ostream& outcomes);
void write_panel_csv(const Panel& panel, const std::string& rows_path,
                     const std::string& outcomes_path);

/// Inverse of write_panel_csv. Columns whose names start with 'v' are
/// baseline features and those starting with 'l' are time-varying; the
/// delta and grid come from metadata lines when present.
Panel read_panel_csv(std::istream& rows, std::istream& outcomes);
Panel read_panel_csv(const std::string& rows_path,
                     const std::string& outcomes_path);

}  // namespace longci
