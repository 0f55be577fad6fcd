#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace longci {

/// Static binary treatment sequence that starts at 0 or 1 and jumps at most
/// once from 0 to 1. Positions after `specified()` are left unspecified: no
/// propensity factors and no follower constraint apply there.
class TreatmentRegime {
 public:
  /// Throws DataError unless `prefix` is binary and monotone non-decreasing
  /// and prefix.size() <= length.
  TreatmentRegime(std::vector<std::uint8_t> prefix, std::size_t length);

  static TreatmentRegime never(std::size_t length);
  static TreatmentRegime immediate(std::size_t length);
  /// Zeros at 1-based indices < jump, ones from `jump` on.
  static TreatmentRegime jump_at(std::size_t jump, std::size_t length);
  /// Zeros through 1-based index k, unspecified afterwards.
  static TreatmentRegime no_treat_before(std::size_t k, std::size_t length);

  /// Parses "never", "immediate", "jump:<j>" or "no-treat-before:<k>".
  static TreatmentRegime parse(std::string_view text, std::size_t length);

  std::size_t length() const { return length_; }
  std::size_t specified() const { return prefix_.size(); }
  bool fully_specified() const { return prefix_.size() == length_; }

  /// Value at 0-based position k; requires k < specified().
  int at(std::size_t k) const { return prefix_[k]; }

  const std::vector<std::uint8_t>& prefix() const { return prefix_; }

  std::string describe() const;

  friend bool operator==(const TreatmentRegime&, const TreatmentRegime&) = default;

 private:
  std::vector<std::uint8_t> prefix_;
  std::size_t length_;
};

}  // namespace longci
