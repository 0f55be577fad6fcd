#include "longci/regime.hpp"

#include <charconv>

#include "longci/error.hpp"

namespace longci {
namespace {

std::size_t parse_index(std::string_view text, std::string_view whole) {
  std::size_t value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ConfigError("bad regime '" + std::string(whole) + "'");
  }
  return value;
}

}  // namespace

TreatmentRegime::TreatmentRegime(std::vector<std::uint8_t> prefix, std::size_t length)
    : prefix_(std::move(prefix)), length_(length) {
  if (prefix_.size() > length_) {
    throw DataError("regime prefix longer than the sequence");
  }
  for (std::size_t k = 0; k < prefix_.size(); ++k) {
    if (prefix_[k] > 1) throw DataError("regime values must be 0 or 1");
    if (k > 0 && prefix_[k] < prefix_[k - 1]) {
      throw DataError("regime must not switch treatment off");
    }
  }
}

TreatmentRegime TreatmentRegime::never(std::size_t length) {
  return TreatmentRegime(std::vector<std::uint8_t>(length, 0), length);
}

TreatmentRegime TreatmentRegime::immediate(std::size_t length) {
  return TreatmentRegime(std::vector<std::uint8_t>(length, 1), length);
}

TreatmentRegime TreatmentRegime::jump_at(std::size_t jump, std::size_t length) {
  if (jump < 1 || jump > length) throw ConfigError("jump index out of range");
  std::vector<std::uint8_t> v(length, 0);
  for (std::size_t k = jump - 1; k < length; ++k) v[k] = 1;
  return TreatmentRegime(std::move(v), length);
}

TreatmentRegime TreatmentRegime::no_treat_before(std::size_t k, std::size_t length) {
  if (k < 1 || k > length) throw ConfigError("no-treat-before index out of range");
  return TreatmentRegime(std::vector<std::uint8_t>(k, 0), length);
}

TreatmentRegime TreatmentRegime::parse(std::string_view text, std::size_t length) {
  if (text == "never") return never(length);
  if (text == "immediate") return immediate(length);
  if (text.starts_with("jump:")) return jump_at(parse_index(text.substr(5), text), length);
  constexpr std::string_view ntb = "no-treat-before:";
  if (text.starts_with(ntb)) {
    return no_treat_before(parse_index(text.substr(ntb.size()), text), length);
  }
  throw ConfigError("unknown regime '" + std::string(text) + "'");
}

std::string TreatmentRegime::describe() const {
  if (fully_specified()) {
    std::size_t ones = 0;
    for (auto a : prefix_) ones += a;
    if (ones == 0) return "never";
    if (ones == length_) return "immediate";
    return "jump:" + std::to_string(length_ - ones + 1);
  }
  bool all_zero = true;
  for (auto a : prefix_) all_zero = all_zero && a == 0;
  if (all_zero && !prefix_.empty()) {
    return "no-treat-before:" + std::to_string(prefix_.size());
  }
  std::string s = "prefix:";
  for (auto a : prefix_) s += static_cast<char>('0' + a);
  return s;
}

}  // namespace longci
