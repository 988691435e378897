#include "dspkat/fixed_point.hpp"

#include <cmath>

namespace dspkat {

namespace {

void require_valid(QFormat fmt) {
  if (!fmt.valid()) throw ContractError("invalid Q format " + to_string(fmt));
}

}  // namespace

std::string to_string(QFormat fmt) {
  // The datasheet labels of the named formats mix conventions; anything else
  // is printed as "Q<int>.<frac>" with the sign bit implied.
  if (fmt == kQ12_4) return "Q12.4";
  if (fmt == kQ8_8) return "Q8.8";
  return "Q" + std::to_string(fmt.int_bits) + "." + std::to_string(fmt.frac_bits);
}

std::int32_t saturate(std::int64_t v, QFormat fmt) {
  if (v > fmt.max_raw()) return static_cast<std::int32_t>(fmt.max_raw());
  if (v < fmt.min_raw()) return static_cast<std::int32_t>(fmt.min_raw());
  return static_cast<std::int32_t>(v);
}

std::int64_t shift_round_even(std::int64_t v, int shift) {
  if (shift <= 0) return v * (std::int64_t{1} << -shift);
  const std::int64_t q = v >> shift;  // floor
  const std::int64_t rem = v - q * (std::int64_t{1} << shift);
  const std::int64_t half = std::int64_t{1} << (shift - 1);
  if (rem > half || (rem == half && (q & 1) != 0)) return q + 1;
  return q;
}

std::int32_t sign_extend(std::uint32_t word, int bits) {
  if (bits >= 32) return static_cast<std::int32_t>(word);
  const std::uint32_t mask = (std::uint32_t{1} << bits) - 1;
  word &= mask;
  const std::uint32_t sign = std::uint32_t{1} << (bits - 1);
  return static_cast<std::int32_t>(static_cast<std::int64_t>(word ^ sign) - sign);
}

Fixed quantize(double x, QFormat fmt) {
  require_valid(fmt);
  if (std::isnan(x)) throw ContractError("quantize: NaN input");
  const double scaled = std::ldexp(x, fmt.frac_bits);
  if (scaled >= static_cast<double>(fmt.max_raw())) return {static_cast<std::int32_t>(fmt.max_raw()), fmt};
  if (scaled <= static_cast<double>(fmt.min_raw())) return {static_cast<std::int32_t>(fmt.min_raw()), fmt};
  // nearbyint honours the default FE_TONEAREST mode (ties to even).
  return {saturate(static_cast<std::int64_t>(std::nearbyint(scaled)), fmt), fmt};
}

double to_real(Fixed a) { return std::ldexp(static_cast<double>(a.raw), -a.fmt.frac_bits); }

Fixed from_raw(std::int64_t raw, QFormat fmt) {
  require_valid(fmt);
  return {saturate(raw, fmt), fmt};
}

Fixed from_word(std::uint32_t word, QFormat fmt) {
  require_valid(fmt);
  return {sign_extend(word, fmt.width()), fmt};
}

Fixed sat_add(Fixed a, Fixed b) {
  if (a.fmt != b.fmt) throw ContractError("sat_add: format mismatch");
  return {saturate(std::int64_t{a.raw} + b.raw, a.fmt), a.fmt};
}

Fixed sat_neg(Fixed a) { return {saturate(-std::int64_t{a.raw}, a.fmt), a.fmt}; }

Fixed sat_sub(Fixed a, Fixed b) {
  if (a.fmt != b.fmt) throw ContractError("sat_sub: format mismatch");
  return {saturate(std::int64_t{a.raw} - b.raw, a.fmt), a.fmt};
}

Fixed sat_mul(Fixed a, Fixed b, QFormat out_fmt) {
  require_valid(a.fmt);
  require_valid(b.fmt);
  require_valid(out_fmt);
  const std::int64_t product = std::int64_t{a.raw} * b.raw;
  const int shift = a.fmt.frac_bits + b.fmt.frac_bits - out_fmt.frac_bits;
  if (shift < 0) {
    // Left shifts beyond the output range saturate anyway.
    const int s = -shift;
    if (s >= 31 || product > (out_fmt.max_raw() >> s) || product < (out_fmt.min_raw() >> s)) {
      return {saturate(product > 0 ? out_fmt.max_raw() + 1 : (product < 0 ? out_fmt.min_raw() - 1 : 0), out_fmt),
              out_fmt};
    }
    return {saturate(product << s, out_fmt), out_fmt};
  }
  return {saturate(shift_round_even(product, shift), out_fmt), out_fmt};
}

}  // namespace dspkat
