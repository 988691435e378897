#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dspkat {

/// Thrown when an operation is called outside its contract (format mismatch,
/// NaN input, invalid format).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Signed two's-complement format: one sign bit, `int_bits` integer bits and
/// `frac_bits` fractional bits.
struct QFormat {
  int int_bits = 0;
  int frac_bits = 0;

  constexpr int width() const { return 1 + int_bits + frac_bits; }
  constexpr std::int64_t max_raw() const { return (std::int64_t{1} << (width() - 1)) - 1; }
  constexpr std::int64_t min_raw() const { return -(std::int64_t{1} << (width() - 1)); }
  constexpr std::uint32_t word_mask() const {
    return width() >= 32 ? 0xFFFFFFFFu : ((std::uint32_t{1} << width()) - 1);
  }
  constexpr bool valid() const {
    return int_bits >= 0 && frac_bits >= 0 && width() >= 2 && width() <= 32;
  }

  friend constexpr bool operator==(QFormat, QFormat) = default;
};

std::string to_string(QFormat fmt);

// Labels as used for the device: the 16-bit names count the sign bit as an
// integer bit, the 24-bit names do not.
inline constexpr QFormat kQ12_4{11, 4};   // 16-bit ADC / MTI samples
inline constexpr QFormat kQ0_23{0, 23};   // 24-bit spectra and magnitudes
inline constexpr QFormat kQ2_21{2, 21};   // 24-bit phases in radians
inline constexpr QFormat kQ8_8{7, 8};     // 16-bit CFAR threshold factor

/// A fixed-point value. `raw` always lies in the format's signed range.
struct Fixed {
  std::int32_t raw = 0;
  QFormat fmt = kQ0_23;

  /// Unsigned memory word (two's complement, masked to the format width).
  std::uint32_t word() const { return static_cast<std::uint32_t>(raw) & fmt.word_mask(); }

  friend bool operator==(const Fixed&, const Fixed&) = default;
};

struct CFixed {
  Fixed re;
  Fixed im;
  friend bool operator==(const CFixed&, const CFixed&) = default;
};

/// Raw complex value used inside the datapath (Q0.23 unless stated).
struct ComplexRaw {
  std::int32_t re = 0;
  std::int32_t im = 0;
  friend bool operator==(const ComplexRaw&, const ComplexRaw&) = default;
};

Fixed quantize(double x, QFormat fmt);
double to_real(Fixed a);

/// Build a Fixed from a raw integer, saturating to the format range.
Fixed from_raw(std::int64_t raw, QFormat fmt);
/// Decode an unsigned memory word of the format's width.
Fixed from_word(std::uint32_t word, QFormat fmt);

Fixed sat_add(Fixed a, Fixed b);
Fixed sat_sub(Fixed a, Fixed b);
Fixed sat_neg(Fixed a);
Fixed sat_mul(Fixed a, Fixed b, QFormat out_fmt);

/// Saturate a wide integer to the signed range of `fmt`.
std::int32_t saturate(std::int64_t v, QFormat fmt);

/// Arithmetic shift right by `shift` bits with round-to-nearest-even.
/// A negative shift is a left shift.
std::int64_t shift_round_even(std::int64_t v, int shift);

/// Sign-extend the low `bits` bits of `word`.
std::int32_t sign_extend(std::uint32_t word, int bits);

}  // namespace dspkat
