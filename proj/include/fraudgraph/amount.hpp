#pragma once

#include <algorithm>
#include <compare>
#include <string>
#include <string_view>

#include "fraudgraph/common.hpp"

namespace fraudgraph {

// Non-negative quantity in integer base units (wei, satoshi, ...). 128 bits is
// enough to sum every ether ever issued in wei many times over.
class Amount {
 public:
  using Rep = __int128;

  constexpr Amount() = default;
  static constexpr Amount from_base(Rep units) { return Amount(units); }

  constexpr Rep base() const { return units_; }
  constexpr bool is_zero() const { return units_ == 0; }

  constexpr Amount& operator+=(Amount o) {
    units_ += o.units_;
    return *this;
  }
  friend constexpr Amount operator+(Amount a, Amount b) { return a += b; }
  friend constexpr auto operator<=>(Amount a, Amount b) = default;

  // Value in native units given the chain's decimal exponent.
  double to_native(int decimals) const {
    long double v = static_cast<long double>(units_);
    for (int i = 0; i < decimals; ++i) v /= 10.0L;
    return static_cast<double>(v);
  }

  std::string to_string() const {
    if (units_ == 0) return "0";
    std::string s;
    Rep v = units_;
    bool neg = v < 0;
    if (neg) v = -v;
    while (v > 0) {
      s.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
      v /= 10;
    }
    if (neg) s.push_back('-');
    std::reverse(s.begin(), s.end());
    return s;
  }

  // Parses a plain decimal ("12", "0.5") and scales it by 10^scale into base
  // units. Rejects signs, exponents and fractional digits beyond `scale`.
  static Amount parse(std::string_view text, int scale) {
    std::string_view s = text;
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    if (s.empty()) throw DataError("empty amount");
    Rep whole = 0;
    Rep frac = 0;
    int frac_digits = 0;
    bool seen_dot = false;
    bool any_digit = false;
    constexpr Rep kLimit = (static_cast<Rep>(1) << 120);
    for (char c : s) {
      if (c == '.') {
        if (seen_dot) throw DataError("malformed amount '" + std::string(text) + "'");
        seen_dot = true;
        continue;
      }
      if (c < '0' || c > '9') throw DataError("malformed amount '" + std::string(text) + "'");
      any_digit = true;
      if (seen_dot) {
        if (frac_digits == scale) {
          if (c != '0') throw DataError("amount '" + std::string(text) + "' exceeds base-unit precision");
          continue;
        }
        frac = frac * 10 + (c - '0');
        ++frac_digits;
      } else {
        whole = whole * 10 + (c - '0');
        if (whole > kLimit) throw DataError("amount '" + std::string(text) + "' out of range");
      }
    }
    if (!any_digit) throw DataError("malformed amount '" + std::string(text) + "'");
    for (int i = frac_digits; i < scale; ++i) frac *= 10;
    Rep units = whole;
    for (int i = 0; i < scale; ++i) {
      units *= 10;
      if (units > kLimit) throw DataError("amount '" + std::string(text) + "' out of range");
    }
    return Amount(units + frac);
  }

 private:
  constexpr explicit Amount(Rep units) : units_(units) {}
  Rep units_ = 0;
};

}  // namespace fraudgraph
