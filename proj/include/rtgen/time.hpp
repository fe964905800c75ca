#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

#include "rtgen/error.hpp"

namespace rtgen {

namespace detail {

inline __int128 gcd128(__int128 a, __int128 b) {
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  while (b != 0) {
    __int128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

// Nearest integer with ties to even. den must be positive.
inline std::int64_t round_div_half_even(__int128 num, __int128 den) {
  bool neg = num < 0;
  __int128 n = neg ? -num : num;
  __int128 q = n / den;
  __int128 r = n % den;
  __int128 twice = r * 2;
  if (twice > den || (twice == den && (q % 2) != 0)) ++q;
  if (neg) q = -q;
  if (q > INT64_MAX || q < INT64_MIN) throw InternalError("time rounding overflow");
  return static_cast<std::int64_t>(q);
}

}  // namespace detail

// Exact rational time in nanoseconds. Frame periods such as 1000/120 ms have
// no terminating decimal form, so every quantity the event loop adds or
// compares stays rational; floating point only appears in serialized output.
class Time {
 public:
  constexpr Time() = default;

  static Time zero() { return Time(); }
  static Time from_ns(std::int64_t ns) { return make(ns, 1); }
  static Time from_us(std::int64_t us) { return make(static_cast<__int128>(us) * 1000, 1); }
  static Time from_ms(std::int64_t ms) { return make(static_cast<__int128>(ms) * 1000000, 1); }
  static Time ratio_ns(__int128 num, __int128 den) { return make(num, den); }

  // Decimal milliseconds with at most six fractional digits (exact in ns).
  static Time parse_ms(std::string_view text) {
    if (text.empty()) throw ConfigError("empty duration");
    std::string_view int_part = text;
    std::string_view frac_part;
    if (auto dot = text.find('.'); dot != std::string_view::npos) {
      int_part = text.substr(0, dot);
      frac_part = text.substr(dot + 1);
    }
    if (int_part.empty() && frac_part.empty()) throw ConfigError("malformed duration: " + std::string(text));
    if (frac_part.size() > 6) throw ConfigError("duration finer than 1 ns: " + std::string(text));
    __int128 value = 0;
    auto eat = [&value, &text](std::string_view digits) {
      for (char c : digits) {
        if (c < '0' || c > '9') throw ConfigError("malformed duration: " + std::string(text));
        value = value * 10 + (c - '0');
        if (value > static_cast<__int128>(INT64_MAX) * 1000000) throw ConfigError("duration out of range");
      }
    };
    eat(int_part);
    eat(frac_part);
    for (std::size_t i = frac_part.size(); i < 6; ++i) value *= 10;
    return make(value, 1);
  }

  friend Time operator+(Time a, Time b) {
    return make(i128(a.num_) * b.den_ + i128(b.num_) * a.den_, i128(a.den_) * b.den_);
  }
  friend Time operator-(Time a, Time b) {
    return make(i128(a.num_) * b.den_ - i128(b.num_) * a.den_, i128(a.den_) * b.den_);
  }
  Time scaled(std::int64_t k) const { return make(i128(num_) * k, den_); }
  Time divided(std::int64_t k) const {
    if (k == 0) throw InternalError("division of time by zero");
    return make(num_, i128(den_) * k);
  }

  friend std::strong_ordering operator<=>(const Time& a, const Time& b) {
    __int128 lhs = i128(a.num_) * b.den_;
    __int128 rhs = i128(b.num_) * a.den_;
    if (lhs < rhs) return std::strong_ordering::less;
    if (lhs > rhs) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
  }
  friend bool operator==(const Time& a, const Time& b) { return a.num_ == b.num_ && a.den_ == b.den_; }

  bool negative() const { return num_ < 0; }
  bool is_zero() const { return num_ == 0; }

  std::int64_t round_ns() const { return detail::round_div_half_even(num_, den_); }

  // Fixed-point milliseconds. decimals=6 renders exact nanoseconds.
  std::string ms_fixed(int decimals = 6) const {
    __int128 unit = 1;
    for (int i = decimals; i < 6; ++i) unit *= 10;
    std::int64_t scaled_val = detail::round_div_half_even(num_, i128(den_) * unit);
    std::int64_t pow10 = 1;
    for (int i = 0; i < decimals; ++i) pow10 *= 10;
    bool neg = scaled_val < 0;
    std::int64_t v = neg ? -scaled_val : scaled_val;
    std::string out = neg ? "-" : "";
    out += std::to_string(v / pow10);
    if (decimals > 0) {
      std::string frac = std::to_string(v % pow10);
      out += '.';
      out += std::string(static_cast<std::size_t>(decimals) - frac.size(), '0');
      out += frac;
    }
    return out;
  }

  double ms_double() const { return static_cast<double>(num_) / static_cast<double>(den_) / 1e6; }

  std::int64_t raw_num() const { return num_; }
  std::int64_t raw_den() const { return den_; }

 private:
  static __int128 i128(std::int64_t v) { return static_cast<__int128>(v); }

  static Time make(__int128 num, __int128 den) {
    if (den == 0) throw InternalError("zero denominator");
    if (den < 0) {
      den = -den;
      num = -num;
    }
    __int128 g = detail::gcd128(num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
    if (num > INT64_MAX || num < INT64_MIN || den > INT64_MAX) throw InternalError("time overflow");
    Time t;
    t.num_ = static_cast<std::int64_t>(num);
    t.den_ = static_cast<std::int64_t>(den);
    return t;
  }

  std::int64_t num_ = 0;  // nanoseconds numerator
  std::int64_t den_ = 1;  // positive denominator
};

// Frames per second as an exact positive rational.
struct Rate {
  std::int64_t num = 0;
  std::int64_t den = 1;

  static Rate of(std::int64_t n, std::int64_t d = 1) {
    if (n <= 0 || d <= 0) throw ConfigError("fps must be positive");
    __int128 g = detail::gcd128(n, d);
    return Rate{static_cast<std::int64_t>(n / g), static_cast<std::int64_t>(d / g)};
  }

  // Decimal text, e.g. "120" or "29.97".
  static Rate parse(std::string_view text) {
    std::string_view int_part = text;
    std::string_view frac_part;
    if (auto dot = text.find('.'); dot != std::string_view::npos) {
      int_part = text.substr(0, dot);
      frac_part = text.substr(dot + 1);
    }
    __int128 n = 0;
    for (std::string_view part : {int_part, frac_part}) {
      for (char c : part) {
        if (c < '0' || c > '9') throw ConfigError("malformed fps: " + std::string(text));
        n = n * 10 + (c - '0');
        if (n > INT64_MAX / 10) throw ConfigError("fps out of range");
      }
    }
    std::int64_t d = 1;
    for (std::size_t i = 0; i < frac_part.size(); ++i) d *= 10;
    if (n == 0) throw ConfigError("fps must be positive");
    return of(static_cast<std::int64_t>(n), d);
  }

  Time period() const { return Time::ratio_ns(static_cast<__int128>(1000000000) * den, num); }
  Time frame_time(std::int64_t n) const {
    return Time::ratio_ns(static_cast<__int128>(1000000000) * den * n, num);
  }
  // Number of frame arrivals in [0, horizon): smallest n with n*period >= horizon.
  std::int64_t frames_before(Time horizon) const {
    if (horizon <= Time::zero()) return 0;
    // ceil(horizon * num / (1e9 * den)) with horizon = hn/hd ns
    __int128 lhs = static_cast<__int128>(horizon.raw_num()) * num;
    __int128 rhs = static_cast<__int128>(1000000000) * den * horizon.raw_den();
    __int128 q = lhs / rhs;
    if (q * rhs < lhs) ++q;
    return static_cast<std::int64_t>(q);
  }

  friend bool operator==(const Rate&, const Rate&) = default;
};

}  // namespace rtgen
