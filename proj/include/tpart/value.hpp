#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace tpart {

/// Fixed-point decimal with 1e-6 resolution. All arithmetic is exact except
/// multiplication, which rounds half away from zero.
class Decimal {
 public:
  static constexpr int64_t kScale = 1'000'000;

  constexpr Decimal() = default;

  static constexpr Decimal from_micros(int64_t micros) {
    Decimal d;
    d.micros_ = micros;
    return d;
  }
  static constexpr Decimal from_int(int64_t v) { return from_micros(v * kScale); }
  /// Parses "[-]digits[.digits]" with at most six fractional digits.
  static Decimal parse(std::string_view text);

  constexpr int64_t micros() const { return micros_; }
  double to_double() const { return static_cast<double>(micros_) / kScale; }
  /// Always prints six fractional digits, e.g. "60.000000".
  std::string to_string() const;

  friend constexpr Decimal operator+(Decimal a, Decimal b) { return from_micros(a.micros_ + b.micros_); }
  friend constexpr Decimal operator-(Decimal a, Decimal b) { return from_micros(a.micros_ - b.micros_); }
  friend Decimal operator*(Decimal a, Decimal b);
  friend Decimal operator*(Decimal a, int64_t n) { return from_micros(a.micros_ * n); }
  Decimal& operator+=(Decimal o) {
    micros_ += o.micros_;
    return *this;
  }

  friend constexpr auto operator<=>(const Decimal&, const Decimal&) = default;

 private:
  int64_t micros_ = 0;
};

/// A stored column value.
using Scalar = std::variant<int64_t, Decimal, std::string>;

std::string scalar_to_string(const Scalar& s);

/// Procedure arguments and results. Encodes canonically: identical values
/// always produce identical bytes.
class Value {
 public:
  using List = std::vector<Value>;

  Value() = default;
  Value(int64_t v) : data_(v) {}  // NOLINT(google-explicit-constructor)
  Value(int v) : data_(static_cast<int64_t>(v)) {}  // NOLINT
  Value(Decimal v) : data_(v) {}  // NOLINT
  Value(std::string v) : data_(std::move(v)) {}  // NOLINT
  Value(const char* v) : data_(std::string(v)) {}  // NOLINT
  Value(List v) : data_(std::move(v)) {}  // NOLINT

  static Value list(std::initializer_list<Value> items) { return Value(List(items)); }
  static Value from_scalar(const Scalar& s);

  bool is_null() const { return std::holds_alternative<std::monostate>(data_); }
  bool is_int() const { return std::holds_alternative<int64_t>(data_); }
  bool is_decimal() const { return std::holds_alternative<Decimal>(data_); }
  bool is_string() const { return std::holds_alternative<std::string>(data_); }
  bool is_list() const { return std::holds_alternative<List>(data_); }

  // Accessors throw EngineError(kDecode) on a type mismatch.
  int64_t as_int() const;
  Decimal as_decimal() const;
  const std::string& as_string() const;
  const List& as_list() const;
  const Value& at(size_t i) const;
  size_t size() const { return as_list().size(); }

  std::vector<uint8_t> encode() const;
  void encode_to(std::vector<uint8_t>& out) const;
  static Value decode(std::span<const uint8_t> bytes);

  /// Debug rendering, e.g. [1, 2.500000, "x"].
  std::string to_string() const;

  friend bool operator==(const Value&, const Value&) = default;

 private:
  std::variant<std::monostate, int64_t, Decimal, std::string, List> data_;
};

std::string to_hex(std::span<const uint8_t> bytes);
std::vector<uint8_t> from_hex(std::string_view hex);

}  // namespace tpart
