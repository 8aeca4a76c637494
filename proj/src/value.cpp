#include "tpart/value.hpp"

#include <charconv>
#include <cstdio>

#include "tpart/errors.hpp"

namespace tpart {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDuplicateName: return "duplicate-name";
    case ErrorCode::kInvalidSchema: return "invalid-schema";
    case ErrorCode::kUnknownTable: return "unknown-table";
    case ErrorCode::kUnknownColumn: return "unknown-column";
    case ErrorCode::kUnknownMapper: return "unknown-mapper";
    case ErrorCode::kUnknownProcedure: return "unknown-procedure";
    case ErrorCode::kDuplicateKey: return "duplicate-key";
    case ErrorCode::kNotFound: return "not-found";
    case ErrorCode::kReplicatedWrite: return "replicated-write";
    case ErrorCode::kPartitionRange: return "partition-range";
    case ErrorCode::kDuplicateTarget: return "duplicate-target";
    case ErrorCode::kInFlight: return "in-flight";
    case ErrorCode::kInvalidConfig: return "invalid-config";
    case ErrorCode::kRegistryFrozen: return "registry-frozen";
    case ErrorCode::kLivelock: return "livelock";
    case ErrorCode::kMalformedHistory: return "malformed-history";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kSizeCap: return "size-cap";
    case ErrorCode::kDecode: return "decode";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kUser: return "user";
  }
  return "unknown";
}

Decimal Decimal::parse(std::string_view text) {
  auto fail = [&] { throw EngineError(ErrorCode::kDecode, "bad decimal: " + std::string(text)); };
  if (text.empty()) fail();
  bool neg = false;
  if (text.front() == '-') {
    neg = true;
    text.remove_prefix(1);
  }
  auto dot = text.find('.');
  std::string_view whole = text.substr(0, dot);
  std::string_view frac = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
  if (whole.empty() || frac.size() > 6) fail();
  int64_t w = 0;
  auto [p, ec] = std::from_chars(whole.data(), whole.data() + whole.size(), w);
  if (ec != std::errc{} || p != whole.data() + whole.size()) fail();
  int64_t f = 0;
  for (size_t i = 0; i < 6; ++i) {
    f *= 10;
    if (i < frac.size()) {
      if (frac[i] < '0' || frac[i] > '9') fail();
      f += frac[i] - '0';
    }
  }
  int64_t m = w * kScale + f;
  return from_micros(neg ? -m : m);
}

std::string Decimal::to_string() const {
  int64_t m = micros_;
  bool neg = m < 0;
  uint64_t u = neg ? static_cast<uint64_t>(-(m + 1)) + 1 : static_cast<uint64_t>(m);
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%s%llu.%06llu", neg ? "-" : "",
                static_cast<unsigned long long>(u / kScale),
                static_cast<unsigned long long>(u % kScale));
  return buf;
}

Decimal operator*(Decimal a, Decimal b) {
  __int128 p = static_cast<__int128>(a.micros_) * b.micros_;
  __int128 half = Decimal::kScale / 2;
  __int128 q = p >= 0 ? (p + half) / Decimal::kScale : -((-p + half) / Decimal::kScale);
  return Decimal::from_micros(static_cast<int64_t>(q));
}

std::string scalar_to_string(const Scalar& s) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, int64_t>) return std::to_string(v);
        else if constexpr (std::is_same_v<T, Decimal>) return v.to_string();
        else return v;
      },
      s);
}

Value Value::from_scalar(const Scalar& s) {
  return std::visit([](const auto& v) { return Value(v); }, s);
}

namespace {

enum Tag : uint8_t { kNull = 0, kInt = 1, kDec = 2, kStr = 3, kList = 4 };

[[noreturn]] void type_error(const char* want) {
  throw EngineError(ErrorCode::kDecode, std::string("value is not ") + want);
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_varint(std::vector<uint8_t>& out, uint64_t v) {
  while (v >= 0x80) {
    out.push_back(static_cast<uint8_t>(v | 0x80));
    v >>= 7;
  }
  out.push_back(static_cast<uint8_t>(v));
}

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> b) : b_(b) {}

  bool done() const { return pos_ == b_.size(); }

  uint8_t byte() {
    if (pos_ >= b_.size()) throw EngineError(ErrorCode::kDecode, "truncated value");
    return b_[pos_++];
  }
  uint64_t u64() {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(byte()) << (8 * i);
    return v;
  }
  uint64_t varint() {
    uint64_t v = 0;
    for (int shift = 0; shift < 64; shift += 7) {
      uint8_t c = byte();
      v |= static_cast<uint64_t>(c & 0x7f) << shift;
      if (!(c & 0x80)) return v;
    }
    throw EngineError(ErrorCode::kDecode, "varint overflow");
  }

  Value value() {
    switch (byte()) {
      case kNull: return Value();
      case kInt: return Value(static_cast<int64_t>(u64()));
      case kDec: return Value(Decimal::from_micros(static_cast<int64_t>(u64())));
      case kStr: {
        uint64_t n = varint();
        if (n > b_.size() - pos_) throw EngineError(ErrorCode::kDecode, "truncated string");
        std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
        pos_ += n;
        return Value(std::move(s));
      }
      case kList: {
        uint64_t n = varint();
        if (n > b_.size() - pos_) throw EngineError(ErrorCode::kDecode, "truncated list");
        Value::List items;
        items.reserve(n);
        for (uint64_t i = 0; i < n; ++i) items.push_back(value());
        return Value(std::move(items));
      }
      default: throw EngineError(ErrorCode::kDecode, "unknown value tag");
    }
  }

 private:
  std::span<const uint8_t> b_;
  size_t pos_ = 0;
};

}  // namespace

int64_t Value::as_int() const {
  if (!is_int()) type_error("an integer");
  return std::get<int64_t>(data_);
}

Decimal Value::as_decimal() const {
  if (!is_decimal()) type_error("a decimal");
  return std::get<Decimal>(data_);
}

const std::string& Value::as_string() const {
  if (!is_string()) type_error("a string");
  return std::get<std::string>(data_);
}

const Value::List& Value::as_list() const {
  if (!is_list()) type_error("a list");
  return std::get<List>(data_);
}

const Value& Value::at(size_t i) const {
  const auto& l = as_list();
  if (i >= l.size()) throw EngineError(ErrorCode::kDecode, "list index out of range");
  return l[i];
}

void Value::encode_to(std::vector<uint8_t>& out) const {
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          out.push_back(kNull);
        } else if constexpr (std::is_same_v<T, int64_t>) {
          out.push_back(kInt);
          put_u64(out, static_cast<uint64_t>(v));
        } else if constexpr (std::is_same_v<T, Decimal>) {
          out.push_back(kDec);
          put_u64(out, static_cast<uint64_t>(v.micros()));
        } else if constexpr (std::is_same_v<T, std::string>) {
          out.push_back(kStr);
          put_varint(out, v.size());
          out.insert(out.end(), v.begin(), v.end());
        } else {
          out.push_back(kList);
          put_varint(out, v.size());
          for (const auto& item : v) item.encode_to(out);
        }
      },
      data_);
}

std::vector<uint8_t> Value::encode() const {
  std::vector<uint8_t> out;
  encode_to(out);
  return out;
}

Value Value::decode(std::span<const uint8_t> bytes) {
  Reader r(bytes);
  Value v = r.value();
  if (!r.done()) throw EngineError(ErrorCode::kDecode, "trailing bytes after value");
  return v;
}

std::string Value::to_string() const {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) return "null";
        else if constexpr (std::is_same_v<T, int64_t>) return std::to_string(v);
        else if constexpr (std::is_same_v<T, Decimal>) return v.to_string();
        else if constexpr (std::is_same_v<T, std::string>) return "\"" + v + "\"";
        else {
          std::string s = "[";
          for (size_t i = 0; i < v.size(); ++i) {
            if (i) s += ", ";
            s += v[i].to_string();
          }
          return s + "]";
        }
      },
      data_);
}

std::string to_hex(std::span<const uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (uint8_t b : bytes) {
    s.push_back(kDigits[b >> 4]);
    s.push_back(kDigits[b & 0xf]);
  }
  return s;
}

std::vector<uint8_t> from_hex(std::string_view hex) {
  if (hex.size() % 2) throw EngineError(ErrorCode::kDecode, "odd hex length");
  auto nibble = [](char c) -> uint8_t {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    throw EngineError(ErrorCode::kDecode, "bad hex digit");
  };
  std::vector<uint8_t> out;
  out.reserve(hex.size() / 2);
  for (size_t i = 0; i < hex.size(); i += 2) out.push_back((nibble(hex[i]) << 4) | nibble(hex[i + 1]));
  return out;
}

}  // namespace tpart
