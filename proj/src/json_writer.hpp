#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "gpcalib/errors.hpp"

namespace gpcalib::detail {

// Streaming JSON writer with a caller-controlled key order. Reals are written
// with 17 significant digits so they parse back bit-exactly.
class JsonWriter {
 public:
  explicit JsonWriter(std::ostream& out) : out_(out) {}

  void begin_object(std::string_view key = {}) { open(key, '{'); }
  void end_object() { close('}'); }
  void begin_array(std::string_view key = {}) { open(key, '['); }
  void end_array() { close(']'); }

  void field(std::string_view key, double v) {
    prefix(key);
    out_ << real(key, v);
  }
  void field(std::string_view key, long long v) {
    prefix(key);
    out_ << v;
  }
  void field(std::string_view key, int v) { field(key, static_cast<long long>(v)); }
  void field(std::string_view key, std::size_t v) {
    prefix(key);
    out_ << v;
  }
  void field(std::string_view key, bool v) {
    prefix(key);
    out_ << (v ? "true" : "false");
  }
  void field(std::string_view key, std::string_view v) {
    prefix(key);
    quoted(v);
  }
  void field(std::string_view key, const char* v) { field(key, std::string_view(v)); }
  void null_field(std::string_view key) {
    prefix(key);
    out_ << "null";
  }

  // Short numeric arrays stay on one line.
  template <typename Vec>
  void vector_field(std::string_view key, const Vec& v) {
    prefix(key);
    out_ << '[';
    for (int i = 0; i < static_cast<int>(v.size()); ++i) {
      if (i) out_ << ", ";
      out_ << real(key, v(i));
    }
    out_ << ']';
  }

  void finish() { out_ << '\n'; }

  static std::string real(std::string_view key, double v) {
    if (!std::isfinite(v)) {
      throw ValidationError("refusing to serialize non-finite value for '" +
                            std::string(key) + "'");
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }

 private:
  struct Level {
    bool first = true;
  };

  void prefix(std::string_view key) {
    if (!stack_.empty()) {
      if (!stack_.back().first) out_ << ',';
      stack_.back().first = false;
      out_ << '\n' << std::string(2 * stack_.size(), ' ');
    }
    if (!key.empty()) {
      quoted(key);
      out_ << ": ";
    }
  }

  void open(std::string_view key, char bracket) {
    prefix(key);
    out_ << bracket;
    stack_.push_back({});
  }

  void close(char bracket) {
    const bool empty = stack_.back().first;
    stack_.pop_back();
    if (!empty) out_ << '\n' << std::string(2 * stack_.size(), ' ');
    out_ << bracket;
  }

  void quoted(std::string_view s) {
    out_ << '"';
    for (char c : s) {
      switch (c) {
        case '"': out_ << "\\\""; break;
        case '\\': out_ << "\\\\"; break;
        case '\n': out_ << "\\n"; break;
        case '\r': out_ << "\\r"; break;
        case '\t': out_ << "\\t"; break;
        default:
          if (static_cast<unsigned char>(c) < 0x20) {
            char buf[8];
            std::snprintf(buf, sizeof buf, "\\u%04x", c);
            out_ << buf;
          } else {
            out_ << c;
          }
      }
    }
    out_ << '"';
  }

  std::ostream& out_;
  std::vector<Level> stack_;
};

}  // namespace gpcalib::detail
