#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace blunt {

/// Runtime value flowing through programs and objects: the unwritten
/// register marker (bot), unit (returned by writes), integers, and
/// vectors (snapshot results).
struct Value {
  enum class Kind { Bot, Unit, Int, Vec };

  Kind kind = Kind::Bot;
  long long num = 0;
  std::vector<Value> items;

  Value() = default;

  static Value bot() { return Value{}; }
  static Value unit() {
    Value v;
    v.kind = Kind::Unit;
    return v;
  }
  static Value integer(long long n) {
    Value v;
    v.kind = Kind::Int;
    v.num = n;
    return v;
  }
  static Value vec(std::vector<Value> xs) {
    Value v;
    v.kind = Kind::Vec;
    v.items = std::move(xs);
    return v;
  }

  bool is_bot() const { return kind == Kind::Bot; }
  bool is_int() const { return kind == Kind::Int; }

  friend bool operator==(const Value& a, const Value& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
      case Kind::Bot:
      case Kind::Unit:
        return true;
      case Kind::Int:
        return a.num == b.num;
      case Kind::Vec:
        return a.items == b.items;
    }
    return false;
  }
  friend bool operator!=(const Value& a, const Value& b) { return !(a == b); }
  friend bool operator<(const Value& a, const Value& b) {
    if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
    switch (a.kind) {
      case Kind::Bot:
      case Kind::Unit:
        return false;
      case Kind::Int:
        return a.num < b.num;
      case Kind::Vec:
        return a.items < b.items;
    }
    return false;
  }

  std::string str() const {
    switch (kind) {
      case Kind::Bot:
        return "bot";
      case Kind::Unit:
        return "ok";
      case Kind::Int:
        return std::to_string(num);
      case Kind::Vec: {
        std::string s = "[";
        for (size_t i = 0; i < items.size(); ++i) {
          if (i) s += " ";
          s += items[i].str();
        }
        return s + "]";
      }
    }
    return "?";
  }
};

/// (integer, process id) pair under lexicographic order; (0,0) is initial.
struct Timestamp {
  long long t = 0;
  int pid = 0;

  friend bool operator==(const Timestamp& a, const Timestamp& b) {
    return a.t == b.t && a.pid == b.pid;
  }
  friend bool operator!=(const Timestamp& a, const Timestamp& b) { return !(a == b); }
  friend bool operator<(const Timestamp& a, const Timestamp& b) {
    return a.t != b.t ? a.t < b.t : a.pid < b.pid;
  }
  friend bool operator<=(const Timestamp& a, const Timestamp& b) { return a < b || a == b; }

  std::string str() const { return "(" + std::to_string(t) + "," + std::to_string(pid) + ")"; }
};

inline bool ts_less(const Timestamp& a, const Timestamp& b) { return a < b; }

/// Syntax-derived invocation identity: process, control point in the
/// program text, and the number of prior visits to that control point.
struct InvocationId {
  int proc = -1;
  int site = -1;
  int occ = 0;

  friend bool operator==(const InvocationId& a, const InvocationId& b) {
    return a.proc == b.proc && a.site == b.site && a.occ == b.occ;
  }
  friend bool operator!=(const InvocationId& a, const InvocationId& b) { return !(a == b); }
  friend bool operator<(const InvocationId& a, const InvocationId& b) {
    if (a.proc != b.proc) return a.proc < b.proc;
    if (a.site != b.site) return a.site < b.site;
    return a.occ < b.occ;
  }

  std::string str() const {
    return "p" + std::to_string(proc) + "@" + std::to_string(site) + "#" + std::to_string(occ);
  }
};

enum class ProcStatus { Running, Terminated, LoopForever };

inline const char* status_name(ProcStatus s) {
  switch (s) {
    case ProcStatus::Running:
      return "blocked";  // outcome flag for processes that did not finish
    case ProcStatus::Terminated:
      return "terminated";
    case ProcStatus::LoopForever:
      return "loop-forever";
  }
  return "?";
}

}  // namespace blunt
