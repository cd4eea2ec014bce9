#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "blunt/errors.hpp"
#include "blunt/value.hpp"

namespace blunt {

enum class RandomOrigin { Program, Object };

inline const char* origin_name(RandomOrigin o) {
  return o == RandomOrigin::Program ? "program" : "object";
}

/// splitmix64 finalizer; the documented basis of all seed derivation.
inline uint64_t mix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Trial i under master seed m draws from the stream seeded with
/// mix64(mix64(m) ^ (i + 1)). Stable across platforms.
inline uint64_t derive_trial_seed(uint64_t master, uint64_t trial) {
  return mix64(mix64(master) ^ (trial + 1));
}

/// Source of random values consumed in order by RandomSample steps.
class TapeSource {
 public:
  virtual ~TapeSource() = default;
  virtual Value draw(const std::vector<Value>& domain, RandomOrigin origin) = 0;
};

/// Fixed tape for replay: each entry must match the domain requested at
/// consumption time.
class FixedTape : public TapeSource {
 public:
  struct Entry {
    Value value;
    RandomOrigin origin = RandomOrigin::Program;
  };

  FixedTape() = default;
  explicit FixedTape(std::vector<Entry> entries) : entries_(std::move(entries)) {}

  /// Tape of program-origin integer entries, e.g. a single coin flip.
  static FixedTape coins(std::vector<long long> values) {
    std::vector<Entry> es;
    for (long long v : values) es.push_back({Value::integer(v), RandomOrigin::Program});
    return FixedTape(std::move(es));
  }

  void push(Value v, RandomOrigin origin) { entries_.push_back({std::move(v), origin}); }

  Value draw(const std::vector<Value>& domain, RandomOrigin origin) override {
    if (pos_ >= entries_.size()) fail(Err::TapeExhausted, "fixed tape consumed");
    const Entry& e = entries_[pos_++];
    bool found = false;
    for (const Value& d : domain)
      if (d == e.value) found = true;
    if (!found) fail(Err::TapeMismatch, "tape value " + e.value.str() + " not in requested domain");
    if (e.origin != origin)
      fail(Err::TapeMismatch, "tape origin tag does not match the sampling step");
    return e.value;
  }

  size_t consumed() const { return pos_; }

 private:
  std::vector<Entry> entries_;
  size_t pos_ = 0;
};

/// Fixed program-origin entries, seeded object-origin entries. Useful
/// when only the program coins need to be pinned.
class SplitTape : public TapeSource {
 public:
  SplitTape(std::vector<long long> programValues, uint64_t objectSeed)
      : program_(std::move(programValues)), state_(objectSeed) {}

  Value draw(const std::vector<Value>& domain, RandomOrigin origin) override {
    if (origin == RandomOrigin::Program) {
      if (pos_ >= program_.size()) fail(Err::TapeExhausted, "program entries consumed");
      Value v = Value::integer(program_[pos_++]);
      for (const Value& d : domain)
        if (d == v) return v;
      fail(Err::TapeMismatch, "pinned program value outside domain");
    }
    if (domain.empty()) fail(Err::DomainError, "empty random domain");
    return domain[mix64(state_++) % domain.size()];
  }

 private:
  std::vector<long long> program_;
  size_t pos_ = 0;
  uint64_t state_;
};

/// Pseudorandom tape: value = domain[next() % |domain|] on a splitmix64
/// stream. Deterministic given the seed.
class SeededTape : public TapeSource {
 public:
  explicit SeededTape(uint64_t seed) : state_(seed) {}

  Value draw(const std::vector<Value>& domain, RandomOrigin) override {
    if (domain.empty()) fail(Err::DomainError, "empty random domain");
    return domain[next() % domain.size()];
  }

  uint64_t next() { return mix64(state_++); }

 private:
  uint64_t state_;
};

}  // namespace blunt
