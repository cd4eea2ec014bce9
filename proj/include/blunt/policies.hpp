#pragma once

#include <memory>
#include <vector>

#include "blunt/engine.hpp"

namespace blunt {

/// Deterministic completion: step the lowest-id runnable process, else
/// deliver the oldest in-flight message. Always makes progress.
Directive drain_directive(const EngineState& s);

/// Cycles through processes; delivers FIFO when nobody is steppable.
class RoundRobinPolicy : public AdversaryPolicy {
 public:
  Directive next(const EngineState& s) override;
  std::unique_ptr<AdversaryPolicy> clone() const override {
    return std::make_unique<RoundRobinPolicy>(*this);
  }
  std::string name() const override { return "round-robin"; }

 private:
  int cursor_ = 0;
};

/// Uniform choice among the legal directives on a private seeded stream.
class RandomPolicy : public AdversaryPolicy {
 public:
  explicit RandomPolicy(uint64_t seed) : state_(seed) {}
  Directive next(const EngineState& s) override;
  std::unique_ptr<AdversaryPolicy> clone() const override {
    return std::make_unique<RandomPolicy>(*this);
  }
  std::string name() const override { return "random"; }

 private:
  uint64_t state_;
};

/// Replays a fixed directive list, then drains.
class ScriptPolicy : public AdversaryPolicy {
 public:
  explicit ScriptPolicy(std::vector<Directive> script, std::string name = "script")
      : script_(std::move(script)), name_(std::move(name)) {}
  Directive next(const EngineState& s) override;
  std::unique_ptr<AdversaryPolicy> clone() const override {
    return std::make_unique<ScriptPolicy>(*this);
  }
  std::string name() const override { return name_; }

 private:
  std::vector<Directive> script_;
  std::string name_;
};

/// Runs the processes' program instructions in a fixed interleaving,
/// executing each object operation to completion in isolation. Outcomes
/// under such schedules coincide with atomic-object outcomes.
class InterleavingPolicy : public AdversaryPolicy {
 public:
  explicit InterleavingPolicy(std::vector<int> procOrder) : order_(std::move(procOrder)) {}
  Directive next(const EngineState& s) override;
  std::unique_ptr<AdversaryPolicy> clone() const override {
    return std::make_unique<InterleavingPolicy>(*this);
  }
  std::string name() const override { return "interleaving"; }

 private:
  std::vector<int> order_;
  size_t idx_ = 0;
  bool midOp_ = false;
};

/// The strong adversary against the weakener on plain ABD registers:
/// holds p0's write and p2's first read mid-query across the coin flip,
/// then completes them against frozen replies so that p2 reads the coin
/// followed by its complement. Forces the bad outcome on every tape.
std::unique_ptr<AdversaryPolicy> crafted_abd_weakener_policy(const Program& program,
                                                             const Bindings& bindings);

/// Crafted adversary against the weakener on ABD^2: keeps one query
/// phase of p0's write and of p2's first read pending across the flip
/// and gambles on a single iteration choice per branch. Reaches the bad
/// outcome with probability exactly 1/2.
std::unique_ptr<AdversaryPolicy> crafted_abd2_policy(const Program& program,
                                                     const Bindings& bindings);

}  // namespace blunt
