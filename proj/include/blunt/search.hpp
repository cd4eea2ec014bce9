#pragma once

#include <memory>
#include <set>
#include <string>
#include <unordered_map>

#include "blunt/engine.hpp"
#include "blunt/policies.hpp"
#include "blunt/program.hpp"
#include "blunt/rational.hpp"

namespace blunt {

struct SearchOptions {
  long nodeBudget = 100000000;
  bool por = true;
  bool extractPolicy = false;
  /// Ordering hint: this policy's directive is explored first wherever it
  /// is legal. Soundness and exactness do not depend on it.
  const AdversaryPolicy* guide = nullptr;
};

/// Optimal policy extracted from an exhausted search: best directive per
/// canonical state.
class ExtractedPolicy : public AdversaryPolicy {
 public:
  std::unordered_map<Digest, Directive, DigestHash> best;

  Directive next(const EngineState& s) override;
  std::unique_ptr<AdversaryPolicy> clone() const override {
    return std::make_unique<ExtractedPolicy>(*this);
  }
  std::string name() const override { return "extracted-optimal"; }
};

struct SearchResult {
  Rat value{0};
  /// Exhausted searches report the exact optimum; otherwise `value` is a
  /// certified lower bound (unexplored branches count as zero).
  bool exhausted = true;
  long nodes = 0;
  long memoHits = 0;
  std::shared_ptr<ExtractedPolicy> policy;
};

/// Optimal-adversary bad-outcome probability: max over directives at
/// adversary nodes, uniform mean over random domains, exact rationals.
SearchResult expectimax(ProgramPtr program, const Bindings& bindings, const BadPredicate& bad,
                        const SearchOptions& opts = {});

/// Exact bad-outcome probability of one fixed policy (chance nodes only).
Rat eval_policy(ProgramPtr program, const Bindings& bindings, const BadPredicate& bad,
                const AdversaryPolicy& policy, long stepBudget = 1000000);

struct OutcomeSet {
  std::set<std::string> outcomes;  // canonical outcome encodings
  bool exhausted = true;
  long nodes = 0;
};

/// All outcomes reachable within `maxDirectives` adversary decisions,
/// under any adversary and any randomness.
OutcomeSet enumerate_outcomes(ProgramPtr program, const Bindings& bindings, long maxDirectives,
                              long nodeBudget = 50000000);

/// Canonical encoding of an outcome, comparable across object bindings.
std::string outcome_key(const Outcome& o);

/// Outcome of the (possibly unfinished) execution embodied in a state.
Outcome state_outcome(const EngineState& s);

}  // namespace blunt
