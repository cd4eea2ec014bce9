#pragma once

#include <functional>
#include <optional>

#include "blunt/engine.hpp"
#include "blunt/program.hpp"
#include "blunt/rational.hpp"

namespace blunt {

/// theorem bound: p_atomic + [1 - (max{0,k-r}/k)^(n-1)] * (p_lin - p_atomic),
/// exact rational arithmetic.
Rat theorem_bound(Rat pAtomic, Rat pLin, int n, int r, int k);

/// (max{0,k-r}/k)^(n-1): lower bound on the probability that every
/// object random step picks a randomization-free preamble iteration.
Rat prob_x_lower_bound(int n, int r, int k);

/// Two-sided Hoeffding half-width at confidence 1-delta.
double hoeffding_half_width(long trials, double delta = 0.01);

struct McOptions {
  long trials = 1000;
  uint64_t masterSeed = 0;
  long stepBudget = 1000000;
  /// Called per trial with the trial index and its recorded execution
  /// (steps included only when recordSteps is set).
  std::function<void(long, const Execution&)> onTrial;
  bool recordSteps = false;
};

struct McResult {
  long trials = 0;
  long bad = 0;
  long eventX = 0;
  long badAndX = 0;
  double estimate = 0;
  double ciLow = 0;
  double ciHigh = 0;  // 99% two-sided Hoeffding, clipped to [0,1]

  /// Eq-1 style exact decomposition by counting:
  /// bad/N = badAndX/N + (bad-badAndX)/N, grouped by the X event.
  Rat freq_bad() const { return trials ? Rat(bad, trials) : Rat(0); }
  Rat freq_x() const { return trials ? Rat(eventX, trials) : Rat(0); }
  Rat freq_bad_given_x() const { return eventX ? Rat(badAndX, eventX) : Rat(0); }
  Rat freq_bad_given_not_x() const {
    long notX = trials - eventX;
    return notX ? Rat(bad - badAndX, notX) : Rat(0);
  }
};

/// Seeded trials: trial i draws from the tape seeded with
/// derive_trial_seed(masterSeed, i); a policy clone is reset per trial.
McResult monte_carlo(ProgramPtr program, const Bindings& bindings, const AdversaryPolicy& policy,
                     const BadPredicate& bad, const McOptions& opts);

}  // namespace blunt
