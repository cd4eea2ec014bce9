#include "blunt/montecarlo.hpp"

#include <algorithm>
#include <cmath>

#include "blunt/errors.hpp"

namespace blunt {

Rat prob_x_lower_bound(int n, int r, int k) {
  if (n < 1 || r < 1) fail(Err::DomainError, "n and r must be >= 1");
  if (k < 1) fail(Err::NonPositiveK, "k must be >= 1");
  long long num = std::max(0LL, static_cast<long long>(k) - r);
  return rat_pow(Rat(num, k), n - 1);
}

Rat theorem_bound(Rat pAtomic, Rat pLin, int n, int r, int k) {
  if (pAtomic < Rat(0) || pAtomic > pLin || pLin > Rat(1))
    fail(Err::DomainError, "need 0 <= p_atomic <= p_lin <= 1");
  Rat probX = prob_x_lower_bound(n, r, k);
  return pAtomic + (Rat(1) - probX) * (pLin - pAtomic);
}

double hoeffding_half_width(long trials, double delta) {
  if (trials <= 0) return 1.0;
  return std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(trials)));
}

McResult monte_carlo(ProgramPtr program, const Bindings& bindings, const AdversaryPolicy& policy,
                     const BadPredicate& bad, const McOptions& opts) {
  if (opts.trials < 1) fail(Err::DomainError, "trials must be >= 1");
  McResult r;
  r.trials = opts.trials;
  RunOptions runOpts;
  runOpts.stepBudget = opts.stepBudget;
  runOpts.recordSteps = opts.recordSteps;
  for (long i = 0; i < opts.trials; ++i) {
    SeededTape tape(derive_trial_seed(opts.masterSeed, static_cast<uint64_t>(i)));
    auto pol = policy.clone();
    RunResult rr = run(program, bindings, *pol, tape, runOpts);
    bool isBad = bad.eval(outcome_of(rr.exec));
    bool x = event_x_holds(rr.exec);
    if (isBad) r.bad += 1;
    if (x) r.eventX += 1;
    if (isBad && x) r.badAndX += 1;
    if (opts.onTrial) opts.onTrial(i, rr.exec);
  }
  r.estimate = static_cast<double>(r.bad) / static_cast<double>(r.trials);
  double w = hoeffding_half_width(r.trials);
  r.ciLow = std::max(0.0, r.estimate - w);
  r.ciHigh = std::min(1.0, r.estimate + w);
  return r;
}

}  // namespace blunt
