#include "blunt/search.hpp"

#include <algorithm>

#include "blunt/errors.hpp"

namespace blunt {

Outcome state_outcome(const EngineState& s) {
  Outcome o;
  for (const InvRecord& r : s.invs)
    if (r.returned) o.returns[r.inv] = r.ret;
  for (const auto& p : s.procs) o.terminal.push_back(p.status);
  return o;
}

std::string outcome_key(const Outcome& o) {
  std::string key;
  for (const auto& [id, v] : o.returns)
    key += id.str() + "=" + v.str() + ";";
  key += "|";
  for (ProcStatus st : o.terminal) key += status_name(st)[0];
  return key;
}

Directive ExtractedPolicy::next(const EngineState& s) {
  auto it = best.find(digest_state(s));
  if (it == best.end()) return drain_directive(s);
  return it->second;
}

// --------------------------------------------------------------------------

namespace {

/// Tape yielding exactly one predetermined value; used to drive chance
/// branches of the searches.
class ForcedTape : public TapeSource {
 public:
  explicit ForcedTape(Value v) : v_(std::move(v)) {}
  Value draw(const std::vector<Value>& domain, RandomOrigin) override {
    if (used_) fail(Err::Internal, "directive sampled twice");
    used_ = true;
    bool ok = false;
    for (const Value& d : domain)
      if (d == v_) ok = true;
    if (!ok) fail(Err::Internal, "forced value outside domain");
    return v_;
  }

 private:
  Value v_;
  bool used_ = false;
};

struct SearchCtx {
  const SearchOptions& opts;
  const BadPredicate& bad;
  std::unordered_map<Digest, Rat, DigestHash> memo;
  std::shared_ptr<ExtractedPolicy> extracted;
  long nodes = 0;
  long memoHits = 0;
  bool exhausted = true;
};

struct EvalOut {
  Rat value{0};
  bool complete = true;
};

EvalOut search_value(EngineState& s, SearchCtx& c);

/// Value of taking `d` in `s`: deterministic successor or uniform mean
/// over the sampled domain.
EvalOut directive_value(const EngineState& s, const Directive& d, SearchCtx& c) {
  auto dom = sample_domain(s, d);
  if (!dom) {
    EngineState child = s;
    apply(child, d, nullptr, nullptr);
    return search_value(child, c);
  }
  EvalOut out;
  Rat sum{0};
  for (const Value& v : dom->first) {
    EngineState child = s;
    ForcedTape tape(v);
    apply(child, d, &tape, nullptr);
    EvalOut sub = search_value(child, c);
    sum += sub.value;
    out.complete = out.complete && sub.complete;
  }
  out.value = sum / Rat(static_cast<long long>(dom->first.size()));
  return out;
}

EvalOut search_value(EngineState& s, SearchCtx& c) {
  if (s.all_terminal()) {
    return {c.bad.eval(state_outcome(s)) ? Rat(1) : Rat(0), true};
  }
  Digest dig = digest_state(s);
  if (auto it = c.memo.find(dig); it != c.memo.end()) {
    c.memoHits += 1;
    return {it->second, true};
  }
  c.nodes += 1;
  if (c.nodes > c.opts.nodeBudget) {
    c.exhausted = false;
    return {Rat(0), false};  // unexplored contributes nothing to the lower bound
  }

  std::vector<Directive> dirs = legal_directives(s, c.opts.por);
  if (dirs.empty()) fail(Err::Internal, "non-terminal state with no legal directive");
  if (c.opts.guide) {
    // clone so the guide's internal state never leaks across branches
    auto g = c.opts.guide->clone();
    try {
      Directive hint = resolve_directive(s, g->next(s));
      bool found = false;
      for (size_t i = 0; i < dirs.size(); ++i) {
        if (dirs[i].kind == hint.kind && dirs[i].proc == hint.proc &&
            dirs[i].msgId == hint.msgId) {
          std::swap(dirs[0], dirs[i]);
          found = true;
          break;
        }
      }
      // the hint is legal even when partial-order reduction pruned it;
      // exploring one extra legal move at a max node is always sound
      if (!found) dirs.insert(dirs.begin(), hint);
    } catch (const Error&) {
      // guide has no opinion here
    }
  }

  EvalOut best;
  Directive bestDir = dirs.front();
  for (const Directive& d : dirs) {
    EvalOut v = directive_value(s, d, c);
    if (v.value > best.value) {
      best.value = v.value;
      bestDir = d;
    }
    best.complete = best.complete && v.complete;
    if (best.value == Rat(1)) {
      // the maximum is attained; the true value is exactly 1 no matter
      // what the unexplored siblings hold
      best.complete = true;
      break;
    }
  }
  if (best.complete) {
    c.memo.emplace(dig, best.value);
    if (c.extracted) c.extracted->best[dig] = bestDir;
  }
  return best;
}

}  // namespace

SearchResult expectimax(ProgramPtr program, const Bindings& bindings, const BadPredicate& bad,
                        const SearchOptions& opts) {
  SearchCtx c{opts, bad, {}, nullptr, 0, 0, true};
  if (opts.extractPolicy) c.extracted = std::make_shared<ExtractedPolicy>();
  EngineState root = init_state(std::move(program), bindings);
  EvalOut v = search_value(root, c);
  SearchResult r;
  r.value = v.value;
  r.exhausted = c.exhausted && v.complete;
  r.nodes = c.nodes;
  r.memoHits = c.memoHits;
  r.policy = r.exhausted ? c.extracted : nullptr;
  return r;
}

// --------------------------------------------------------------------------

namespace {

Rat eval_rec(EngineState s, std::unique_ptr<AdversaryPolicy> pol, const BadPredicate& bad,
             long stepBudget) {
  while (!s.all_terminal()) {
    if (s.stepSeq >= stepBudget) fail(Err::BudgetExceeded, "policy evaluation budget hit");
    Directive d = resolve_directive(s, pol->next(s));
    auto dom = sample_domain(s, d);
    if (!dom) {
      apply(s, d, nullptr, nullptr);
      continue;
    }
    Rat sum{0};
    for (const Value& v : dom->first) {
      EngineState child = s;
      ForcedTape tape(v);
      apply(child, d, &tape, nullptr);
      sum += eval_rec(std::move(child), pol->clone(), bad, stepBudget);
    }
    return sum / Rat(static_cast<long long>(dom->first.size()));
  }
  return bad.eval(state_outcome(s)) ? Rat(1) : Rat(0);
}

}  // namespace

Rat eval_policy(ProgramPtr program, const Bindings& bindings, const BadPredicate& bad,
                const AdversaryPolicy& policy, long stepBudget) {
  EngineState root = init_state(std::move(program), bindings);
  return eval_rec(std::move(root), policy.clone(), bad, stepBudget);
}

// --------------------------------------------------------------------------

namespace {

struct EnumCtx {
  long maxDirectives;
  long nodeBudget;
  long nodes = 0;
  bool exhausted = true;
  // the directive count needed to reach a state is a function of the
  // state itself, so memoizing on the digest alone is sound; the stored
  // count asserts that invariant
  std::unordered_map<Digest, std::pair<std::set<std::string>, long>, DigestHash> memo;
};

std::set<std::string> enum_rec(EngineState& s, EnumCtx& c) {
  if (s.all_terminal()) return {outcome_key(state_outcome(s))};
  if (s.directiveCount >= c.maxDirectives) return {};
  Digest dig = digest_state(s);
  if (auto it = c.memo.find(dig); it != c.memo.end()) {
    if (it->second.second != s.directiveCount)
      fail(Err::Internal, "same state reached with different directive counts");
    return it->second.first;
  }
  c.nodes += 1;
  if (c.nodes > c.nodeBudget) {
    c.exhausted = false;
    return {};
  }
  std::set<std::string> acc;
  for (const Directive& d : legal_directives(s, true)) {
    auto dom = sample_domain(s, d);
    if (!dom) {
      EngineState child = s;
      apply(child, d, nullptr, nullptr);
      auto sub = enum_rec(child, c);
      acc.insert(sub.begin(), sub.end());
    } else {
      for (const Value& v : dom->first) {
        EngineState child = s;
        ForcedTape tape(v);
        apply(child, d, &tape, nullptr);
        auto sub = enum_rec(child, c);
        acc.insert(sub.begin(), sub.end());
      }
    }
  }
  c.memo.emplace(dig, std::make_pair(acc, s.directiveCount));
  return acc;
}

}  // namespace

OutcomeSet enumerate_outcomes(ProgramPtr program, const Bindings& bindings, long maxDirectives,
                              long nodeBudget) {
  EnumCtx c{maxDirectives, nodeBudget};
  EngineState root = init_state(std::move(program), bindings);
  OutcomeSet out;
  out.outcomes = enum_rec(root, c);
  out.exhausted = c.exhausted;
  out.nodes = c.nodes;
  return out;
}

}  // namespace blunt
