#include "blunt/lincheck.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "blunt/errors.hpp"

namespace blunt {

Hist history_events(const History& h) {
  Hist out;
  for (const Action& a : h.actions) {
    HEvent e;
    e.isCall = a.isCall;
    e.inv = a.inv;
    e.object = a.object;
    e.method = a.method;
    e.arg = a.arg;
    e.ret = a.value;
    out.push_back(e);
  }
  return out;
}

Hist project_object(const Hist& h, const std::string& object) {
  Hist out;
  for (const HEvent& e : h)
    if (e.object == object) out.push_back(e);
  return out;
}

namespace {

struct OpInfo {
  InvocationId inv;
  std::string method;
  Value arg;
  bool returned = false;
  Value ret;
  long callPos = -1;
  long retPos = -1;  // LONG_MAX-ish when pending
};

constexpr long kNever = 1L << 60;

std::vector<OpInfo> collect_ops(const Hist& h) {
  std::vector<OpInfo> ops;
  auto find = [&](const InvocationId& id) -> OpInfo* {
    for (auto& o : ops)
      if (o.inv == id) return &o;
    return nullptr;
  };
  for (size_t i = 0; i < h.size(); ++i) {
    const HEvent& e = h[i];
    if (e.isCall) {
      if (find(e.inv)) fail(Err::MalformedHistory, "duplicate call for " + e.inv.str());
      OpInfo o;
      o.inv = e.inv;
      o.method = e.method;
      o.arg = e.arg;
      o.callPos = static_cast<long>(i);
      o.retPos = kNever;
      ops.push_back(o);
    } else {
      OpInfo* o = find(e.inv);
      if (!o) fail(Err::MalformedHistory, "return without call for " + e.inv.str());
      if (o->returned) fail(Err::MalformedHistory, "duplicate return for " + e.inv.str());
      o->returned = true;
      o->ret = e.ret;
      o->retPos = static_cast<long>(i);
    }
  }
  if (ops.size() > 62) fail(Err::TreeTooLarge, "history too wide for the bitmask search");
  return ops;
}

std::string value_key(const Value& v) {
  return v.str();
}

}  // namespace

LinResult check_linearizable(const Hist& h, const ObjectSpec& spec) {
  std::vector<OpInfo> ops = collect_ops(h);
  uint64_t returnedMask = 0;
  for (size_t i = 0; i < ops.size(); ++i)
    if (ops[i].returned) returnedMask |= 1ULL << i;

  std::set<std::pair<uint64_t, std::string>> visited;
  Linearization path;
  bool found = false;

  std::function<bool(uint64_t, const Value&)> dfs = [&](uint64_t done, const Value& state) {
    if ((done & returnedMask) == returnedMask) return true;
    auto key = std::make_pair(done, value_key(state));
    if (visited.count(key)) return false;
    visited.insert(key);
    for (size_t i = 0; i < ops.size(); ++i) {
      if (done & (1ULL << i)) continue;
      // real-time order: nothing unlinearized may have returned before
      // this op was called
      bool minimal = true;
      for (size_t j = 0; j < ops.size(); ++j)
        if (j != i && !(done & (1ULL << j)) && ops[j].retPos < ops[i].callPos) minimal = false;
      if (!minimal) continue;
      auto next = spec.step(state, ops[i].method, ops[i].arg, ops[i].inv.proc);
      if (!next) continue;
      if (ops[i].returned && !(next->second == ops[i].ret)) continue;
      path.push_back({ops[i].inv, ops[i].method, ops[i].arg, next->second});
      if (dfs(done | (1ULL << i), next->first)) return true;
      path.pop_back();
    }
    return false;
  };

  found = dfs(0, spec.init_state());
  LinResult r;
  r.ok = found;
  if (found) r.witness = path;
  return r;
}

bool replay_linearization(const Linearization& lin, const ObjectSpec& spec) {
  Value state = spec.init_state();
  for (const LinOp& op : lin) {
    auto next = spec.step(state, op.method, op.arg, op.inv.proc);
    if (!next || !(next->second == op.ret)) return false;
    state = next->first;
  }
  return true;
}

// --------------------------------------------------------------------------
// Execution trees

std::vector<std::vector<int>> ExecTree::children() const {
  std::vector<std::vector<int>> kids(nodes.size());
  for (size_t i = 1; i < nodes.size(); ++i) kids[nodes[i].parent].push_back(static_cast<int>(i));
  return kids;
}

std::optional<HEvent> ExecTree::event_of(int node) const {
  for (const Step& s : nodes[node].steps) {
    if (s.kind == StepKind::Call) {
      HEvent e;
      e.isCall = true;
      e.inv = *s.inv;
      e.object = s.object;
      e.method = s.method;
      e.arg = s.arg;
      return e;
    }
    if (s.kind == StepKind::Return) {
      HEvent e;
      e.isCall = false;
      e.inv = *s.inv;
      e.ret = s.value;
      return e;
    }
  }
  return std::nullopt;
}

namespace {

/// Fills in object/method/arg on return events from the matching call.
void complete_event(Hist& h) {
  if (h.empty() || h.back().isCall) return;
  HEvent& r = h.back();
  for (const HEvent& c : h)
    if (c.isCall && c.inv == r.inv) {
      r.object = c.object;
      r.method = c.method;
      r.arg = c.arg;
      return;
    }
}

struct StrongCtx {
  const ObjectSpec& spec;
  const std::vector<std::vector<int>>& kids;
  const StrongOptions& opts;
  long budget;
  int deepestFail = -1;
  Hist deepestHist;
};

struct Assigned {
  std::vector<int> order;  // indices into the node's op table
  Value state;
};

/// All valid extensions of `cur` against the ops visible at this node;
/// shorter extensions first.
void gen_extensions(const std::vector<OpInfo>& ops, uint64_t returnedMask, const Assigned& cur,
                    uint64_t doneMask, std::vector<Assigned>& out, StrongCtx& c) {
  if (--c.budget < 0) fail(Err::TreeTooLarge, "strong-linearizability candidate budget hit");
  if ((doneMask & returnedMask) == returnedMask) out.push_back(cur);
  for (size_t i = 0; i < ops.size(); ++i) {
    if (doneMask & (1ULL << i)) continue;
    bool minimal = true;
    for (size_t j = 0; j < ops.size(); ++j)
      if (j != i && !(doneMask & (1ULL << j)) && ops[j].retPos < ops[i].callPos) minimal = false;
    if (!minimal) continue;
    auto next = c.spec.step(cur.state, ops[i].method, ops[i].arg, ops[i].inv.proc);
    if (!next) continue;
    if (ops[i].returned && !(next->second == ops[i].ret)) continue;
    Assigned ext = cur;
    ext.order.push_back(static_cast<int>(i));
    ext.state = next->first;
    gen_extensions(ops, returnedMask, ext, doneMask | (1ULL << i), out, c);
  }
}

/// The committed prefix must stay consistent with the ops now visible:
/// values of committed pending ops must match once they return, and the
/// real-time order of the node's history must embed into it.
std::optional<Assigned> recheck_prefix(const std::vector<OpInfo>& ops,
                                       const std::vector<InvocationId>& committed,
                                       const ObjectSpec& spec) {
  Assigned a;
  a.state = spec.init_state();
  uint64_t done = 0;
  for (const InvocationId& id : committed) {
    int idx = -1;
    for (size_t i = 0; i < ops.size(); ++i)
      if (ops[i].inv == id) idx = static_cast<int>(i);
    if (idx < 0) return std::nullopt;
    // real-time: everything that returned before this op's call must
    // already be committed
    for (size_t j = 0; j < ops.size(); ++j)
      if (!(done & (1ULL << j)) && static_cast<int>(j) != idx &&
          ops[j].retPos < ops[idx].callPos)
        return std::nullopt;
    auto next = spec.step(a.state, ops[idx].method, ops[idx].arg, ops[idx].inv.proc);
    if (!next) return std::nullopt;
    if (ops[idx].returned && !(next->second == ops[idx].ret)) return std::nullopt;
    a.order.push_back(idx);
    a.state = next->first;
    done |= 1ULL << idx;
  }
  return a;
}

bool solve_strong(int node, const std::vector<InvocationId>& sigma, Hist& hist,
                  const ExecTree& t, StrongCtx& c) {
  // ops visible at this node
  std::vector<OpInfo> ops = collect_ops(hist);
  uint64_t returnedMask = 0;
  for (size_t i = 0; i < ops.size(); ++i)
    if (ops[i].returned) returnedMask |= 1ULL << i;

  auto base = recheck_prefix(ops, sigma, c.spec);
  std::vector<Assigned> candidates;
  if (base) {
    uint64_t doneMask = 0;
    for (int idx : base->order) doneMask |= 1ULL << idx;
    gen_extensions(ops, returnedMask, *base, doneMask, candidates, c);
  }
  if (candidates.empty()) {
    if (node > c.deepestFail) {
      c.deepestFail = node;
      c.deepestHist = hist;
    }
    return false;
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Assigned& a, const Assigned& b) {
                     return a.order.size() < b.order.size();
                   });
  for (const Assigned& cand : candidates) {
    std::vector<InvocationId> sigmaNext;
    for (int idx : cand.order) sigmaNext.push_back(ops[idx].inv);
    bool allKids = true;
    for (int kid : c.kids[node]) {
      auto ev = t.event_of(kid);
      size_t before = hist.size();
      if (ev) {
        hist.push_back(*ev);
        complete_event(hist);
      }
      bool ok = solve_strong(kid, sigmaNext, hist, t, c);
      hist.resize(before);
      if (!ok) {
        allKids = false;
        break;
      }
    }
    if (allKids) return true;
  }
  return false;
}

}  // namespace

StrongResult check_strong_linearizable(const ExecTree& t, const ObjectSpec& spec,
                                       const StrongOptions& opts) {
  auto kids = t.children();
  StrongCtx c{spec, kids, opts, opts.candidateBudget, -1, {}};
  Hist hist;
  StrongResult r;
  r.ok = solve_strong(0, {}, hist, t, c);
  if (!r.ok) {
    r.witnessNode = c.deepestFail;
    r.witnessHist = c.deepestHist;
  }
  return r;
}

bool tree_node_complete(const ExecTree& t, int node, const PreambleMapping& pm) {
  // walk the path, gathering calls, methods, returns and passed sites
  std::vector<int> path;
  for (int n = node; n >= 0; n = t.nodes[n].parent) path.push_back(n);
  std::reverse(path.begin(), path.end());
  std::map<InvocationId, std::string> method;
  std::map<InvocationId, bool> returned, passed;
  std::map<InvocationId, std::set<int>> sites;
  for (int n : path) {
    for (const Step& s : t.nodes[n].steps) {
      if (s.kind == StepKind::Call) method[*s.inv] = s.method;
      if (s.kind == StepKind::Return) returned[*s.inv] = true;
      if (s.inv) sites[*s.inv].insert(s.site);
    }
  }
  for (const auto& [inv, m] : method) {
    int site = pm.site_for(m);
    if (site == SITE_CALL) continue;
    if (site == SITE_RETURN) {
      if (!returned.count(inv)) return false;
      continue;
    }
    if (!sites[inv].count(site)) return false;
  }
  return true;
}

TailResult check_tail_strong(const ExecTree& t, const ObjectSpec& spec, const PreambleMapping& pm,
                             const StrongOptions& opts) {
  TailResult r;
  auto kids = t.children();

  // plain linearizability of every node
  r.plainLinearizable = true;
  {
    Hist hist;
    std::function<bool(int)> walk = [&](int node) {
      auto ev = t.event_of(node);
      size_t before = hist.size();
      if (ev) {
        hist.push_back(*ev);
        complete_event(hist);
        if (!check_linearizable(hist, spec).ok) {
          hist.resize(before);
          return false;
        }
      }
      for (int kid : kids[node])
        if (!walk(kid)) {
          hist.resize(before);
          return false;
        }
      hist.resize(before);
      return true;
    };
    r.plainLinearizable = walk(0);
  }

  // induced tree over complete nodes (the root is vacuously complete)
  std::vector<int> mapTo(t.nodes.size(), -1);
  ExecTree filtered;
  filtered.nodes.push_back({});
  mapTo[0] = 0;
  std::vector<int> nearestComplete(t.nodes.size(), 0);
  for (size_t n = 1; n < t.nodes.size(); ++n) {
    int parent = t.nodes[n].parent;
    int anchor = mapTo[parent] >= 0 ? mapTo[parent] : nearestComplete[parent];
    if (tree_node_complete(t, static_cast<int>(n), pm)) {
      ExecTree::Node fn;
      fn.parent = anchor;
      // fold the skipped incomplete ancestors' steps into this edge so
      // the node's history stays intact
      std::vector<int> chain;
      for (int a = static_cast<int>(n); a >= 0 && mapTo[a] < 0; a = t.nodes[a].parent)
        chain.push_back(a);
      std::reverse(chain.begin(), chain.end());
      for (int a : chain)
        for (const Step& s : t.nodes[a].steps) fn.steps.push_back(s);
      filtered.nodes.push_back(fn);
      mapTo[n] = static_cast<int>(filtered.nodes.size()) - 1;
      nearestComplete[n] = mapTo[n];
    } else {
      nearestComplete[n] = anchor;
    }
  }
  r.filteredNodes = static_cast<int>(filtered.nodes.size());
  r.strongOnFiltered = check_strong_linearizable(filtered, spec, opts);
  r.ok = r.plainLinearizable && r.strongOnFiltered.ok;
  return r;
}

// --------------------------------------------------------------------------
// Canonical ABD linearization

Linearization abd_canonical_linearization(const std::vector<AbdInvInfo>& invs) {
  for (const AbdInvInfo& i : invs)
    if (!i.ts)
      fail(Err::NotComplete, "invocation " + i.inv.str() + " has not passed its query phase");
  std::optional<Timestamp> maxReturned;
  for (const AbdInvInfo& i : invs)
    if (i.returned && (!maxReturned || *maxReturned < *i.ts)) maxReturned = *i.ts;
  std::vector<AbdInvInfo> done;
  for (const AbdInvInfo& i : invs)
    if (maxReturned && (*i.ts < *maxReturned || *i.ts == *maxReturned)) done.push_back(i);
  std::sort(done.begin(), done.end(), [](const AbdInvInfo& a, const AbdInvInfo& b) {
    if (!(*a.ts == *b.ts)) return *a.ts < *b.ts;
    if (a.isWrite != b.isWrite) return a.isWrite;  // write before its reads
    return a.assignSeq < b.assignSeq;
  });
  Linearization lin;
  for (const AbdInvInfo& i : done) {
    LinOp op;
    op.inv = i.inv;
    op.method = i.isWrite ? "write" : "read";
    op.arg = i.arg;
    op.ret = i.isWrite ? Value::unit() : i.readVal;
    lin.push_back(op);
  }
  return lin;
}

Linearization abd_canonical_linearization(const Execution& e) {
  std::vector<AbdInvInfo> invs;
  for (const InvRecord& r : e.invs) {
    AbdInvInfo i;
    i.inv = r.inv;
    i.isWrite = r.method == "write";
    i.arg = r.arg;
    i.ts = r.ts;
    i.returned = r.returned;
    i.readVal = r.returned ? r.ret : Value::bot();
    i.assignSeq = r.preambleEndSeq;
    invs.push_back(i);
  }
  // pending reads carry their decided value once the query assign ran
  for (auto& i : invs) {
    if (!i.isWrite && !i.returned && i.ts && e.stepsRecorded) {
      for (const Step& s : e.steps)
        if (s.inv && *s.inv == i.inv && s.site == ABD_QUERY_ASSIGN) i.readVal = s.value;
    }
  }
  return abd_canonical_linearization(invs);
}

std::vector<AbdInvInfo> abd_invs_at(const ExecTree& t, int node) {
  std::vector<int> path;
  for (int n = node; n >= 0; n = t.nodes[n].parent) path.push_back(n);
  std::reverse(path.begin(), path.end());
  std::vector<AbdInvInfo> invs;
  auto find = [&](const InvocationId& id) -> AbdInvInfo* {
    for (auto& i : invs)
      if (i.inv == id) return &i;
    return nullptr;
  };
  for (int n : path) {
    for (const Step& s : t.nodes[n].steps) {
      if (s.kind == StepKind::Call) {
        AbdInvInfo i;
        i.inv = *s.inv;
        i.isWrite = s.method == "write";
        i.arg = s.arg;
        invs.push_back(i);
      } else if (s.kind == StepKind::Local && s.site == ABD_QUERY_ASSIGN) {
        AbdInvInfo* i = find(*s.inv);
        if (i && !i->ts) {  // first assign fixes the timestamp
          i->ts = i->isWrite ? Timestamp{s.ts.t + 1, s.inv->proc} : s.ts;
          i->readVal = s.value;
          i->assignSeq = s.seq;
        }
      } else if (s.kind == StepKind::Return) {
        AbdInvInfo* i = find(*s.inv);
        if (i) {
          i->returned = true;
          if (!i->isWrite) i->readVal = s.value;
        }
      }
    }
  }
  return invs;
}

}  // namespace blunt
