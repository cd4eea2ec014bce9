// Test-only reduction: rewrite a recorded ABD^k execution into a
// directive script for the untransformed object by deleting the k-1
// unused query iterations of every invocation and the pick steps, with
// phase sequence numbers renumbered. Replaying the script must
// reproduce the identical history.
#pragma once

#include <map>
#include <set>
#include <vector>

#include "blunt/engine.hpp"

namespace blunt::testsupport {

struct ReducedRun {
  std::vector<Directive> script;
  std::vector<FixedTape::Entry> programTape;
};

inline ReducedRun reduce_abdk_execution(const Execution& e) {
  if (!e.stepsRecorded) fail(Err::Internal, "reduction needs recorded steps");
  ReducedRun out;

  // phase key: (client, object, original sn)
  using Phase = std::tuple<int, std::string, int>;
  std::set<Phase> dropped;
  std::map<Phase, int> remap;
  std::map<std::pair<int, std::string>, int> nextSn;

  // classify client phases in broadcast order
  std::map<InvocationId, int> queryIndex;
  for (const Step& s : e.steps) {
    if (s.kind != StepKind::Send || s.reMsg >= 0) continue;  // client broadcasts only
    if (s.tag != MsgTag::Query && s.tag != MsgTag::Update) continue;
    // one burst = n sends; handle the first send of the burst only
    Phase key{s.proc, s.object, s.sn};
    if (dropped.count(key) || remap.count(key)) continue;
    bool drop = false;
    if (s.tag == MsgTag::Query && s.inv) {
      const InvRecord* r = e.find(*s.inv);
      if (r && r->chosenIter >= 1) {
        int idx = ++queryIndex[*s.inv];
        drop = idx != r->chosenIter;
      }
    }
    if (drop) {
      dropped.insert(key);
    } else {
      int sn = ++nextSn[{s.proc, s.object}];
      remap[key] = sn;
    }
  }

  auto phase_of_deliver = [&](const Step& s) -> Phase {
    int client = (s.tag == MsgTag::Query || s.tag == MsgTag::Update) ? s.peer : s.proc;
    return Phase{client, s.object, s.sn};
  };

  for (size_t i = 0; i < e.steps.size();) {
    const Step& s = e.steps[i];
    switch (s.kind) {
      case StepKind::Deliver: {
        Phase key = phase_of_deliver(s);
        size_t next = i + 1;  // skip the handler's send, if any
        if (next < e.steps.size() && e.steps[next].kind == StepKind::Send &&
            e.steps[next].reMsg >= 0)
          ++next;
        if (!dropped.count(key))
          out.script.push_back(
              Directive::match(s.proc, s.object, s.tag, s.peer, remap.at(key)));
        i = next;
        break;
      }
      case StepKind::Send: {
        // client broadcast burst: one directive covering n sends
        Phase key{s.proc, s.object, s.sn};
        size_t next = i;
        while (next < e.steps.size() && e.steps[next].kind == StepKind::Send &&
               e.steps[next].proc == s.proc && e.steps[next].sn == s.sn &&
               e.steps[next].reMsg < 0)
          ++next;
        if (!dropped.count(key)) out.script.push_back(Directive::step(s.proc));
        i = next;
        break;
      }
      case StepKind::Random:
        if (s.origin == RandomOrigin::Object) {
          ++i;  // the pick disappears with the unused iterations
        } else {
          out.programTape.push_back({s.value, RandomOrigin::Program});
          out.script.push_back(Directive::step(s.proc));
          ++i;
        }
        break;
      case StepKind::Local: {
        // drop the query assignments of removed iterations
        bool drop = false;
        if (s.site == ABD_QUERY_ASSIGN && s.inv) {
          const InvRecord* r = e.find(*s.inv);
          if (r && r->chosenIter >= 1) {
            // which iteration does this assign close? count prior assigns
            int idx = 0;
            for (size_t j = 0; j <= i; ++j)
              if (e.steps[j].kind == StepKind::Local && e.steps[j].site == ABD_QUERY_ASSIGN &&
                  e.steps[j].inv && *e.steps[j].inv == *s.inv)
                ++idx;
            drop = idx != r->chosenIter;
          }
        }
        if (!drop) out.script.push_back(Directive::step(s.proc));
        ++i;
        break;
      }
      default:
        out.script.push_back(Directive::step(s.proc));
        ++i;
        break;
    }
  }
  return out;
}

}  // namespace blunt::testsupport
