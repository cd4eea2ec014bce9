#include "blunt/audit.hpp"

#include <map>
#include <set>

#include "blunt/policies.hpp"
#include "blunt/program.hpp"

namespace blunt {

namespace {

struct InvSpan {
  long callSeq = -1;
  long endSeq = -1;  // last step of the declared preamble; -1 = whole method pending
  bool trivial = false;  // empty preamble (initial control point)
};

}  // namespace

AuditFinding audit_execution(const Execution& e, const PreambleMapping& pm) {
  AuditFinding out;
  if (!e.stepsRecorded) {
    out.effectFree = false;
    out.reason = "audit needs a step-recorded execution";
    return out;
  }

  // preamble region per invocation under the declared mapping
  std::map<InvocationId, InvSpan> span;
  for (const InvRecord& r : e.invs) {
    InvSpan v;
    v.callSeq = r.callSeq;
    int site = pm.site_for(r.method);
    if (site == SITE_CALL) {
      v.trivial = true;
      v.endSeq = r.callSeq;
    } else {
      for (const Step& s : e.steps) {
        if (!s.inv || !(*s.inv == r.inv)) continue;
        if (s.site == site || (site == SITE_RETURN && s.kind == StepKind::Return)) {
          v.endSeq = s.seq;
          break;
        }
      }
    }
    span[r.inv] = v;
  }
  auto in_preamble = [&](const InvocationId& inv, long seq) {
    auto it = span.find(inv);
    if (it == span.end()) return false;
    if (it->second.trivial) return false;
    if (seq < it->second.callSeq) return false;
    return it->second.endSeq < 0 || seq <= it->second.endSeq;
  };

  // message provenance: a send made by a preamble step, or by the handler
  // of a preamble-origin message, is preamble-origin
  std::set<int> preambleMsgs;
  std::map<int, int> parentOf;  // msg -> msg it answers
  std::map<int, long> sentAt;
  for (const Step& s : e.steps) {
    if (s.kind != StepKind::Send) continue;
    sentAt[s.msgId] = s.seq;
    if (s.reMsg >= 0) parentOf[s.msgId] = s.reMsg;
    if (s.inv && in_preamble(*s.inv, s.seq)) preambleMsgs.insert(s.msgId);
  }
  auto preamble_origin = [&](int msgId) {
    int m = msgId;
    for (int hops = 0; hops < 8; ++hops) {
      if (preambleMsgs.count(m)) return true;
      auto it = parentOf.find(m);
      if (it == parentOf.end()) return false;
      m = it->second;
    }
    return false;
  };

  for (const Step& s : e.steps) {
    switch (s.kind) {
      case StepKind::Access:
        if (s.inv && in_preamble(*s.inv, s.seq) && s.accessOp != "read") {
          out.effectFree = false;
          out.reason = "base-object write inside the preamble of " + s.inv->str();
          return out;
        }
        break;
      case StepKind::Deliver:
        if (preamble_origin(s.msgId) && s.mutated) {
          out.effectFree = false;
          out.reason = "handler of preamble-origin message " + std::to_string(s.msgId) +
                       " changed server state at p" + std::to_string(s.proc);
          return out;
        }
        break;
      default:
        break;  // local, random, call, return, send: cannot touch other processes
    }
  }
  return out;
}

namespace {

ProgramPtr audit_driver(ObjectKind kind) {
  auto p = std::make_shared<Program>();
  p->name = "audit-driver";
  p->n = 3;
  p->objectInit["O"] = Value::bot();
  if (kind == ObjectKind::Il) {
    // single writer, two readers
    p->procs.push_back({
        Instruction::writeObj("O", Expr::constant(Value::integer(1))),
        Instruction::writeObj("O", Expr::constant(Value::integer(2))),
    });
    p->procs.push_back({Instruction::readObj("a", "O"), Instruction::readObj("b", "O")});
    p->procs.push_back({Instruction::readObj("c", "O")});
  } else {
    p->procs.push_back({
        Instruction::writeObj("O", Expr::constant(Value::integer(1))),
        Instruction::readObj("a", "O"),
    });
    p->procs.push_back({
        Instruction::writeObj("O", Expr::constant(Value::integer(2))),
        Instruction::readObj("b", "O"),
    });
    p->procs.push_back({
        Instruction::readObj("c", "O"),
        Instruction::writeObj("O", Expr::constant(Value::integer(3))),
    });
  }
  p->number_sites();
  return p;
}

}  // namespace

bool audit_effect_free(ObjectKind kind, const ObjectConfig& cfg, const PreambleMapping& pm,
                       int seeds, std::string* whyNot) {
  ProgramPtr prog = audit_driver(kind);
  ObjectConfig use = cfg;
  use.kind = kind;
  Bindings b = uniform_bindings(prog->objectInit, use);
  RunOptions opts;
  opts.recordSteps = true;
  opts.stepBudget = 200000;
  for (int seed = 0; seed < seeds; ++seed) {
    RandomPolicy pol(0xA0D17ULL + seed);
    SeededTape tape(derive_trial_seed(0xA0D17ULL, seed));
    RunResult rr = run(prog, b, pol, tape, opts);
    AuditFinding f = audit_execution(rr.exec, pm);
    if (!f.effectFree) {
      if (whyNot) *whyNot = "seed " + std::to_string(seed) + ": " + f.reason;
      return false;
    }
  }
  return true;
}

}  // namespace blunt
