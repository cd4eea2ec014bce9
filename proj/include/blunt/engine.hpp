#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "blunt/execution.hpp"
#include "blunt/network.hpp"
#include "blunt/objects.hpp"
#include "blunt/program.hpp"
#include "blunt/tape.hpp"

namespace blunt {

// --------------------------------------------------------------------------
// Method frames: explicit state machines so engine states are plain
// copyable values (the searches copy and digest them constantly).

/// Double-collect scan; also runs embedded inside snapshot Update.
struct ScanMachine {
  int idx = 0;
  std::vector<SnapCell> cur, prev;
  bool havePrev = false;
  std::vector<int> moved;
  bool done = false;
  std::vector<Value> result;

  void reset(int n) {
    idx = 0;
    cur.clear();
    prev.clear();
    havePrev = false;
    moved.assign(n, 0);
    done = false;
    result.clear();
  }
};

enum class Stage {
  AbdQueryBroadcast,
  AbdQueryCollect,
  Pick,
  AbdUpdateBroadcast,
  AbdUpdateCollect,
  SnapScan,
  SnapWrite,
  VaCollect,
  VaDecide,
  VaWrite,
  IlReadVal,
  IlReadReport,
  IlDecide,
  IlWriteReport,
  IlWriteVal,
  Ret,
};

struct Frame {
  InvocationId inv;
  std::string object;
  std::string method;  // read | write | scan | update
  std::string intoVar;
  Value arg;
  ObjectKind kind = ObjectKind::Abd;
  int iterTotal = 1;
  bool transformed = false;
  int iter = 1;
  Stage stage = Stage::AbdQueryBroadcast;
  long spanStart = -1;  // open preamble-iteration span

  // abd
  int sn = 0;
  std::vector<std::pair<Value, Timestamp>> replies;
  int acks = 0;
  std::vector<std::pair<Value, Timestamp>> qResults;  // per-iteration query result
  Value chosenVal;
  Timestamp chosenTs;

  // snapshot
  ScanMachine scan;
  std::vector<std::vector<Value>> scanResults;
  std::vector<Value> snapChosen;

  // va / il
  int cellIdx = 0;
  std::vector<std::pair<Value, Timestamp>> collected;
  IlCell ilBest;
  std::vector<IlCell> ilResults;
  IlCell ilChosen;
  long ilSeq = 0;
};

/// Program counter into (possibly nested) instruction lists. The path
/// alternates instruction index and branch selector.
struct PC {
  std::vector<int> path{0};
};

struct ProcState {
  ProcStatus status = ProcStatus::Running;
  PC pc;
  std::map<std::string, Value> locals;
  std::optional<Frame> frame;
  std::map<int, int> siteOcc;
};

struct EngineState {
  ProgramPtr program;
  std::map<std::string, ObjectState> objects;
  std::vector<ProcState> procs;
  Network net;
  long stepSeq = 0;
  long directiveCount = 0;
  int programRandomCount = 0;
  int objectRandomCount = 0;
  std::vector<std::pair<RandomOrigin, Value>> observed;
  std::vector<InvRecord> invs;
  std::vector<long> programRandomSeqs;

  // Partial-order-reduction context: destination of the last directive
  // when it was a delivery, and the message-id floor separating messages
  // that existed before it. Part of the state so memoization stays sound.
  int porLastDeliverDest = -1;
  int porIdFloor = 0;

  bool all_terminal() const {
    for (const auto& p : procs)
      if (p.status == ProcStatus::Running) return false;
    return true;
  }
  InvRecord& inv_record(const InvocationId& id);
  const ObjectState& object(const std::string& name) const;
  ObjectState& object(const std::string& name);
};

struct Directive {
  enum class Kind { StepProc, Deliver, DeliverMatch };
  Kind kind = Kind::StepProc;
  int proc = -1;  // StepProc: process to step; Deliver*: destination
  int msgId = -1;
  // DeliverMatch pattern; sn < 0 matches any
  std::string object;
  MsgTag tag = MsgTag::Query;
  int sender = -1;
  int sn = -1;

  static Directive step(int p) {
    Directive d;
    d.kind = Kind::StepProc;
    d.proc = p;
    return d;
  }
  static Directive deliver(int dest, int msgId) {
    Directive d;
    d.kind = Kind::Deliver;
    d.proc = dest;
    d.msgId = msgId;
    return d;
  }
  static Directive match(int dest, std::string object, MsgTag tag, int sender, int sn = -1) {
    Directive d;
    d.kind = Kind::DeliverMatch;
    d.proc = dest;
    d.object = std::move(object);
    d.tag = tag;
    d.sender = sender;
    d.sn = sn;
    return d;
  }
  std::string str() const;
};

class StepSink {
 public:
  virtual ~StepSink() = default;
  virtual void emit(const Step&) {}
};

EngineState init_state(ProgramPtr program, const Bindings& bindings);

/// True iff Step(p) is currently executable: p is running and not
/// awaiting a quorum. Blocked processes are unschedulable; directing
/// them is an error, not a no-op.
bool step_ready(const EngineState& s, int p);

/// Canonically ordered legal directives: Step(0..n-1) then deliveries in
/// in-flight order. With `por`, deliveries that commute with the
/// immediately preceding delivery are kept in ascending-destination
/// order only.
std::vector<Directive> legal_directives(const EngineState& s, bool por = false);

/// Resolves DeliverMatch patterns to a concrete message and checks
/// legality; throws PolicyIllegalDirective otherwise.
Directive resolve_directive(const EngineState& s, const Directive& d);

/// Domain the directive is about to sample from, if any.
std::optional<std::pair<std::vector<Value>, RandomOrigin>> sample_domain(const EngineState& s,
                                                                         const Directive& d);

/// Executes one resolved directive. `tape` may be null only if the
/// directive does not sample.
void apply(EngineState& s, const Directive& d, TapeSource* tape, StepSink* sink);

// --------------------------------------------------------------------------
// Adversary policies: deterministic decision functions from the
// execution state (which carries the observed-randomness prefix).

class AdversaryPolicy {
 public:
  virtual ~AdversaryPolicy() = default;
  virtual Directive next(const EngineState& s) = 0;
  virtual std::unique_ptr<AdversaryPolicy> clone() const = 0;
  virtual std::string name() const = 0;
};

struct RunOptions {
  long stepBudget = 1000000;
  bool recordSteps = false;
};

struct RunResult {
  Execution exec;
  EngineState finalState;
  std::vector<Directive> directives;
};

/// Deterministic step machine: identical inputs yield byte-identical
/// executions. Halts when every process is terminal.
RunResult run(ProgramPtr program, const Bindings& bindings, AdversaryPolicy& policy,
              TapeSource& tape, const RunOptions& opts = {});

/// True iff every invocation in e has a step at its preamble-end control
/// point. Requires a step-recorded execution for non-trivial mappings.
bool is_complete_wrt(const Execution& e, const PreambleMapping& pm);

// --------------------------------------------------------------------------
// Canonical state encoding, used as the memoization key of the searches.

struct Digest {
  uint64_t a = 0, b = 0;
  bool operator==(const Digest& o) const { return a == o.a && b == o.b; }
};

struct DigestHash {
  size_t operator()(const Digest& d) const { return d.a ^ (d.b * 0x9E3779B97F4A7C15ULL); }
};

void encode_state(const EngineState& s, std::string& out);
Digest digest_state(const EngineState& s);

}  // namespace blunt
