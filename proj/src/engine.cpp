#include "blunt/engine.hpp"

#include <algorithm>
#include <cassert>

#include "blunt/errors.hpp"

namespace blunt {

std::string Directive::str() const {
  switch (kind) {
    case Kind::StepProc:
      return "step(p" + std::to_string(proc) + ")";
    case Kind::Deliver:
      return "deliver(p" + std::to_string(proc) + ", m" + std::to_string(msgId) + ")";
    case Kind::DeliverMatch:
      return "deliver(p" + std::to_string(proc) + ", " + object + "/" + tag_name(tag) + " from p" +
             std::to_string(sender) + (sn >= 0 ? " sn " + std::to_string(sn) : "") + ")";
  }
  return "?";
}

InvRecord& EngineState::inv_record(const InvocationId& id) {
  for (auto& r : invs)
    if (r.inv == id) return r;
  fail(Err::Internal, "missing invocation record " + id.str());
}

const ObjectState& EngineState::object(const std::string& name) const {
  auto it = objects.find(name);
  if (it == objects.end()) fail(Err::Internal, "unbound object " + name);
  return it->second;
}

ObjectState& EngineState::object(const std::string& name) {
  auto it = objects.find(name);
  if (it == objects.end()) fail(Err::Internal, "unbound object " + name);
  return it->second;
}

EngineState init_state(ProgramPtr program, const Bindings& bindings) {
  EngineState s;
  s.program = std::move(program);
  s.procs.resize(s.program->n);
  for (int p = 0; p < s.program->n; ++p)
    if (s.program->procs[p].empty()) s.procs[p].status = ProcStatus::Terminated;
  for (const auto& [name, init] : s.program->objectInit) {
    auto it = bindings.find(name);
    if (it == bindings.end()) fail(Err::WrongConfiguration, "no binding for object " + name);
    it->second.validate();
    s.objects[name] = ObjectState::init(it->second, init, s.program->n);
  }
  return s;
}

// --------------------------------------------------------------------------
// Program counter navigation

static const std::vector<Instruction>* block_at(const Program& prog, int proc,
                                                const std::vector<int>& path, size_t depth) {
  const std::vector<Instruction>* block = &prog.procs[proc];
  for (size_t i = 0; i + 1 < depth; i += 2) {
    const Instruction& ins = (*block)[path[i]];
    block = path[i + 1] == 0 ? &ins.thenBranch : &ins.elseBranch;
  }
  return block;
}

static const Instruction* current_instruction(const EngineState& s, int proc) {
  const ProcState& p = s.procs[proc];
  if (p.status != ProcStatus::Running) return nullptr;
  const auto& path = p.pc.path;
  const std::vector<Instruction>* block = block_at(*s.program, proc, path, path.size());
  int idx = path.back();
  if (idx >= static_cast<int>(block->size())) return nullptr;
  return &(*block)[idx];
}

/// Moves past the instruction at pc; falls out of exhausted branches and
/// terminates the process at the end of its top-level list.
static void advance_pc(EngineState& s, int proc) {
  ProcState& p = s.procs[proc];
  auto& path = p.pc.path;
  for (;;) {
    path.back() += 1;
    const std::vector<Instruction>* block = block_at(*s.program, proc, path, path.size());
    if (path.back() < static_cast<int>(block->size())) return;
    if (path.size() == 1) {
      p.status = ProcStatus::Terminated;
      return;
    }
    path.pop_back();  // branch selector
    // retry the parent level, advancing past the If itself
  }
}

static void enter_branch(EngineState& s, int proc, int selector) {
  ProcState& p = s.procs[proc];
  p.pc.path.push_back(selector);
  p.pc.path.push_back(0);
  const std::vector<int>& path = p.pc.path;
  const std::vector<Instruction>* block = block_at(*s.program, proc, path, path.size());
  if (block->empty()) {  // empty branch: fall through
    p.pc.path.pop_back();
    p.pc.path.pop_back();
    advance_pc(s, proc);
  }
}

// --------------------------------------------------------------------------
// Readiness and directive enumeration

static int quorum(int n) { return n / 2 + 1; }

bool step_ready(const EngineState& s, int p) {
  const ProcState& ps = s.procs[p];
  if (ps.status != ProcStatus::Running) return false;
  if (!ps.frame) return current_instruction(s, p) != nullptr;
  const Frame& f = *ps.frame;
  int n = s.program->n;
  switch (f.stage) {
    case Stage::AbdQueryCollect:
      return static_cast<int>(f.replies.size()) >= quorum(n);
    case Stage::AbdUpdateCollect:
      return f.acks >= quorum(n);
    default:
      return true;
  }
}

std::vector<Directive> legal_directives(const EngineState& s, bool por) {
  std::vector<Directive> out;
  int skipped = 0;
  for (int p = 0; p < s.program->n; ++p)
    if (step_ready(s, p)) out.push_back(Directive::step(p));
  for (const Message& m : s.net.inFlight) {
    if (por && s.porLastDeliverDest >= 0 && m.dest < s.porLastDeliverDest &&
        m.id < s.porIdFloor) {
      // commutes with the previous delivery; the ascending order is the
      // canonical representative of this pair
      ++skipped;
      continue;
    }
    out.push_back(Directive::deliver(m.dest, m.id));
  }
  if (out.empty() && skipped > 0) return legal_directives(s, false);
  return out;
}

Directive resolve_directive(const EngineState& s, const Directive& d) {
  switch (d.kind) {
    case Directive::Kind::StepProc:
      if (d.proc < 0 || d.proc >= s.program->n)
        fail(Err::PolicyIllegalDirective, "no such process in " + d.str());
      if (!step_ready(s, d.proc))
        fail(Err::PolicyIllegalDirective, d.str() + " targets an unschedulable process");
      return d;
    case Directive::Kind::Deliver: {
      const Message* m = s.net.find(d.msgId);
      if (!m || m->dest != d.proc)
        fail(Err::PolicyIllegalDirective, d.str() + " does not name an in-flight message");
      return d;
    }
    case Directive::Kind::DeliverMatch: {
      int found = -1, count = 0;
      for (const Message& m : s.net.inFlight) {
        if (m.dest != d.proc || m.object != d.object || m.tag != d.tag || m.sender != d.sender)
          continue;
        if (d.sn >= 0 && m.sn != d.sn) continue;
        found = m.id;
        ++count;
      }
      if (count == 0) fail(Err::PolicyIllegalDirective, d.str() + " matches no in-flight message");
      if (count > 1) fail(Err::PolicyIllegalDirective, d.str() + " is ambiguous");
      return Directive::deliver(d.proc, found);
    }
  }
  fail(Err::Internal, "unreachable");
}

// --------------------------------------------------------------------------
// Sampling prediction

std::optional<std::pair<std::vector<Value>, RandomOrigin>> sample_domain(const EngineState& s,
                                                                         const Directive& d) {
  if (d.kind != Directive::Kind::StepProc) return std::nullopt;
  const ProcState& ps = s.procs[d.proc];
  if (ps.frame) {
    if (ps.frame->stage == Stage::Pick) {
      std::vector<Value> dom;
      for (int i = 1; i <= ps.frame->iterTotal; ++i) dom.push_back(Value::integer(i));
      return std::make_pair(dom, RandomOrigin::Object);
    }
    return std::nullopt;
  }
  const Instruction* ins = current_instruction(s, d.proc);
  if (ins && ins->kind == Instruction::Kind::Random)
    return std::make_pair(ins->domain, RandomOrigin::Program);
  return std::nullopt;
}

// --------------------------------------------------------------------------
// Step execution

namespace {

struct Emitter {
  EngineState& s;
  StepSink* sink;

  long emit(Step&& st) {
    st.seq = s.stepSeq++;
    if (sink) sink->emit(st);
    return st.seq;
  }

  Step base(int proc, StepKind kind, int site) {
    Step st;
    st.proc = proc;
    st.kind = kind;
    st.site = site;
    return st;
  }
};

const char* kMethodRead = "read";
const char* kMethodWrite = "write";

std::string method_for(ObjectKind kind, bool isWrite) {
  if (kind == ObjectKind::Snapshot) return isWrite ? "update" : "scan";
  return isWrite ? kMethodWrite : kMethodRead;
}

std::pair<Value, Timestamp> max_reply(const std::vector<std::pair<Value, Timestamp>>& replies) {
  const std::pair<Value, Timestamp>* best = &replies.front();
  for (const auto& r : replies) {
    if (best->second < r.second) best = &r;
    else if (r.second == best->second && !(r.first == best->first))
      fail(Err::Internal, "distinct values under one timestamp");
  }
  return *best;
}

}  // namespace

static void open_span(Frame& f, long seq) {
  if (f.spanStart < 0) f.spanStart = seq;
}

static void close_span(EngineState& s, Frame& f, long seq) {
  InvRecord& r = s.inv_record(f.inv);
  r.iterSpans.push_back({f.spanStart >= 0 ? f.spanStart : seq, seq});
  f.spanStart = -1;
}

static void mark_preamble_end(EngineState& s, Frame& f, long seq) {
  InvRecord& r = s.inv_record(f.inv);
  if (r.preambleEndSeq < 0) r.preambleEndSeq = seq;
}

static Value draw(EngineState& s, Emitter& em, TapeSource* tape, const std::vector<Value>& domain,
                  RandomOrigin origin, int proc, int site,
                  const std::optional<InvocationId>& inv) {
  if (!tape) fail(Err::Internal, "random step reached without a tape");
  Value v = tape->draw(domain, origin);
  Step st = em.base(proc, StepKind::Random, site);
  st.inv = inv;
  st.domain = domain;
  st.value = v;
  st.origin = origin;
  long seq = em.emit(std::move(st));
  s.observed.push_back({origin, v});
  if (origin == RandomOrigin::Program) {
    s.programRandomCount += 1;
    s.programRandomSeqs.push_back(seq);
  } else {
    s.objectRandomCount += 1;
  }
  return v;
}

static void finish_return(EngineState& s, Emitter& em, int proc, Value retVal) {
  ProcState& ps = s.procs[proc];
  Frame f = *ps.frame;
  Step st = em.base(proc, StepKind::Return, SITE_RETURN);
  st.inv = f.inv;
  st.value = retVal;
  long seq = em.emit(std::move(st));
  InvRecord& r = s.inv_record(f.inv);
  r.returned = true;
  r.ret = retVal;
  r.retSeq = seq;
  if (!f.intoVar.empty()) ps.locals[f.intoVar] = retVal;
  ps.frame.reset();
  advance_pc(s, proc);
}

// ---- ABD ------------------------------------------------------------------

static void abd_step(EngineState& s, Emitter& em, int proc, TapeSource* tape) {
  ProcState& ps = s.procs[proc];
  Frame& f = *ps.frame;
  ObjectState& obj = s.object(f.object);
  int n = s.program->n;
  switch (f.stage) {
    case Stage::AbdQueryBroadcast: {
      f.sn = ++obj.abd.sn[proc];
      f.replies.clear();
      for (int d = 0; d < n; ++d) {
        int id = s.net.send(proc, d, f.object, MsgTag::Query, f.sn, Value::bot(), Timestamp{}, -1);
        Step st = em.base(proc, StepKind::Send, ABD_QUERY_BROADCAST);
        st.inv = f.inv;
        st.msgId = id;
        st.peer = d;
        st.tag = MsgTag::Query;
        st.object = f.object;
        st.sn = f.sn;
        long seq = em.emit(std::move(st));
        open_span(f, seq);
      }
      f.stage = Stage::AbdQueryCollect;
      return;
    }
    case Stage::AbdQueryCollect: {
      // quorum reached: assign the reply pair with the largest timestamp
      auto best = max_reply(f.replies);
      f.qResults.push_back(best);
      Step st = em.base(proc, StepKind::Local, ABD_QUERY_ASSIGN);
      st.inv = f.inv;
      st.value = best.first;
      st.ts = best.second;
      long seq = em.emit(std::move(st));
      close_span(s, f, seq);
      mark_preamble_end(s, f, seq);
      if (f.iter < f.iterTotal) {
        f.iter += 1;
        f.stage = Stage::AbdQueryBroadcast;
        return;
      }
      if (f.transformed) {
        f.stage = Stage::Pick;
        return;
      }
      f.chosenVal = f.qResults[0].first;
      f.chosenTs = f.qResults[0].second;
      InvRecord& r = s.inv_record(f.inv);
      r.ts = f.method == kMethodWrite ? Timestamp{f.chosenTs.t + 1, proc} : f.chosenTs;
      f.stage = Stage::AbdUpdateBroadcast;
      return;
    }
    case Stage::Pick: {
      std::vector<Value> dom;
      for (int i = 1; i <= f.iterTotal; ++i) dom.push_back(Value::integer(i));
      Value v = draw(s, em, tape, dom, RandomOrigin::Object, proc, ABD_PICK, f.inv);
      int j = static_cast<int>(v.num);
      InvRecord& r = s.inv_record(f.inv);
      if (r.iterSpans.empty())  // empty preamble: degenerate spans
        r.iterSpans.assign(f.iterTotal, {r.callSeq, r.callSeq});
      r.chosenIter = j;
      f.chosenVal = f.qResults[j - 1].first;
      f.chosenTs = f.qResults[j - 1].second;
      r.ts = f.method == kMethodWrite ? Timestamp{f.chosenTs.t + 1, proc} : f.chosenTs;
      f.stage = Stage::AbdUpdateBroadcast;
      return;
    }
    case Stage::AbdUpdateBroadcast: {
      f.sn = ++obj.abd.sn[proc];
      f.acks = 0;
      Value v = f.method == kMethodWrite ? f.arg : f.chosenVal;
      Timestamp u = f.method == kMethodWrite ? Timestamp{f.chosenTs.t + 1, proc} : f.chosenTs;
      for (int d = 0; d < n; ++d) {
        int id = s.net.send(proc, d, f.object, MsgTag::Update, f.sn, v, u, -1);
        Step st = em.base(proc, StepKind::Send, ABD_UPDATE_BROADCAST);
        st.inv = f.inv;
        st.msgId = id;
        st.peer = d;
        st.tag = MsgTag::Update;
        st.object = f.object;
        st.sn = f.sn;
        st.value = v;
        st.ts = u;
        em.emit(std::move(st));
      }
      f.stage = Stage::AbdUpdateCollect;
      return;
    }
    case Stage::AbdUpdateCollect:
      finish_return(s, em, proc, f.method == kMethodWrite ? Value::unit() : f.chosenVal);
      return;
    default:
      fail(Err::Internal, "bad abd stage");
  }
}

// ---- Snapshot ---------------------------------------------------------------

static void snap_scan_step(EngineState& s, Emitter& em, int proc) {
  ProcState& ps = s.procs[proc];
  Frame& f = *ps.frame;
  ObjectState& obj = s.object(f.object);
  auto& cells = obj.snap.cells;
  int n = s.program->n;
  ScanMachine& sm = f.scan;
  if (sm.idx < n) {
    const SnapCell& c = cells[sm.idx];
    Step st = em.base(proc, StepKind::Access, SNAP_COLLECT_READ);
    st.inv = f.inv;
    st.object = f.object;
    st.accessOp = "read";
    st.reg = "cell";
    st.regI = sm.idx;
    st.value = c.val;
    long seq = em.emit(std::move(st));
    open_span(f, seq);
    sm.cur.push_back(c);
    sm.idx += 1;
    return;
  }
  // compare step after a full collect
  bool finished = false;
  std::vector<Value> result;
  if (sm.havePrev) {
    bool equal = true;
    for (int j = 0; j < n; ++j)
      if (sm.cur[j].seq != sm.prev[j].seq) equal = false;
    if (equal) {
      finished = true;
      for (int j = 0; j < n; ++j) result.push_back(sm.cur[j].val);
    } else {
      for (int j = 0; j < n && !finished; ++j) {
        if (sm.cur[j].seq != sm.prev[j].seq) {
          sm.moved[j] += 1;
          if (sm.moved[j] >= 2) {
            // j completed two updates during this scan: borrow its
            // embedded snapshot
            finished = true;
            result = sm.cur[j].snap;
          }
        }
      }
    }
  }
  Step st = em.base(proc, StepKind::Local, finished ? SNAP_DECIDE : SNAP_COMPARE);
  st.inv = f.inv;
  long seq = em.emit(std::move(st));
  if (!finished) {
    sm.prev = sm.cur;
    sm.havePrev = true;
    sm.cur.clear();
    sm.idx = 0;
    return;
  }
  sm.done = true;
  sm.result = result;
  close_span(s, f, seq);
  bool preambleIteration = f.method == "scan" || obj.cfg.extendedUpdatePreamble;
  if (preambleIteration) mark_preamble_end(s, f, seq);
  if (f.method == "scan") {
    f.scanResults.push_back(result);
    if (f.iter < f.iterTotal) {
      f.iter += 1;
      sm.reset(n);
      f.stage = Stage::SnapScan;
      return;
    }
    if (f.transformed) {
      f.stage = Stage::Pick;
      return;
    }
    f.snapChosen = f.scanResults[0];
    f.stage = Stage::Ret;
    return;
  }
  // update's embedded scan
  if (obj.cfg.extendedUpdatePreamble && f.transformed) {
    f.scanResults.push_back(result);
    if (f.iter < f.iterTotal) {
      f.iter += 1;
      sm.reset(n);
      return;
    }
    f.stage = Stage::Pick;
    return;
  }
  f.snapChosen = result;
  f.stage = Stage::SnapWrite;
}

static void snap_step(EngineState& s, Emitter& em, int proc, TapeSource* tape) {
  ProcState& ps = s.procs[proc];
  Frame& f = *ps.frame;
  ObjectState& obj = s.object(f.object);
  switch (f.stage) {
    case Stage::SnapScan:
      snap_scan_step(s, em, proc);
      return;
    case Stage::Pick: {
      std::vector<Value> dom;
      for (int i = 1; i <= f.iterTotal; ++i) dom.push_back(Value::integer(i));
      Value v = draw(s, em, tape, dom, RandomOrigin::Object, proc,
                     f.kind == ObjectKind::Snapshot ? SNAP_PICK : ABD_PICK, f.inv);
      int j = static_cast<int>(v.num);
      InvRecord& r = s.inv_record(f.inv);
      if (r.iterSpans.empty()) r.iterSpans.assign(f.iterTotal, {r.callSeq, r.callSeq});
      r.chosenIter = j;
      if (f.method == "scan") {
        f.snapChosen = f.scanResults[j - 1];
        f.stage = Stage::Ret;
        return;
      }
      if (obj.cfg.extendedUpdatePreamble && !f.scanResults.empty()) {
        f.snapChosen = f.scanResults[j - 1];
        f.stage = Stage::SnapWrite;
        return;
      }
      // empty update preamble: the tail recomputes the embedded scan
      f.scan.reset(s.program->n);
      f.stage = Stage::SnapScan;
      return;
    }
    case Stage::SnapWrite: {
      SnapCell& cell = obj.snap.cells[proc];
      cell.val = f.arg;
      cell.seq += 1;
      cell.snap = f.snapChosen;
      Step st = em.base(proc, StepKind::Access, SNAP_WRITE);
      st.inv = f.inv;
      st.object = f.object;
      st.accessOp = "write";
      st.reg = "cell";
      st.regI = proc;
      st.value = f.arg;
      em.emit(std::move(st));
      f.stage = Stage::Ret;
      return;
    }
    case Stage::Ret:
      finish_return(s, em, proc,
                    f.method == "scan" ? Value::vec(f.snapChosen) : Value::unit());
      return;
    default:
      fail(Err::Internal, "bad snapshot stage");
  }
}

// ---- Vitanyi-Awerbuch -------------------------------------------------------

static void va_step(EngineState& s, Emitter& em, int proc, TapeSource* tape) {
  ProcState& ps = s.procs[proc];
  Frame& f = *ps.frame;
  ObjectState& obj = s.object(f.object);
  int n = s.program->n;
  switch (f.stage) {
    case Stage::VaCollect: {
      const VaCell& c = obj.va.val[f.cellIdx];
      Step st = em.base(proc, StepKind::Access, VA_COLLECT);
      st.inv = f.inv;
      st.object = f.object;
      st.accessOp = "read";
      st.reg = "val";
      st.regI = f.cellIdx;
      st.value = c.val;
      long seq = em.emit(std::move(st));
      open_span(f, seq);
      f.collected.push_back({c.val, c.ts});
      f.cellIdx += 1;
      if (f.cellIdx == n) f.stage = Stage::VaDecide;
      return;
    }
    case Stage::VaDecide: {
      bool isWrite = f.method == kMethodWrite;
      std::pair<Value, Timestamp> result;
      if (isWrite) {
        long long maxT = 0;
        for (const auto& [_, ts] : f.collected) maxT = std::max(maxT, ts.t);
        result = {f.arg, Timestamp{maxT + 1, proc}};
      } else {
        result = f.collected.front();
        for (const auto& p : f.collected)
          if (result.second < p.second) result = p;
      }
      f.qResults.push_back(result);
      Step st = em.base(proc, StepKind::Local, isWrite ? VA_WRITE_DECIDE : VA_READ_DECIDE);
      st.inv = f.inv;
      st.value = result.first;
      st.ts = result.second;
      long seq = em.emit(std::move(st));
      close_span(s, f, seq);
      mark_preamble_end(s, f, seq);
      if (f.iter < f.iterTotal) {
        f.iter += 1;
        f.collected.clear();
        f.cellIdx = 0;
        f.stage = Stage::VaCollect;
        return;
      }
      if (f.transformed) {
        f.stage = Stage::Pick;
        return;
      }
      f.chosenVal = result.first;
      f.chosenTs = result.second;
      s.inv_record(f.inv).ts = result.second;
      f.stage = isWrite ? Stage::VaWrite : Stage::Ret;
      return;
    }
    case Stage::Pick: {
      std::vector<Value> dom;
      for (int i = 1; i <= f.iterTotal; ++i) dom.push_back(Value::integer(i));
      Value v = draw(s, em, tape, dom, RandomOrigin::Object, proc, VA_PICK, f.inv);
      int j = static_cast<int>(v.num);
      InvRecord& r = s.inv_record(f.inv);
      if (r.iterSpans.empty()) r.iterSpans.assign(f.iterTotal, {r.callSeq, r.callSeq});
      r.chosenIter = j;
      f.chosenVal = f.qResults[j - 1].first;
      f.chosenTs = f.qResults[j - 1].second;
      r.ts = f.chosenTs;
      f.stage = f.method == kMethodWrite ? Stage::VaWrite : Stage::Ret;
      return;
    }
    case Stage::VaWrite: {
      obj.va.val[proc] = VaCell{f.chosenVal, f.chosenTs};
      Step st = em.base(proc, StepKind::Access, VA_WRITE);
      st.inv = f.inv;
      st.object = f.object;
      st.accessOp = "write";
      st.reg = "val";
      st.regI = proc;
      st.value = f.chosenVal;
      em.emit(std::move(st));
      f.stage = Stage::Ret;
      return;
    }
    case Stage::Ret:
      finish_return(s, em, proc, f.method == kMethodWrite ? Value::unit() : f.chosenVal);
      return;
    default:
      fail(Err::Internal, "bad va stage");
  }
}

// ---- Israeli-Li -------------------------------------------------------------

static void il_step(EngineState& s, Emitter& em, int proc, TapeSource* tape) {
  ProcState& ps = s.procs[proc];
  Frame& f = *ps.frame;
  ObjectState& obj = s.object(f.object);
  int n = s.program->n;
  switch (f.stage) {
    case Stage::IlReadVal: {
      const IlCell& c = obj.il.val[proc];
      Step st = em.base(proc, StepKind::Access, IL_READ_VAL);
      st.inv = f.inv;
      st.object = f.object;
      st.accessOp = "read";
      st.reg = "val";
      st.regI = proc;
      st.value = c.val;
      long seq = em.emit(std::move(st));
      open_span(f, seq);
      f.ilBest = c;
      f.cellIdx = 0;
      f.stage = Stage::IlReadReport;
      return;
    }
    case Stage::IlReadReport: {
      const IlCell& c = obj.il.report[f.cellIdx][proc];
      Step st = em.base(proc, StepKind::Access, IL_READ_REPORT);
      st.inv = f.inv;
      st.object = f.object;
      st.accessOp = "read";
      st.reg = "report";
      st.regI = f.cellIdx;
      st.regJ = proc;
      st.value = c.val;
      em.emit(std::move(st));
      if (c.seq > f.ilBest.seq) f.ilBest = c;
      f.cellIdx += 1;
      if (f.cellIdx == n) f.stage = Stage::IlDecide;
      return;
    }
    case Stage::IlDecide: {
      f.ilResults.push_back(f.ilBest);
      Step st = em.base(proc, StepKind::Local, IL_DECIDE);
      st.inv = f.inv;
      st.value = f.ilBest.val;
      long seq = em.emit(std::move(st));
      close_span(s, f, seq);
      mark_preamble_end(s, f, seq);
      if (f.iter < f.iterTotal) {
        f.iter += 1;
        f.stage = Stage::IlReadVal;
        return;
      }
      if (f.transformed) {
        f.stage = Stage::Pick;
        return;
      }
      f.ilChosen = f.ilResults[0];
      f.cellIdx = 0;
      f.stage = Stage::IlWriteReport;
      return;
    }
    case Stage::Pick: {
      std::vector<Value> dom;
      for (int i = 1; i <= f.iterTotal; ++i) dom.push_back(Value::integer(i));
      Value v = draw(s, em, tape, dom, RandomOrigin::Object, proc, IL_PICK, f.inv);
      int j = static_cast<int>(v.num);
      InvRecord& r = s.inv_record(f.inv);
      if (r.iterSpans.empty()) r.iterSpans.assign(f.iterTotal, {r.callSeq, r.callSeq});
      r.chosenIter = j;
      if (f.method == kMethodWrite) {
        f.cellIdx = 0;
        f.stage = Stage::IlWriteVal;
        return;
      }
      f.ilChosen = f.ilResults[j - 1];
      f.cellIdx = 0;
      f.stage = Stage::IlWriteReport;
      return;
    }
    case Stage::IlWriteReport: {
      obj.il.report[proc][f.cellIdx] = f.ilChosen;
      Step st = em.base(proc, StepKind::Access, IL_WRITE_REPORT);
      st.inv = f.inv;
      st.object = f.object;
      st.accessOp = "write";
      st.reg = "report";
      st.regI = proc;
      st.regJ = f.cellIdx;
      st.value = f.ilChosen.val;
      em.emit(std::move(st));
      f.cellIdx += 1;
      if (f.cellIdx == n) f.stage = Stage::Ret;
      return;
    }
    case Stage::IlWriteVal: {
      if (f.cellIdx == 0) f.ilSeq = ++obj.il.writerSeq[proc];
      obj.il.val[f.cellIdx] = IlCell{f.arg, f.ilSeq};
      Step st = em.base(proc, StepKind::Access, IL_WRITE_VAL);
      st.inv = f.inv;
      st.object = f.object;
      st.accessOp = "write";
      st.reg = "val";
      st.regI = f.cellIdx;
      st.value = f.arg;
      em.emit(std::move(st));
      f.cellIdx += 1;
      if (f.cellIdx == n) f.stage = Stage::Ret;
      return;
    }
    case Stage::Ret:
      finish_return(s, em, proc, f.method == kMethodWrite ? Value::unit() : f.ilChosen.val);
      return;
    default:
      fail(Err::Internal, "bad il stage");
  }
}

// ---- Program instructions ---------------------------------------------------

static void start_invocation(EngineState& s, Emitter& em, int proc, const Instruction& ins) {
  ProcState& ps = s.procs[proc];
  ObjectState& obj = s.object(ins.object);
  bool isWrite = ins.kind == Instruction::Kind::WriteObj;
  Value arg = isWrite ? ins.expr.eval(ps.locals) : Value::bot();
  int occ = ps.siteOcc[ins.site]++;
  InvocationId inv{proc, ins.site, occ};
  std::string method = method_for(obj.cfg.kind, isWrite);

  InvRecord rec;
  rec.inv = inv;
  rec.object = ins.object;
  rec.method = method;
  rec.arg = arg;
  rec.callSeq = s.stepSeq;
  s.invs.push_back(rec);

  Step call = em.base(proc, StepKind::Call, SITE_CALL);
  call.inv = inv;
  call.object = ins.object;
  call.method = method;
  call.arg = arg;
  em.emit(std::move(call));

  if (obj.cfg.kind == ObjectKind::Atomic) {
    Value ret;
    if (isWrite) {
      obj.atomicVal = arg;
      ret = Value::unit();
    } else {
      ret = obj.atomicVal;
    }
    Step retst = em.base(proc, StepKind::Return, SITE_RETURN);
    retst.inv = inv;
    retst.value = ret;
    long seq = em.emit(std::move(retst));
    InvRecord& r = s.inv_record(inv);
    r.returned = true;
    r.ret = ret;
    r.retSeq = seq;
    r.preambleEndSeq = r.callSeq;
    if (!isWrite) ps.locals[ins.var] = ret;
    advance_pc(s, proc);
    return;
  }

  Frame f;
  f.inv = inv;
  f.object = ins.object;
  f.method = method;
  f.intoVar = isWrite ? std::string() : ins.var;
  f.arg = arg;
  f.kind = obj.cfg.kind;
  f.iterTotal = obj.cfg.iters();
  f.transformed = obj.cfg.transformed();
  switch (obj.cfg.kind) {
    case ObjectKind::Abd:
      f.stage = Stage::AbdQueryBroadcast;
      break;
    case ObjectKind::Snapshot:
      f.scan.reset(s.program->n);
      if (isWrite && f.transformed && !obj.cfg.extendedUpdatePreamble)
        f.stage = Stage::Pick;  // empty preamble: iterate nothing, pick, then the body
      else
        f.stage = Stage::SnapScan;
      break;
    case ObjectKind::Va:
      f.stage = Stage::VaCollect;
      break;
    case ObjectKind::Il:
      if (isWrite)
        f.stage = f.transformed ? Stage::Pick : Stage::IlWriteVal;
      else
        f.stage = Stage::IlReadVal;
      break;
    default:
      fail(Err::Internal, "unexpected kind");
  }
  // empty-preamble methods pass their (trivial) preamble point at the call
  if ((obj.cfg.kind == ObjectKind::Snapshot && isWrite && !obj.cfg.extendedUpdatePreamble) ||
      (obj.cfg.kind == ObjectKind::Il && isWrite))
    s.inv_record(inv).preambleEndSeq = s.inv_record(inv).callSeq;
  ps.frame = f;
}

static void program_step(EngineState& s, Emitter& em, int proc, TapeSource* tape) {
  ProcState& ps = s.procs[proc];
  const Instruction* ins = current_instruction(s, proc);
  if (!ins) fail(Err::Internal, "step on a process with no instruction");
  switch (ins->kind) {
    case Instruction::Kind::WriteObj:
    case Instruction::Kind::ReadObj:
      start_invocation(s, em, proc, *ins);
      return;
    case Instruction::Kind::Random: {
      Value v = draw(s, em, tape, ins->domain, RandomOrigin::Program, proc, ins->site,
                     std::nullopt);
      ps.locals[ins->var] = v;
      advance_pc(s, proc);
      return;
    }
    case Instruction::Kind::If: {
      Value c = ins->expr.eval(ps.locals);
      bool taken = c.is_int() && c.num != 0;
      Step st = em.base(proc, StepKind::Local, ins->site);
      st.value = Value::integer(taken ? 1 : 0);
      em.emit(std::move(st));
      enter_branch(s, proc, taken ? 0 : 1);
      return;
    }
    case Instruction::Kind::LoopForever: {
      em.emit(em.base(proc, StepKind::Local, ins->site));
      ps.status = ProcStatus::LoopForever;
      return;
    }
    case Instruction::Kind::Terminate: {
      em.emit(em.base(proc, StepKind::Local, ins->site));
      ps.status = ProcStatus::Terminated;
      return;
    }
  }
}

// ---- Delivery ---------------------------------------------------------------

static void deliver_msg(EngineState& s, Emitter& em, int dest, int msgId) {
  Message m = s.net.take(msgId);
  ObjectState& obj = s.object(m.object);
  ProcState& ps = s.procs[dest];

  auto deliverStep = [&](int site, const std::optional<InvocationId>& inv, bool mutated) {
    Step st = em.base(dest, StepKind::Deliver, site);
    st.inv = inv;
    st.msgId = m.id;
    st.peer = m.sender;
    st.tag = m.tag;
    st.object = m.object;
    st.sn = m.sn;
    st.mutated = mutated;
    em.emit(std::move(st));
  };

  switch (m.tag) {
    case MsgTag::Query: {
      const AbdServer& srv = obj.abd.servers[dest];
      deliverStep(ABD_SRV_QUERY, std::nullopt, false);
      int id = s.net.send(dest, m.sender, m.object, MsgTag::Reply, m.sn, srv.val, srv.ts, m.id);
      Step st = em.base(dest, StepKind::Send, ABD_SRV_QUERY);
      st.msgId = id;
      st.peer = m.sender;
      st.tag = MsgTag::Reply;
      st.object = m.object;
      st.sn = m.sn;
      st.value = srv.val;
      st.ts = srv.ts;
      st.reMsg = m.id;
      em.emit(std::move(st));
      return;
    }
    case MsgTag::Update: {
      AbdServer& srv = obj.abd.servers[dest];
      bool adopt = srv.ts < m.ts;
      deliverStep(ABD_SRV_UPDATE, std::nullopt, adopt);
      if (adopt) {
        srv.val = m.val;
        srv.ts = m.ts;
      }
      int id = s.net.send(dest, m.sender, m.object, MsgTag::Ack, m.sn, Value::bot(), Timestamp{},
                          m.id);
      Step st = em.base(dest, StepKind::Send, ABD_SRV_UPDATE);
      st.msgId = id;
      st.peer = m.sender;
      st.tag = MsgTag::Ack;
      st.object = m.object;
      st.sn = m.sn;
      st.reMsg = m.id;
      em.emit(std::move(st));
      return;
    }
    case MsgTag::Reply: {
      if (ps.frame && ps.frame->object == m.object && ps.frame->stage == Stage::AbdQueryCollect &&
          ps.frame->sn == m.sn) {
        ps.frame->replies.push_back({m.val, m.ts});
        deliverStep(ABD_CLI_REPLY, ps.frame->inv, false);
      } else {
        deliverStep(ABD_STALE, std::nullopt, false);  // stale phase: discarded
      }
      return;
    }
    case MsgTag::Ack: {
      if (ps.frame && ps.frame->object == m.object && ps.frame->stage == Stage::AbdUpdateCollect &&
          ps.frame->sn == m.sn) {
        ps.frame->acks += 1;
        deliverStep(ABD_CLI_ACK, ps.frame->inv, false);
      } else {
        deliverStep(ABD_STALE, std::nullopt, false);
      }
      return;
    }
  }
}

// --------------------------------------------------------------------------

void apply(EngineState& s, const Directive& d0, TapeSource* tape, StepSink* sink) {
  Directive d = resolve_directive(s, d0);
  Emitter em{s, sink};
  int idFloorBefore = s.net.nextId;
  if (d.kind == Directive::Kind::StepProc) {
    ProcState& ps = s.procs[d.proc];
    if (ps.frame) {
      switch (ps.frame->kind) {
        case ObjectKind::Abd:
          abd_step(s, em, d.proc, tape);
          break;
        case ObjectKind::Snapshot:
          snap_step(s, em, d.proc, tape);
          break;
        case ObjectKind::Va:
          va_step(s, em, d.proc, tape);
          break;
        case ObjectKind::Il:
          il_step(s, em, d.proc, tape);
          break;
        default:
          fail(Err::Internal, "frame on atomic object");
      }
    } else {
      program_step(s, em, d.proc, tape);
    }
    s.porLastDeliverDest = -1;
    s.porIdFloor = 0;
  } else {
    deliver_msg(s, em, d.proc, d.msgId);
    s.porLastDeliverDest = d.proc;
    s.porIdFloor = idFloorBefore;
  }
  s.directiveCount += 1;
}

// --------------------------------------------------------------------------

namespace {

class Recorder : public StepSink {
 public:
  explicit Recorder(bool keep) : keep_(keep) {}
  void emit(const Step& s) override {
    if (keep_) steps_.push_back(s);
  }
  std::vector<Step> take() { return std::move(steps_); }

 private:
  bool keep_;
  std::vector<Step> steps_;
};

}  // namespace

RunResult run(ProgramPtr program, const Bindings& bindings, AdversaryPolicy& policy,
              TapeSource& tape, const RunOptions& opts) {
  EngineState s = init_state(std::move(program), bindings);
  Recorder rec(opts.recordSteps);
  std::vector<Directive> log;
  while (!s.all_terminal()) {
    if (s.stepSeq >= opts.stepBudget)
      fail(Err::BudgetExceeded, "step budget " + std::to_string(opts.stepBudget) + " hit");
    Directive d = policy.next(s);
    Directive rd = resolve_directive(s, d);
    log.push_back(rd);
    apply(s, rd, &tape, &rec);
  }
  RunResult out;
  out.exec.steps = rec.take();
  out.exec.stepsRecorded = opts.recordSteps;
  out.exec.invs = s.invs;
  out.exec.programRandomSeqs = s.programRandomSeqs;
  out.exec.stepCount = s.stepSeq;
  for (const auto& p : s.procs) out.exec.finalStatus.push_back(p.status);
  out.finalState = std::move(s);
  out.directives = std::move(log);
  return out;
}

bool is_complete_wrt(const Execution& e, const PreambleMapping& pm) {
  for (const InvRecord& r : e.invs) {
    int site = pm.site_for(r.method);  // throws UnknownMethod when uncovered
    if (site == SITE_CALL) continue;
    if (site == SITE_RETURN) {
      if (!r.returned) return false;
      continue;
    }
    if (!e.stepsRecorded) {
      // the engine's built-in preamble points are tracked without the log
      if (r.preambleEndSeq < 0) return false;
      continue;
    }
    bool passed = false;
    for (const Step& st : e.steps)
      if (st.inv && *st.inv == r.inv && st.site == site) {
        passed = true;
        break;
      }
    if (!passed) return false;
  }
  return true;
}

// --------------------------------------------------------------------------
// Canonical encoding

namespace {

struct Enc {
  std::string& out;
  void u8(uint8_t v) { out.push_back(static_cast<char>(v)); }
  void i64(long long v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void str(const std::string& s) {
    i64(static_cast<long long>(s.size()));
    out += s;
  }
  void value(const Value& v) {
    u8(static_cast<uint8_t>(v.kind));
    if (v.kind == Value::Kind::Int) i64(v.num);
    if (v.kind == Value::Kind::Vec) {
      i64(static_cast<long long>(v.items.size()));
      for (const auto& x : v.items) value(x);
    }
  }
  void ts(const Timestamp& t) {
    i64(t.t);
    i64(t.pid);
  }
};

}  // namespace

void encode_state(const EngineState& s, std::string& out) {
  Enc e{out};
  e.u8(0xB1);
  for (const ProcState& p : s.procs) {
    e.u8(static_cast<uint8_t>(p.status));
    e.i64(static_cast<long long>(p.pc.path.size()));
    for (int x : p.pc.path) e.i64(x);
    e.i64(static_cast<long long>(p.locals.size()));
    for (const auto& [k, v] : p.locals) {
      e.str(k);
      e.value(v);
    }
    e.i64(static_cast<long long>(p.siteOcc.size()));
    for (const auto& [k, v] : p.siteOcc) {
      e.i64(k);
      e.i64(v);
    }
    e.u8(p.frame ? 1 : 0);
    if (p.frame) {
      const Frame& f = *p.frame;
      e.i64(f.inv.proc);
      e.i64(f.inv.site);
      e.i64(f.inv.occ);
      e.str(f.object);
      e.str(f.method);
      e.value(f.arg);
      e.u8(static_cast<uint8_t>(f.stage));
      e.i64(f.iter);
      e.i64(f.sn);
      // replies as a multiset
      auto replies = f.replies;
      std::sort(replies.begin(), replies.end(), [](const auto& a, const auto& b) {
        return a.second < b.second || (a.second == b.second && a.first < b.first);
      });
      e.i64(static_cast<long long>(replies.size()));
      for (const auto& [v, t] : replies) {
        e.value(v);
        e.ts(t);
      }
      e.i64(f.acks);
      e.i64(static_cast<long long>(f.qResults.size()));
      for (const auto& [v, t] : f.qResults) {
        e.value(v);
        e.ts(t);
      }
      e.value(f.chosenVal);
      e.ts(f.chosenTs);
      e.i64(f.scan.idx);
      e.u8(f.scan.havePrev ? 1 : 0);
      e.u8(f.scan.done ? 1 : 0);
      auto cells = [&](const std::vector<SnapCell>& cs) {
        e.i64(static_cast<long long>(cs.size()));
        for (const auto& c : cs) {
          e.value(c.val);
          e.i64(c.seq);
          e.i64(static_cast<long long>(c.snap.size()));
          for (const auto& v : c.snap) e.value(v);
        }
      };
      cells(f.scan.cur);
      cells(f.scan.prev);
      for (int m : f.scan.moved) e.i64(m);
      e.i64(static_cast<long long>(f.scanResults.size()));
      for (const auto& r : f.scanResults) {
        e.i64(static_cast<long long>(r.size()));
        for (const auto& v : r) e.value(v);
      }
      for (const auto& v : f.snapChosen) e.value(v);
      e.i64(f.cellIdx);
      e.i64(static_cast<long long>(f.collected.size()));
      for (const auto& [v, t] : f.collected) {
        e.value(v);
        e.ts(t);
      }
      e.value(f.ilBest.val);
      e.i64(f.ilBest.seq);
      e.i64(static_cast<long long>(f.ilResults.size()));
      for (const auto& c : f.ilResults) {
        e.value(c.val);
        e.i64(c.seq);
      }
      e.value(f.ilChosen.val);
      e.i64(f.ilChosen.seq);
      e.i64(f.ilSeq);
    }
  }
  for (const auto& [name, obj] : s.objects) {
    e.str(name);
    e.u8(static_cast<uint8_t>(obj.cfg.kind));
    e.i64(obj.cfg.k);
    e.value(obj.atomicVal);
    for (const auto& srv : obj.abd.servers) {
      e.value(srv.val);
      e.ts(srv.ts);
    }
    for (int sn : obj.abd.sn) e.i64(sn);
    for (const auto& c : obj.snap.cells) {
      e.value(c.val);
      e.i64(c.seq);
      for (const auto& v : c.snap) e.value(v);
    }
    for (const auto& c : obj.va.val) {
      e.value(c.val);
      e.ts(c.ts);
    }
    for (const auto& c : obj.il.val) {
      e.value(c.val);
      e.i64(c.seq);
    }
    for (const auto& row : obj.il.report)
      for (const auto& c : row) {
        e.value(c.val);
        e.i64(c.seq);
      }
    for (long v : obj.il.writerSeq) e.i64(v);
  }
  // in-flight messages as a multiset, ids replaced by the POR age flag
  std::vector<std::string> msgs;
  for (const Message& m : s.net.inFlight) {
    std::string buf;
    Enc me{buf};
    me.i64(m.sender);
    me.i64(m.dest);
    me.str(m.object);
    me.u8(static_cast<uint8_t>(m.tag));
    me.i64(m.sn);
    me.value(m.val);
    me.ts(m.ts);
    me.u8(m.id < s.porIdFloor ? 1 : 0);
    msgs.push_back(std::move(buf));
  }
  std::sort(msgs.begin(), msgs.end());
  e.i64(static_cast<long long>(msgs.size()));
  for (const auto& m : msgs) e.str(m);
  e.i64(s.porLastDeliverDest);
  // returned values decide terminal bad-set membership
  e.i64(static_cast<long long>(s.invs.size()));
  for (const InvRecord& r : s.invs) {
    e.i64(r.inv.proc);
    e.i64(r.inv.site);
    e.i64(r.inv.occ);
    e.u8(r.returned ? 1 : 0);
    e.value(r.ret);
  }
}

Digest digest_state(const EngineState& s) {
  std::string buf;
  buf.reserve(512);
  encode_state(s, buf);
  // 128-bit FNV-1a style mix over the canonical encoding
  uint64_t a = 0xcbf29ce484222325ULL, b = 0x9E3779B97F4A7C15ULL;
  for (unsigned char c : buf) {
    a = (a ^ c) * 0x100000001b3ULL;
    b = (b ^ c) * 0xc6a4a7935bd1e995ULL;
    b ^= b >> 29;
  }
  a = mix64(a ^ (b << 1));
  b = mix64(b ^ a);
  return Digest{a, b};
}

}  // namespace blunt
