#include <doctest.h>

#include "blunt/audit.hpp"

#include "replay_support.hpp"
#include "blunt/engine.hpp"
#include "blunt/errors.hpp"
#include "blunt/lincheck.hpp"
#include "blunt/policies.hpp"
#include "blunt/program.hpp"

using namespace blunt;

namespace {

ProgramPtr single_op_program(bool write, const std::string& obj = "O", long long v = 0) {
  auto p = std::make_shared<Program>();
  p->n = 3;
  p->objectInit[obj] = Value::bot();
  std::vector<Instruction> body;
  if (write)
    body.push_back(Instruction::writeObj(obj, Expr::constant(Value::integer(v))));
  else
    body.push_back(Instruction::readObj("x", obj));
  p->procs.push_back(body);
  p->procs.push_back({});
  p->procs.push_back({});
  p->number_sites();
  return p;
}

/// Drives every process to completion with the deterministic drain order.
Outcome drain_run(ProgramPtr p, const Bindings& b, TapeSource& tape, Execution* out = nullptr) {
  ScriptPolicy pol({}, "drain");
  RunOptions opts;
  opts.recordSteps = out != nullptr;
  RunResult r = run(std::move(p), b, pol, tape, opts);
  if (out) *out = r.exec;
  return outcome_of(r.exec);
}

ProgramPtr reg_driver() {
  auto p = std::make_shared<Program>();
  p->name = "reg-driver";
  p->n = 3;
  p->objectInit["O"] = Value::bot();
  p->procs.push_back({Instruction::writeObj("O", Expr::constant(Value::integer(0))),
                      Instruction::readObj("a", "O")});
  p->procs.push_back({Instruction::writeObj("O", Expr::constant(Value::integer(1))),
                      Instruction::readObj("b", "O")});
  p->procs.push_back({Instruction::readObj("c", "O")});
  p->number_sites();
  return p;
}

}  // namespace

TEST_CASE("timestamp order is lexicographic") {
  CHECK(ts_less({1, 0}, {1, 1}));
  CHECK(ts_less({1, 1}, {2, 0}));
  CHECK_FALSE(ts_less({0, 0}, {0, 0}));
  CHECK(Timestamp{0, 0} == Timestamp{0, 0});
}

TEST_CASE("abd query phase: fresh servers reply bot,(0,0)") {
  ProgramPtr p = single_op_program(false);
  Bindings b = uniform_bindings(p->objectInit, ObjectConfig{ObjectKind::Abd, 0});
  EngineState s = init_state(p, b);
  FixedTape tape;
  apply(s, Directive::step(0), &tape, nullptr);  // call read
  apply(s, Directive::step(0), &tape, nullptr);  // query broadcast
  apply(s, resolve_directive(s, Directive::match(1, "O", MsgTag::Query, 0, 1)), &tape, nullptr);
  apply(s, resolve_directive(s, Directive::match(2, "O", MsgTag::Query, 0, 1)), &tape, nullptr);
  apply(s, resolve_directive(s, Directive::match(0, "O", MsgTag::Reply, 1, 1)), &tape, nullptr);
  CHECK_FALSE(step_ready(s, 0));  // one reply is below the quorum of two
  apply(s, resolve_directive(s, Directive::match(0, "O", MsgTag::Reply, 2, 1)), &tape, nullptr);
  CHECK(step_ready(s, 0));
  apply(s, Directive::step(0), &tape, nullptr);  // assign
  const Frame& f = *s.procs[0].frame;
  CHECK(f.qResults.size() == 1);
  CHECK(f.qResults[0].first == Value::bot());
  CHECK(f.qResults[0].second == Timestamp{0, 0});
}

TEST_CASE("abd update handler adopts only newer timestamps") {
  ProgramPtr p = single_op_program(true, "O", 1);
  Bindings b = uniform_bindings(p->objectInit, ObjectConfig{ObjectKind::Abd, 0});
  EngineState s = init_state(p, b);
  // plant an update from a fictitious peer by running the real write and
  // checking server states after deliveries
  FixedTape tape;
  apply(s, Directive::step(0), &tape, nullptr);
  apply(s, Directive::step(0), &tape, nullptr);
  for (int srv : {0, 1})
    apply(s, resolve_directive(s, Directive::match(srv, "O", MsgTag::Query, 0, 1)), &tape,
          nullptr);
  for (int srv : {0, 1})
    apply(s, resolve_directive(s, Directive::match(0, "O", MsgTag::Reply, srv, 1)), &tape,
          nullptr);
  apply(s, Directive::step(0), &tape, nullptr);  // assign t=0
  apply(s, Directive::step(0), &tape, nullptr);  // update broadcast (1,(1,0))
  apply(s, resolve_directive(s, Directive::match(1, "O", MsgTag::Update, 0, 2)), &tape, nullptr);
  CHECK(s.object("O").abd.servers[1].val == Value::integer(1));
  CHECK(s.object("O").abd.servers[1].ts == Timestamp{1, 0});
  // ack was sent regardless; deliver the same-timestamped update to a
  // server that already adopted a larger one: state unchanged
  apply(s, resolve_directive(s, Directive::match(2, "O", MsgTag::Update, 0, 2)), &tape, nullptr);
  CHECK(s.object("O").abd.servers[2].ts == Timestamp{1, 0});
  int acks = 0;
  for (const Message& m : s.net.inFlight)
    if (m.tag == MsgTag::Ack) ++acks;
  CHECK(acks == 2);
}

TEST_CASE("sequential abd write then read") {
  auto p = std::make_shared<Program>();
  p->n = 3;
  p->objectInit["O"] = Value::bot();
  p->procs.push_back({Instruction::writeObj("O", Expr::constant(Value::integer(0))),
                      Instruction::readObj("x", "O")});
  p->procs.push_back({});
  p->procs.push_back({});
  p->number_sites();
  Bindings b = uniform_bindings(p->objectInit, ObjectConfig{ObjectKind::Abd, 0});
  FixedTape tape;
  Execution e;
  Outcome o = drain_run(p, b, tape, &e);
  CHECK(o.returns.at({0, 1, 0}) == Value::integer(0));
  // the write carries register timestamp (1,0)
  const InvRecord* w = e.find({0, 0, 0});
  REQUIRE(w);
  REQUIRE(w->ts.has_value());
  CHECK(*w->ts == Timestamp{1, 0});
}

TEST_CASE("fresh abd read returns the initial value") {
  ProgramPtr p = single_op_program(false);
  Bindings b = uniform_bindings(p->objectInit, ObjectConfig{ObjectKind::Abd, 0});
  FixedTape tape;
  Outcome o = drain_run(p, b, tape);
  CHECK(o.returns.at({0, 0, 0}) == Value::bot());
}

TEST_CASE("concurrent writers: pid breaks the integer tie") {
  // both writers query before either updates; both compute t = 0; the
  // final register order is decided by (1,1) > (1,0)
  auto p = std::make_shared<Program>();
  p->n = 3;
  p->objectInit["O"] = Value::bot();
  p->procs.push_back({Instruction::writeObj("O", Expr::constant(Value::integer(0)))});
  p->procs.push_back({Instruction::writeObj("O", Expr::constant(Value::integer(1)))});
  p->procs.push_back({Instruction::readObj("x", "O")});
  p->number_sites();
  Bindings b = uniform_bindings(p->objectInit, ObjectConfig{ObjectKind::Abd, 0});

  std::vector<Directive> script;
  auto S = [&](int q) { script.push_back(Directive::step(q)); };
  auto D = [&](int dest, MsgTag tag, int sender, int sn) {
    script.push_back(Directive::match(dest, "O", tag, sender, sn));
  };
  S(0); S(0); S(1); S(1);  // both calls, both query broadcasts
  D(0, MsgTag::Query, 0, 1); D(1, MsgTag::Query, 0, 1);
  D(0, MsgTag::Query, 1, 1); D(1, MsgTag::Query, 1, 1);
  D(0, MsgTag::Reply, 0, 1); D(0, MsgTag::Reply, 1, 1);
  D(1, MsgTag::Reply, 0, 1); D(1, MsgTag::Reply, 1, 1);
  S(0); S(1);  // both assigns: t = 0 for both
  ScriptPolicy pol(script, "interleaved-writers");
  FixedTape tape;
  RunOptions opts;
  opts.recordSteps = true;
  RunResult r = run(p, b, pol, tape, opts);
  Outcome o = outcome_of(r.exec);
  CHECK(o.returns.at({2, 0, 0}) == Value::integer(1));
  const InvRecord* w0 = r.exec.find({0, 0, 0});
  const InvRecord* w1 = r.exec.find({1, 0, 0});
  CHECK(*w0->ts == Timestamp{1, 0});
  CHECK(*w1->ts == Timestamp{1, 1});
  // and the history is linearizable
  Hist h = history_events(project_history(r.exec));
  CHECK(check_linearizable(project_object(h, "O"), ObjectSpec::register_spec()).ok);
}

TEST_CASE("preamble iteration: agreeing query phases make the choice invisible") {
  ProgramPtr p = single_op_program(false);
  Bindings b = uniform_bindings(p->objectInit, ObjectConfig{ObjectKind::Abd, 2});
  for (long long j : {1, 2}) {
    FixedTape tape;
    tape.push(Value::integer(j), RandomOrigin::Object);
    Outcome o = drain_run(p, b, tape);
    CHECK(o.returns.at({0, 0, 0}) == Value::bot());
  }
}

TEST_CASE("abd-squared write: the chosen iteration decides the timestamp") {
  // replay the crafted schedule with pinned picks; W0's query phases see
  // t[1]=0 and t[2]=1, so iteration 1 gives (1,0) and iteration 2 (2,0)
  ProgramPtr p = weakener();
  Bindings b = uniform_bindings(p->objectInit, ObjectConfig{ObjectKind::Abd, 2});
  for (long long jW0 : {1, 2}) {
    auto pol = crafted_abd2_policy(*p, b);
    FixedTape tape;
    tape.push(Value::integer(1), RandomOrigin::Object);   // W1 pick
    tape.push(Value::integer(1), RandomOrigin::Program);  // coin = 1
    tape.push(Value::integer(1), RandomOrigin::Object);   // R1 pick
    tape.push(Value::integer(jW0), RandomOrigin::Object); // W0 pick
    tape.push(Value::integer(1), RandomOrigin::Object);   // R2 pick
    tape.push(Value::integer(1), RandomOrigin::Object);   // C write pick
    tape.push(Value::integer(1), RandomOrigin::Object);   // C read pick
    RunOptions opts;
    opts.recordSteps = true;
    RunResult r = run(p, b, *pol, tape, opts);
    const InvRecord* w0 = r.exec.find({0, weakener_sites().w0, 0});
    REQUIRE(w0);
    REQUIRE(w0->ts.has_value());
    CHECK(*w0->ts == (jW0 == 1 ? Timestamp{1, 0} : Timestamp{2, 0}));
    CHECK(w0->chosenIter == static_cast<int>(jW0));
    // u2 reads 0 exactly when W0 lands after W1
    Outcome o = outcome_of(r.exec);
    CHECK(o.returns.at({2, weakener_sites().u2, 0}) ==
          (jW0 == 2 ? Value::integer(0) : Value::integer(1)));
  }
}

TEST_CASE("snapshot: quiet scans double-collect directly") {
  auto p = std::make_shared<Program>();
  p->n = 3;
  p->objectInit["S"] = Value::bot();
  p->procs.push_back({Instruction::readObj("x", "S")});
  p->procs.push_back({});
  p->procs.push_back({});
  p->number_sites();
  Bindings b = uniform_bindings(p->objectInit, ObjectConfig{ObjectKind::Snapshot, 0});
  FixedTape tape;
  Execution e;
  Outcome o = drain_run(p, b, tape, &e);
  CHECK(o.returns.at({0, 0, 0}) ==
        Value::vec({Value::bot(), Value::bot(), Value::bot()}));
  // exactly two collects: 6 reads and no borrowed snapshot
  int reads = 0;
  for (const Step& s : e.steps) reads += s.kind == StepKind::Access && s.accessOp == "read";
  CHECK(reads == 6);
}

TEST_CASE("snapshot: a twice-moving updater donates its embedded snapshot") {
  auto p = std::make_shared<Program>();
  p->n = 3;
  p->objectInit["S"] = Value::bot();
  p->procs.push_back({Instruction::writeObj("S", Expr::constant(Value::integer(1))),
                      Instruction::writeObj("S", Expr::constant(Value::integer(2)))});
  p->procs.push_back({Instruction::readObj("x", "S")});
  p->procs.push_back({});
  p->number_sites();
  Bindings b = uniform_bindings(p->objectInit, ObjectConfig{ObjectKind::Snapshot, 0});
  std::vector<Directive> script;
  auto S = [&](int q, int times = 1) {
    for (int i = 0; i < times; ++i) script.push_back(Directive::step(q));
  };
  // p1 starts its scan: first collect of 3 reads + compare
  S(1);      // call scan
  S(1, 4);   // collect [bot,bot,bot] + shift
  // p0's first update runs fully (its embedded scan, write, return)
  S(0, 1 + 3 + 1 + 3 + 1 + 1 + 1);  // call + scan(3+1+3+1) + write + return
  // p1's second collect sees seq change: moved[0] = 1
  S(1, 4);
  // p0's second update runs fully; its embedded scan sees [1,bot,bot]
  S(0, 1 + 3 + 1 + 3 + 1 + 1 + 1);
  // p1's third collect observes the second move and borrows
  S(1, 4);
  S(1);  // return
  ScriptPolicy pol(script, "snapshot-borrow");
  FixedTape tape;
  RunOptions opts;
  opts.recordSteps = true;
  RunResult r = run(p, b, pol, tape, opts);
  Outcome o = outcome_of(r.exec);
  // the scan returns update 2's embedded snapshot [1,bot,bot]
  CHECK(o.returns.at({1, 0, 0}) ==
        Value::vec({Value::integer(1), Value::bot(), Value::bot()}));
  Hist h = history_events(project_history(r.exec));
  CHECK(check_linearizable(project_object(h, "S"), ObjectSpec::snapshot_spec(3)).ok);
}

TEST_CASE("va register") {
  SUBCASE("fresh read returns the initial value; write then read returns it") {
    ProgramPtr p = reg_driver();
    Bindings b = uniform_bindings(p->objectInit, ObjectConfig{ObjectKind::Va, 0});
    FixedTape tape;
    Outcome o = drain_run(p, b, tape);
    CHECK(o.returns.at({0, 1, 0}) == Value::integer(0));  // own write visible
    CHECK(o.returns.at({1, 1, 0}) == Value::integer(1));
  }
  SUBCASE("colliding writers order by pid; reader sees writer 1") {
    auto p = std::make_shared<Program>();
    p->n = 3;
    p->objectInit["O"] = Value::bot();
    p->procs.push_back({Instruction::writeObj("O", Expr::constant(Value::integer(0)))});
    p->procs.push_back({Instruction::writeObj("O", Expr::constant(Value::integer(1)))});
    p->procs.push_back({Instruction::readObj("x", "O")});
    p->number_sites();
    Bindings b = uniform_bindings(p->objectInit, ObjectConfig{ObjectKind::Va, 0});
    std::vector<Directive> script;
    auto S = [&](int q, int times = 1) {
      for (int i = 0; i < times; ++i) script.push_back(Directive::step(q));
    };
    S(0, 1 + 3 + 1);  // call + collect + decide: ts (1,0)
    S(1, 1 + 3 + 1);  // call + collect + decide: ts (1,1)
    S(0, 2);          // write + return
    S(1, 2);          // write + return
    ScriptPolicy pol(script, "va-collide");
    FixedTape tape;
    RunOptions opts;
    opts.recordSteps = true;
    RunResult r = run(p, b, pol, tape, opts);
    Outcome o = outcome_of(r.exec);
    CHECK(o.returns.at({2, 0, 0}) == Value::integer(1));
    Hist h = history_events(project_history(r.exec));
    CHECK(check_linearizable(project_object(h, "O"), ObjectSpec::register_spec()).ok);
  }
}

TEST_CASE("il register") {
  auto driver = [] {
    auto p = std::make_shared<Program>();
    p->n = 3;
    p->objectInit["O"] = Value::bot();
    p->procs.push_back({Instruction::writeObj("O", Expr::constant(Value::integer(5)))});
    p->procs.push_back({Instruction::readObj("a", "O")});
    p->procs.push_back({Instruction::readObj("b", "O")});
    p->number_sites();
    return p;
  };
  SUBCASE("fresh read returns the initial value") {
    auto p = std::make_shared<Program>();
    p->n = 3;
    p->objectInit["O"] = Value::bot();
    p->procs.push_back({});
    p->procs.push_back({Instruction::readObj("a", "O")});
    p->procs.push_back({});
    p->number_sites();
    Bindings b = uniform_bindings(p->objectInit, ObjectConfig{ObjectKind::Il, 0});
    FixedTape tape;
    Outcome o = drain_run(p, b, tape);
    CHECK(o.returns.at({1, 0, 0}) == Value::bot());
  }
  SUBCASE("fully delivered write is read") {
    ProgramPtr p = driver();
    Bindings b = uniform_bindings(p->objectInit, ObjectConfig{ObjectKind::Il, 0});
    FixedTape tape;
    Outcome o = drain_run(p, b, tape);
    CHECK(o.returns.at({1, 0, 0}) == Value::integer(5));
    CHECK(o.returns.at({2, 0, 0}) == Value::integer(5));
  }
  SUBCASE("a report prevents the new/old inversion") {
    // writer updates Val[1] but stalls before Val[2]; reader 1 sees the
    // new value and reports; reader 2's own cell is stale but the report
    // column rescues it
    ProgramPtr p = driver();
    Bindings b = uniform_bindings(p->objectInit, ObjectConfig{ObjectKind::Il, 0});
    std::vector<Directive> script;
    auto S = [&](int q, int times = 1) {
      for (int i = 0; i < times; ++i) script.push_back(Directive::step(q));
    };
    S(0, 1 + 2);          // call write; Val[0], Val[1] written; Val[2] pending
    S(1, 1 + 1 + 3 + 1);  // reader 1: call, read Val[1] (new), report column, decide
    S(1, 3 + 1);          // write report row, return 5
    S(2, 1 + 1 + 3 + 1);  // reader 2: Val[2] stale, but Report[1][2] carries 5
    S(2, 3 + 1);
    ScriptPolicy pol(script, "il-inversion");
    FixedTape tape;
    RunOptions opts;
    opts.recordSteps = true;
    RunResult r = run(p, b, pol, tape, opts);
    Outcome o = outcome_of(r.exec);
    CHECK(o.returns.at({1, 0, 0}) == Value::integer(5));
    CHECK(o.returns.at({2, 0, 0}) == Value::integer(5));
    Hist h = history_events(project_history(r.exec));
    CHECK(check_linearizable(project_object(h, "O"), ObjectSpec::register_spec()).ok);
  }
}

TEST_CASE("object specs as decision procedures") {
  ObjectSpec reg = ObjectSpec::register_spec();
  auto w = reg.step(reg.init_state(), "write", Value::integer(3), 0);
  REQUIRE(w);
  CHECK(w->second == Value::unit());
  auto r = reg.step(w->first, "read", Value::bot(), 1);
  REQUIRE(r);
  CHECK(r->second == Value::integer(3));
  CHECK_FALSE(reg.step(reg.init_state(), "scan", Value::bot(), 0).has_value());

  ObjectSpec snap = ObjectSpec::snapshot_spec(2);
  auto u = snap.step(snap.init_state(), "update", Value::integer(9), 1);
  REQUIRE(u);
  auto sc = snap.step(u->first, "scan", Value::bot(), 0);
  REQUIRE(sc);
  CHECK(sc->second == Value::vec({Value::bot(), Value::integer(9)}));
}

TEST_CASE("effect-free preamble audit") {
  std::string why;
  CHECK(audit_effect_free(ObjectKind::Abd, ObjectConfig{ObjectKind::Abd, 0},
                          PreambleMapping::abd(), 25, &why));
  CHECK(audit_effect_free(ObjectKind::Abd, ObjectConfig{ObjectKind::Abd, 2},
                          PreambleMapping::abd(), 25, &why));
  CHECK_FALSE(audit_effect_free(ObjectKind::Abd, ObjectConfig{ObjectKind::Abd, 0},
                                PreambleMapping::abd_through_update(), 25, &why));
  CHECK(why.find("server state") != std::string::npos);
  CHECK(audit_effect_free(ObjectKind::Snapshot, ObjectConfig{ObjectKind::Snapshot, 0},
                          PreambleMapping::snapshot(false), 25, &why));
  CHECK(audit_effect_free(ObjectKind::Snapshot, ObjectConfig{ObjectKind::Snapshot, 0},
                          PreambleMapping::snapshot(true), 25, &why));
  CHECK(audit_effect_free(ObjectKind::Va, ObjectConfig{ObjectKind::Va, 0}, PreambleMapping::va(),
                          25, &why));
  CHECK(audit_effect_free(ObjectKind::Il, ObjectConfig{ObjectKind::Il, 0}, PreambleMapping::il(),
                          25, &why));
}

TEST_CASE("nonpositive k is rejected") {
  ObjectConfig bad{ObjectKind::Abd, -1};
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("deleting unused preamble iterations replays to the same history") {
  // every abd^k execution reduces to an execution of plain abd with a
  // byte-identical history
  ProgramPtr p = weakener();
  for (int k : {2, 3}) {
    Bindings bk = uniform_bindings(p->objectInit, ObjectConfig{ObjectKind::Abd, k});
    Bindings b0 = uniform_bindings(p->objectInit, ObjectConfig{ObjectKind::Abd, 0});
    for (int seed = 0; seed < 40; ++seed) {
      RandomPolicy pol(31000 + seed);
      SeededTape tape(derive_trial_seed(31, seed));
      RunOptions opts;
      opts.recordSteps = true;
      RunResult orig = run(p, bk, pol, tape, opts);

      testsupport::ReducedRun red = testsupport::reduce_abdk_execution(orig.exec);
      EngineState s = init_state(p, b0);
      FixedTape prog(red.programTape);
      class Sink : public StepSink {
       public:
        std::vector<Step> steps;
        void emit(const Step& st) override { steps.push_back(st); }
      } sink;
      for (const Directive& d : red.script) apply(s, resolve_directive(s, d), &prog, &sink);
      REQUIRE(s.all_terminal());

      Execution reduced;
      reduced.steps = sink.steps;
      reduced.stepsRecorded = true;
      reduced.invs = s.invs;
      History ho = project_history(orig.exec), hr = project_history(reduced);
      REQUIRE(ho.actions.size() == hr.actions.size());
      for (size_t i = 0; i < ho.actions.size(); ++i) {
        CHECK(ho.actions[i].isCall == hr.actions[i].isCall);
        CHECK(ho.actions[i].inv == hr.actions[i].inv);
        CHECK(ho.actions[i].value == hr.actions[i].value);
        CHECK(ho.actions[i].arg == hr.actions[i].arg);
      }
    }
  }
}
