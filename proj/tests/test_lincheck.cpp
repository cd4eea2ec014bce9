#include <doctest.h>

#include <functional>

#include "blunt/errors.hpp"
#include "blunt/lincheck.hpp"
#include "blunt/policies.hpp"
#include "blunt/program.hpp"
#include "blunt/trees.hpp"

using namespace blunt;

namespace {

HEvent ev(bool call, int proc, int site, const char* method, Value arg, Value ret) {
  HEvent e;
  e.isCall = call;
  e.inv = {proc, site, 0};
  e.object = "O";
  e.method = method;
  e.arg = arg;
  e.ret = ret;
  return e;
}

const Value kOne = Value::integer(1);
const Value kZero = Value::integer(0);

}  // namespace

TEST_CASE("linearizability of flat histories") {
  ObjectSpec reg = ObjectSpec::register_spec(kZero);
  SUBCASE("write then read of the written value") {
    Hist h = {ev(true, 0, 0, "write", kOne, {}), ev(false, 0, 0, "write", kOne, Value::unit()),
              ev(true, 1, 0, "read", {}, {}), ev(false, 1, 0, "read", {}, kOne)};
    LinResult r = check_linearizable(h, reg);
    CHECK(r.ok);
    CHECK(replay_linearization(r.witness, reg));
  }
  SUBCASE("stale read after the write returned") {
    Hist h = {ev(true, 0, 0, "write", kOne, {}), ev(false, 0, 0, "write", kOne, Value::unit()),
              ev(true, 1, 0, "read", {}, {}), ev(false, 1, 0, "read", {}, kZero)};
    CHECK_FALSE(check_linearizable(h, reg).ok);
  }
  SUBCASE("overlap permits either order") {
    Hist h = {ev(true, 0, 0, "write", kOne, {}), ev(true, 1, 0, "read", {}, {}),
              ev(false, 1, 0, "read", {}, kZero), ev(false, 0, 0, "write", kOne, Value::unit())};
    CHECK(check_linearizable(h, reg).ok);
  }
  SUBCASE("pending calls may be completed or dropped") {
    Hist h = {ev(true, 0, 0, "write", kOne, {}), ev(true, 1, 0, "read", {}, {}),
              ev(false, 1, 0, "read", {}, kOne)};
    CHECK(check_linearizable(h, reg).ok);  // completes the pending write
    Hist h2 = {ev(true, 0, 0, "write", kOne, {}), ev(true, 1, 0, "read", {}, {}),
               ev(false, 1, 0, "read", {}, kZero)};
    CHECK(check_linearizable(h2, reg).ok);  // drops it
  }
  SUBCASE("malformed histories are rejected") {
    Hist dupCall = {ev(true, 0, 0, "write", kOne, {}), ev(true, 0, 0, "write", kOne, {})};
    CHECK_THROWS_AS(check_linearizable(dupCall, reg), Error);
    Hist retOnly = {ev(false, 0, 0, "write", kOne, Value::unit())};
    CHECK_THROWS_AS(check_linearizable(retOnly, reg), Error);
  }
}

TEST_CASE("witness replay agrees with the history's return values") {
  ObjectSpec reg = ObjectSpec::register_spec();
  ProgramPtr p = weakener();
  Bindings b = uniform_bindings(p->objectInit, ObjectConfig{ObjectKind::Abd, 0});
  for (int seed = 0; seed < 50; ++seed) {
    RandomPolicy pol(500 + seed);
    SeededTape tape(derive_trial_seed(77, seed));
    RunOptions opts;
    opts.recordSteps = true;
    RunResult r = run(p, b, pol, tape, opts);
    Hist h = history_events(project_history(r.exec));
    for (const std::string& obj : {std::string("R"), std::string("C")}) {
      Hist ph = project_object(h, obj);
      ObjectSpec spec =
          obj == "C" ? ObjectSpec::register_spec(Value::integer(-1)) : reg;
      LinResult lr = check_linearizable(ph, spec);
      REQUIRE(lr.ok);
      CHECK(replay_linearization(lr.witness, spec));
      for (const HEvent& e : ph) {
        if (e.isCall) continue;
        for (const LinOp& op : lr.witness)
          if (op.inv == e.inv) CHECK(op.ret == e.ret);
      }
    }
  }
}

TEST_CASE("strong linearizability on trees") {
  ObjectSpec reg = ObjectSpec::register_spec();
  SUBCASE("a purely sequential chain is strongly linearizable") {
    ProgramPtr p = two_writer_reader_program();
    Bindings b = uniform_bindings(p->objectInit, ObjectConfig{ObjectKind::Abd, 0});
    // a single drain run as a degenerate (chain) tree
    ScriptPolicy drain({}, "drain");
    FixedTape tape;
    RunResult r = run(p, b, drain, tape, {});
    ExecTree chain = tree_from_scripts(p, b, {r.directives});
    CHECK(check_strong_linearizable(chain, reg).ok);
  }
  SUBCASE("singleton tree equals plain linearizability") {
    ExecTree t;
    t.nodes.push_back({});
    CHECK(check_strong_linearizable(t, reg).ok);
  }
  SUBCASE("the crafted obstruction refutes strong linearizability") {
    ObstructionTree ot = abd_obstruction_tree(0, 100000);
    StrongResult r = check_strong_linearizable(ot.tree, reg);
    CHECK_FALSE(r.ok);
    CHECK(r.witnessNode >= 0);
    CHECK_FALSE(r.witnessHist.empty());
  }
}

TEST_CASE("tail strong linearizability") {
  ObjectSpec reg = ObjectSpec::register_spec();
  ObstructionTree ot = abd_obstruction_tree(0, 100000);
  SUBCASE("with the abd preamble mapping the filtered tree passes") {
    TailResult r = check_tail_strong(ot.tree, reg, PreambleMapping::abd());
    CHECK(r.ok);
    CHECK(r.plainLinearizable);
    CHECK(r.filteredNodes > 1);
  }
  SUBCASE("with the trivial mapping it reduces to the strong check and fails") {
    TailResult r =
        check_tail_strong(ot.tree, reg, PreambleMapping::pi0({"read", "write"}));
    CHECK_FALSE(r.ok);
    CHECK(r.plainLinearizable);  // every node alone is linearizable
    CHECK_FALSE(r.strongOnFiltered.ok);
  }
  SUBCASE("with the full mapping it reduces to per-node linearizability and passes") {
    TailResult r = check_tail_strong(ot.tree, reg, PreambleMapping::full({"read", "write"}));
    CHECK(r.ok);
  }
}

TEST_CASE("canonical abd linearization") {
  auto info = [](int proc, int site, bool isWrite, Value arg, Timestamp ts, bool returned,
                 Value readVal, long seq) {
    AbdInvInfo i;
    i.inv = {proc, site, 0};
    i.isWrite = isWrite;
    i.arg = arg;
    i.ts = ts;
    i.returned = returned;
    i.readVal = readVal;
    i.assignSeq = seq;
    return i;
  };
  SUBCASE("returned write plus pending read of equal timestamp") {
    std::vector<AbdInvInfo> invs = {
        info(0, 0, true, kZero, {1, 0}, true, {}, 5),
        info(2, 0, false, {}, {1, 0}, false, kZero, 9),
    };
    Linearization lin = abd_canonical_linearization(invs);
    REQUIRE(lin.size() == 2);
    CHECK(lin[0].method == "write");
    CHECK(lin[1].method == "read");
    CHECK(lin[1].ret == kZero);
  }
  SUBCASE("a pending write above every returned timestamp is excluded") {
    std::vector<AbdInvInfo> invs = {
        info(0, 0, true, kZero, {1, 0}, true, {}, 5),
        info(1, 0, true, kOne, {2, 1}, false, {}, 9),
    };
    Linearization lin = abd_canonical_linearization(invs);
    REQUIRE(lin.size() == 1);
    CHECK(lin[0].inv == InvocationId{0, 0, 0});
  }
  SUBCASE("sequential executions linearize in program order") {
    ProgramPtr p = two_writer_reader_program();
    Bindings b = uniform_bindings(p->objectInit, ObjectConfig{ObjectKind::Abd, 0});
    InterleavingPolicy pol({0, 1, 2, 2});
    FixedTape tape;
    RunOptions opts;
    opts.recordSteps = true;
    RunResult r = run(p, b, pol, tape, opts);
    Linearization lin = abd_canonical_linearization(r.exec);
    REQUIRE(lin.size() == 4);
    CHECK(lin[0].inv == InvocationId{0, 0, 0});
    CHECK(lin[1].inv == InvocationId{1, 0, 0});
    CHECK(lin[2].inv == InvocationId{2, 0, 0});
    CHECK(lin[3].inv == InvocationId{2, 1, 0});
    CHECK(replay_linearization(lin, ObjectSpec::register_spec()));
  }
  SUBCASE("incomplete executions are rejected") {
    std::vector<AbdInvInfo> invs = {info(0, 0, true, kZero, {1, 0}, true, {}, 5)};
    invs.push_back(AbdInvInfo{{1, 0, 0}, true, kOne, std::nullopt, false, {}, -1});
    CHECK_THROWS_AS(abd_canonical_linearization(invs), Error);
  }
}

TEST_CASE("canonical linearization is prefix-preserving across the filtered tree") {
  ObstructionTree ot = abd_obstruction_tree(1, 300000);
  PreambleMapping pm = PreambleMapping::abd();
  auto kids = ot.tree.children();
  int pairs = 0;
  std::function<void(int, int)> walk = [&](int node, int lastComplete) {
    bool complete = tree_node_complete(ot.tree, node, pm);
    if (complete && lastComplete >= 0) {
      Linearization lp = abd_canonical_linearization(abd_invs_at(ot.tree, lastComplete));
      Linearization lc = abd_canonical_linearization(abd_invs_at(ot.tree, node));
      REQUIRE(lp.size() <= lc.size());
      for (size_t i = 0; i < lp.size(); ++i) {
        CHECK(lp[i].inv == lc[i].inv);
        CHECK(lp[i].ret == lc[i].ret);
      }
      ++pairs;
    }
    for (int k : kids[node]) walk(k, complete ? node : lastComplete);
  };
  walk(0, -1);
  CHECK(pairs > 50);
}

TEST_CASE("tree serialization round-trips") {
  ObstructionTree ot = abd_obstruction_tree(0, 100000);
  std::string text = tree_to_jsonl(ot.tree);
  ExecTree back = tree_from_jsonl(text);
  REQUIRE(back.nodes.size() == ot.tree.nodes.size());
  CHECK(tree_to_jsonl(back) == text);
}

TEST_CASE("fuzzing: seeded adversarial runs stay linearizable") {
  struct Driver {
    std::string name;
    ObjectConfig cfg;
  };
  std::vector<Driver> drivers = {
      {"abd", {ObjectKind::Abd, 0}},       {"abd2", {ObjectKind::Abd, 2}},
      {"abd3", {ObjectKind::Abd, 3}},      {"snapshot", {ObjectKind::Snapshot, 0}},
      {"va", {ObjectKind::Va, 0}},         {"il", {ObjectKind::Il, 0}},
  };
  for (const Driver& d : drivers) {
    ProgramPtr prog;
    ObjectSpec spec = ObjectSpec::register_spec();
    if (d.cfg.kind == ObjectKind::Il) {
      auto p = std::make_shared<Program>();
      p->n = 3;
      p->objectInit["O"] = Value::bot();
      p->procs.push_back({Instruction::writeObj("O", Expr::constant(kOne)),
                          Instruction::writeObj("O", Expr::constant(Value::integer(2)))});
      p->procs.push_back({Instruction::readObj("a", "O"), Instruction::readObj("b", "O")});
      p->procs.push_back({Instruction::readObj("c", "O")});
      p->number_sites();
      prog = p;
    } else {
      auto p = std::make_shared<Program>();
      p->n = 3;
      p->objectInit["O"] = Value::bot();
      p->procs.push_back({Instruction::writeObj("O", Expr::constant(kOne)),
                          Instruction::readObj("a", "O")});
      p->procs.push_back({Instruction::writeObj("O", Expr::constant(Value::integer(2))),
                          Instruction::readObj("b", "O")});
      p->procs.push_back({Instruction::readObj("c", "O"),
                          Instruction::writeObj("O", Expr::constant(Value::integer(3)))});
      p->number_sites();
      prog = p;
      if (d.cfg.kind == ObjectKind::Snapshot) spec = ObjectSpec::snapshot_spec(3);
    }
    Bindings b = uniform_bindings(prog->objectInit, d.cfg);
    int pass = 0;
    const int total = 300;
    for (int seed = 0; seed < total; ++seed) {
      RandomPolicy pol(9000 + seed);
      SeededTape tape(derive_trial_seed(2024, seed));
      RunResult r = run(prog, b, pol, tape, {});
      Hist h = history_events(project_history(r.exec));
      pass += check_linearizable(project_object(h, "O"), spec).ok;
    }
    CHECK(pass == total);
  }
}
