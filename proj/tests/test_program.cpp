#include <doctest.h>

#include "blunt/errors.hpp"
#include "blunt/program.hpp"

using namespace blunt;

TEST_CASE("weakener shape") {
  ProgramPtr p = weakener();
  CHECK(p->n == 3);
  CHECK(p->procs.size() == 3);
  CHECK(p->objectInit.size() == 2);
  CHECK(p->objectInit.count("R") == 1);
  CHECK(p->objectInit.count("C") == 1);
  CHECK(p->objectInit.at("R") == Value::bot());
  CHECK(p->objectInit.at("C") == Value::integer(-1));
  CHECK(max_random_steps(*p) == 1);
}

TEST_CASE("weakener bad predicate") {
  BadPredicate bad = weakener_bad();
  WeakenerSites s = weakener_sites();
  auto outcomeWith = [&](Value u1, Value u2, Value c) {
    Outcome o;
    o.returns[{2, s.u1, 0}] = u1;
    o.returns[{2, s.u2, 0}] = u2;
    o.returns[{2, s.c, 0}] = c;
    o.terminal = {ProcStatus::Terminated, ProcStatus::Terminated, ProcStatus::Terminated};
    return o;
  };
  CHECK(bad.eval(outcomeWith(Value::integer(0), Value::integer(1), Value::integer(0))));
  CHECK_FALSE(bad.eval(outcomeWith(Value::bot(), Value::integer(1), Value::integer(0))));
  CHECK_FALSE(bad.eval(outcomeWith(Value::integer(1), Value::integer(1), Value::integer(1))));
  // total on sparse outcomes
  Outcome empty;
  empty.terminal = {ProcStatus::Running, ProcStatus::Running, ProcStatus::Running};
  CHECK_FALSE(bad.eval(empty));
  // c = -1 (unwritten): 1 - c = 2 which no read returns
  CHECK_FALSE(bad.eval(outcomeWith(Value::integer(0), Value::integer(1), Value::integer(-1))));
}

TEST_CASE("max random steps") {
  CHECK(max_random_steps(*weakener()) == 1);

  Program none;
  none.n = 1;
  none.procs.push_back({Instruction::terminate()});
  none.number_sites();
  CHECK(max_random_steps(none) == 0);

  Program two;
  two.n = 1;
  two.procs.push_back({
      Instruction::random("x", {Value::integer(0), Value::integer(1)}),
      Instruction::random("y", {Value::integer(0), Value::integer(1)}),
      Instruction::terminate(),
  });
  two.number_sites();
  CHECK(max_random_steps(two) == 2);

  // branches count by path maximum
  Program branchy;
  branchy.n = 1;
  branchy.procs.push_back({
      Instruction::random("x", {Value::integer(0), Value::integer(1)}),
      Instruction::branch(Expr::variable("x"),
                          {Instruction::random("y", {Value::integer(0), Value::integer(1)}),
                           Instruction::terminate()},
                          {Instruction::terminate()}),
  });
  branchy.number_sites();
  CHECK(max_random_steps(branchy) == 2);
}

TEST_CASE("expression evaluation") {
  std::map<std::string, Value> env;
  env["c"] = Value::integer(0);
  env["u"] = Value::bot();
  Expr oneMinusC = Expr::make(Expr::Op::Sub, {Expr::constant(Value::integer(1)), Expr::variable("c")});
  CHECK(oneMinusC.eval(env) == Value::integer(1));
  Expr eqBot = Expr::make(Expr::Op::Eq, {Expr::variable("u"), Expr::variable("c")});
  CHECK(eqBot.eval(env) == Value::integer(0));  // bot never equals an integer
  Expr botArith = Expr::make(Expr::Op::Add, {Expr::variable("u"), Expr::constant(Value::integer(1))});
  CHECK(botArith.eval(env) == Value::bot());
  CHECK_THROWS_AS(Expr::variable("missing").eval(env), Error);
}

TEST_CASE("program text round-trip") {
  ProgramPtr p = weakener();
  std::string text = format_program(*p);
  ProgramPtr q = parse_program(text);
  CHECK(format_program(*q) == text);
  CHECK(q->n == p->n);
  CHECK(q->objectInit == p->objectInit);
  CHECK(max_random_steps(*q) == 1);
  // site numbering is syntax-derived, hence stable across the round-trip
  for (int i = 0; i < p->n; ++i) {
    REQUIRE(q->procs[i].size() == p->procs[i].size());
    for (size_t j = 0; j < p->procs[i].size(); ++j)
      CHECK(q->procs[i][j].site == p->procs[i][j].site);
  }
}

TEST_CASE("program parse errors carry line numbers") {
  CHECK_THROWS_AS(parse_program("program x\nprocess 0\n  frobnicate\n"), Error);
  try {
    parse_program("program x\nprocess 0\n  frobnicate\n");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_program("process 0\n  terminate\n"), Error);
  CHECK_THROWS_AS(Instruction::random("x", {}), Error);
}
