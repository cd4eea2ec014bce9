#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "blunt/execution.hpp"
#include "blunt/value.hpp"

namespace blunt {

/// Expressions over process-local variables, constants, arithmetic and
/// equality. Arithmetic on non-integers yields bot; equality is
/// structural; a condition is true iff it evaluates to a nonzero integer.
struct Expr {
  enum class Op { Const, Var, Add, Sub, Eq, And, Or, Not };
  Op op = Op::Const;
  Value lit;
  std::string var;
  std::vector<Expr> args;

  static Expr constant(Value v) {
    Expr e;
    e.op = Op::Const;
    e.lit = std::move(v);
    return e;
  }
  static Expr variable(std::string name) {
    Expr e;
    e.op = Op::Var;
    e.var = std::move(name);
    return e;
  }
  static Expr make(Op op, std::vector<Expr> args) {
    Expr e;
    e.op = op;
    e.args = std::move(args);
    return e;
  }

  Value eval(const std::map<std::string, Value>& env) const;
  std::string str() const;
};

struct Instruction {
  enum class Kind { WriteObj, ReadObj, Random, If, LoopForever, Terminate };
  Kind kind = Kind::Terminate;
  std::string object;          // WriteObj/ReadObj
  std::string var;             // ReadObj/Random target
  Expr expr;                   // WriteObj argument, If condition
  std::vector<Value> domain;   // Random
  std::vector<Instruction> thenBranch, elseBranch;  // If
  int site = -1;               // pre-order control-point index, per process

  static Instruction writeObj(std::string obj, Expr e);
  static Instruction readObj(std::string var, std::string obj);
  static Instruction random(std::string var, std::vector<Value> domain);
  static Instruction branch(Expr cond, std::vector<Instruction> t, std::vector<Instruction> f);
  static Instruction loopForever();
  static Instruction terminate();
};

struct Program {
  std::string name = "program";
  int n = 0;
  std::vector<std::vector<Instruction>> procs;
  std::map<std::string, Value> objectInit;

  /// Assigns pre-order site indices; must run after construction.
  void number_sites();
};

using ProgramPtr = std::shared_ptr<const Program>;

/// The three-process weakener: p0 and p1 write their ids to R, p1 flips
/// a coin into C, p2 reads R twice and C once and loops forever iff
/// u1 = c and u2 = 1 - c.
ProgramPtr weakener();

/// Sites of the weakener's interesting invocations, for outcome lookups.
struct WeakenerSites {
  int w0, w1, wc;        // writes: p0 R, p1 R, p1 C
  int u1, u2, c;         // p2's reads
};
WeakenerSites weakener_sites();

struct BadPredicate {
  std::string name;
  std::function<bool(const Outcome&)> eval;
};

/// Bad outcome set B of the weakener: u1 = c and u2 = 1 - c.
BadPredicate weakener_bad();

/// Exact path-maximum number of Random instructions (program randomness
/// only); the DSL is loop-free so this is always finite.
int max_random_steps(const Program& p);

/// Structured-text serialization: one process per section, one
/// instruction per line, s-expression syntax for expressions.
std::string format_program(const Program& p);
ProgramPtr parse_program(const std::string& text);

}  // namespace blunt
