#include "blunt/program.hpp"

#include <algorithm>
#include <sstream>

#include "blunt/errors.hpp"

namespace blunt {

Value Expr::eval(const std::map<std::string, Value>& env) const {
  switch (op) {
    case Op::Const:
      return lit;
    case Op::Var: {
      auto it = env.find(var);
      if (it == env.end()) fail(Err::DomainError, "unbound variable " + var);
      return it->second;
    }
    case Op::Add:
    case Op::Sub: {
      Value a = args[0].eval(env), b = args[1].eval(env);
      if (!a.is_int() || !b.is_int()) return Value::bot();
      return Value::integer(op == Op::Add ? a.num + b.num : a.num - b.num);
    }
    case Op::Eq:
      return Value::integer(args[0].eval(env) == args[1].eval(env) ? 1 : 0);
    case Op::And: {
      Value a = args[0].eval(env), b = args[1].eval(env);
      bool ta = a.is_int() && a.num != 0, tb = b.is_int() && b.num != 0;
      return Value::integer(ta && tb ? 1 : 0);
    }
    case Op::Or: {
      Value a = args[0].eval(env), b = args[1].eval(env);
      bool ta = a.is_int() && a.num != 0, tb = b.is_int() && b.num != 0;
      return Value::integer(ta || tb ? 1 : 0);
    }
    case Op::Not: {
      Value a = args[0].eval(env);
      return Value::integer(a.is_int() && a.num != 0 ? 0 : 1);
    }
  }
  return Value::bot();
}

static std::string value_text(const Value& v) {
  switch (v.kind) {
    case Value::Kind::Bot:
      return "bot";
    case Value::Kind::Unit:
      return "unit";
    case Value::Kind::Int:
      return std::to_string(v.num);
    case Value::Kind::Vec: {
      std::string s = "(vec";
      for (const auto& x : v.items) s += " " + value_text(x);
      return s + ")";
    }
  }
  return "bot";
}

std::string Expr::str() const {
  switch (op) {
    case Op::Const:
      return value_text(lit);
    case Op::Var:
      return "$" + var;
    case Op::Add:
      return "(add " + args[0].str() + " " + args[1].str() + ")";
    case Op::Sub:
      return "(sub " + args[0].str() + " " + args[1].str() + ")";
    case Op::Eq:
      return "(eq " + args[0].str() + " " + args[1].str() + ")";
    case Op::And:
      return "(and " + args[0].str() + " " + args[1].str() + ")";
    case Op::Or:
      return "(or " + args[0].str() + " " + args[1].str() + ")";
    case Op::Not:
      return "(not " + args[0].str() + ")";
  }
  return "?";
}

Instruction Instruction::writeObj(std::string obj, Expr e) {
  Instruction i;
  i.kind = Kind::WriteObj;
  i.object = std::move(obj);
  i.expr = std::move(e);
  return i;
}
Instruction Instruction::readObj(std::string var, std::string obj) {
  Instruction i;
  i.kind = Kind::ReadObj;
  i.var = std::move(var);
  i.object = std::move(obj);
  return i;
}
Instruction Instruction::random(std::string var, std::vector<Value> domain) {
  if (domain.empty()) fail(Err::DomainError, "random domain must be nonempty");
  Instruction i;
  i.kind = Kind::Random;
  i.var = std::move(var);
  i.domain = std::move(domain);
  return i;
}
Instruction Instruction::branch(Expr cond, std::vector<Instruction> t, std::vector<Instruction> f) {
  Instruction i;
  i.kind = Kind::If;
  i.expr = std::move(cond);
  i.thenBranch = std::move(t);
  i.elseBranch = std::move(f);
  return i;
}
Instruction Instruction::loopForever() {
  Instruction i;
  i.kind = Kind::LoopForever;
  return i;
}
Instruction Instruction::terminate() {
  Instruction i;
  i.kind = Kind::Terminate;
  return i;
}

static void number_block(std::vector<Instruction>& block, int& next) {
  for (Instruction& ins : block) {
    ins.site = next++;
    if (ins.kind == Instruction::Kind::If) {
      number_block(ins.thenBranch, next);
      number_block(ins.elseBranch, next);
    }
  }
}

void Program::number_sites() {
  for (auto& proc : procs) {
    int next = 0;
    number_block(proc, next);
  }
}

ProgramPtr weakener() {
  auto p = std::make_shared<Program>();
  p->name = "weakener";
  p->n = 3;
  p->objectInit["C"] = Value::integer(-1);
  p->objectInit["R"] = Value::bot();

  // p0: R := 0
  p->procs.push_back({Instruction::writeObj("R", Expr::constant(Value::integer(0)))});
  // p1: R := 1; x := random{0,1}; C := x
  p->procs.push_back({
      Instruction::writeObj("R", Expr::constant(Value::integer(1))),
      Instruction::random("x", {Value::integer(0), Value::integer(1)}),
      Instruction::writeObj("C", Expr::variable("x")),
  });
  // p2: u1 := R; u2 := R; c := C; if (u1 = c and u2 = 1 - c) loop forever else terminate
  Expr cond = Expr::make(
      Expr::Op::And,
      {Expr::make(Expr::Op::Eq, {Expr::variable("u1"), Expr::variable("c")}),
       Expr::make(Expr::Op::Eq,
                  {Expr::variable("u2"),
                   Expr::make(Expr::Op::Sub,
                              {Expr::constant(Value::integer(1)), Expr::variable("c")})})});
  p->procs.push_back({
      Instruction::readObj("u1", "R"),
      Instruction::readObj("u2", "R"),
      Instruction::readObj("c", "C"),
      Instruction::branch(cond, {Instruction::loopForever()}, {Instruction::terminate()}),
  });
  p->number_sites();
  return p;
}

WeakenerSites weakener_sites() {
  // Pre-order numbering of the constructor above.
  return WeakenerSites{0, 0, 2, 0, 1, 2};
}

BadPredicate weakener_bad() {
  WeakenerSites s = weakener_sites();
  BadPredicate b;
  b.name = "weakener-bad";
  b.eval = [s](const Outcome& o) {
    auto get = [&o](int proc, int site) -> Value {
      auto it = o.returns.find(InvocationId{proc, site, 0});
      return it == o.returns.end() ? Value::bot() : it->second;
    };
    Value u1 = get(2, s.u1), u2 = get(2, s.u2), c = get(2, s.c);
    if (!c.is_int()) return false;
    Value want2 = Value::integer(1 - c.num);
    return u1 == c && u2 == want2;
  };
  return b;
}

static int max_random_block(const std::vector<Instruction>& block) {
  int count = 0;
  for (const Instruction& ins : block) {
    switch (ins.kind) {
      case Instruction::Kind::Random:
        count += 1;
        break;
      case Instruction::Kind::If:
        count += std::max(max_random_block(ins.thenBranch), max_random_block(ins.elseBranch));
        break;
      default:
        break;
    }
  }
  return count;
}

int max_random_steps(const Program& p) {
  int total = 0;
  for (const auto& proc : p.procs) total += max_random_block(proc);
  return total;
}

// ---------------------------------------------------------------------------
// Text format

static void format_block(const std::vector<Instruction>& block, int indent, std::string& out) {
  std::string pad(indent, ' ');
  for (const Instruction& ins : block) {
    switch (ins.kind) {
      case Instruction::Kind::WriteObj:
        out += pad + "write " + ins.object + " " + ins.expr.str() + "\n";
        break;
      case Instruction::Kind::ReadObj:
        out += pad + "read " + ins.var + " " + ins.object + "\n";
        break;
      case Instruction::Kind::Random: {
        out += pad + "random " + ins.var + " {";
        for (size_t i = 0; i < ins.domain.size(); ++i)
          out += (i ? " " : "") + value_text(ins.domain[i]);
        out += "}\n";
        break;
      }
      case Instruction::Kind::If:
        // single-instruction branches stay on one line; the weakener and
        // every driver in this artifact fit that shape
        if (ins.thenBranch.size() == 1 && ins.elseBranch.size() == 1 &&
            ins.thenBranch[0].kind != Instruction::Kind::If &&
            ins.elseBranch[0].kind != Instruction::Kind::If) {
          std::string t, e;
          format_block(ins.thenBranch, 0, t);
          format_block(ins.elseBranch, 0, e);
          if (!t.empty()) t.pop_back();
          if (!e.empty()) e.pop_back();
          out += pad + "if " + ins.expr.str() + " then " + t + " else " + e + "\n";
        } else {
          fail(Err::Internal, "only single-instruction branches serialize");
        }
        break;
      case Instruction::Kind::LoopForever:
        out += pad + "loopforever\n";
        break;
      case Instruction::Kind::Terminate:
        out += pad + "terminate\n";
        break;
    }
  }
}

std::string format_program(const Program& p) {
  std::string out = "program " + p.name + "\n";
  out += "objects";
  for (const auto& [name, init] : p.objectInit) out += " " + name + "=" + value_text(init);
  out += "\n";
  for (int i = 0; i < p.n; ++i) {
    out += "process " + std::to_string(i) + "\n";
    format_block(p.procs[i], 2, out);
  }
  return out;
}

namespace {

struct Lexer {
  std::vector<std::string> toks;
  size_t pos = 0;

  explicit Lexer(const std::string& line) {
    std::string cur;
    for (char ch : line) {
      if (ch == '(' || ch == ')' || ch == '{' || ch == '}') {
        if (!cur.empty()) toks.push_back(cur), cur.clear();
        toks.push_back(std::string(1, ch));
      } else if (isspace(static_cast<unsigned char>(ch))) {
        if (!cur.empty()) toks.push_back(cur), cur.clear();
      } else {
        cur += ch;
      }
    }
    if (!cur.empty()) toks.push_back(cur);
  }
  bool done() const { return pos >= toks.size(); }
  const std::string& peek() const {
    static const std::string kEnd = "<end>";
    return done() ? kEnd : toks[pos];
  }
  std::string next() {
    if (done()) fail(Err::ParseError, "unexpected end of line");
    return toks[pos++];
  }
  void expect(const std::string& t) {
    std::string got = next();
    if (got != t) fail(Err::ParseError, "expected '" + t + "', got '" + got + "'");
  }
};

Value parse_value(Lexer& lx);

Value parse_value_token(Lexer& lx, const std::string& tok) {
  if (tok == "bot") return Value::bot();
  if (tok == "unit") return Value::unit();
  if (tok == "(") {
    lx.expect("vec");
    std::vector<Value> xs;
    while (lx.peek() != ")") xs.push_back(parse_value(lx));
    lx.expect(")");
    return Value::vec(std::move(xs));
  }
  try {
    size_t used = 0;
    long long n = std::stoll(tok, &used);
    if (used == tok.size()) return Value::integer(n);
  } catch (...) {
  }
  fail(Err::ParseError, "bad value literal '" + tok + "'");
}

Value parse_value(Lexer& lx) { return parse_value_token(lx, lx.next()); }

Expr parse_expr(Lexer& lx) {
  std::string tok = lx.next();
  if (!tok.empty() && tok[0] == '$') return Expr::variable(tok.substr(1));
  if (tok == "(") {
    std::string op = lx.next();
    if (op == "vec") {
      std::vector<Value> xs;
      while (lx.peek() != ")") xs.push_back(parse_value(lx));
      lx.expect(")");
      return Expr::constant(Value::vec(std::move(xs)));
    }
    std::vector<Expr> args;
    while (lx.peek() != ")") args.push_back(parse_expr(lx));
    lx.expect(")");
    auto want = [&](size_t k) {
      if (args.size() != k) fail(Err::ParseError, op + " expects " + std::to_string(k) + " args");
    };
    if (op == "add") return want(2), Expr::make(Expr::Op::Add, std::move(args));
    if (op == "sub") return want(2), Expr::make(Expr::Op::Sub, std::move(args));
    if (op == "eq") return want(2), Expr::make(Expr::Op::Eq, std::move(args));
    if (op == "and") return want(2), Expr::make(Expr::Op::And, std::move(args));
    if (op == "or") return want(2), Expr::make(Expr::Op::Or, std::move(args));
    if (op == "not") return want(1), Expr::make(Expr::Op::Not, std::move(args));
    fail(Err::ParseError, "unknown operator '" + op + "'");
  }
  return Expr::constant(parse_value_token(lx, tok));
}

Instruction parse_instruction(Lexer& lx) {
  std::string head = lx.next();
  if (head == "write") {
    std::string obj = lx.next();
    return Instruction::writeObj(obj, parse_expr(lx));
  }
  if (head == "read") {
    std::string var = lx.next();
    return Instruction::readObj(var, lx.next());
  }
  if (head == "random") {
    std::string var = lx.next();
    lx.expect("{");
    std::vector<Value> dom;
    while (lx.peek() != "}") dom.push_back(parse_value(lx));
    lx.expect("}");
    return Instruction::random(var, std::move(dom));
  }
  if (head == "if") {
    Expr cond = parse_expr(lx);
    lx.expect("then");
    Instruction t = parse_instruction(lx);
    lx.expect("else");
    Instruction e = parse_instruction(lx);
    return Instruction::branch(std::move(cond), {std::move(t)}, {std::move(e)});
  }
  if (head == "loopforever") return Instruction::loopForever();
  if (head == "terminate") return Instruction::terminate();
  fail(Err::ParseError, "unknown instruction '" + head + "'");
}

}  // namespace

ProgramPtr parse_program(const std::string& text) {
  auto p = std::make_shared<Program>();
  std::istringstream in(text);
  std::string line;
  int lineNo = 0;
  bool sawHeader = false;
  while (std::getline(in, line)) {
    ++lineNo;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    Lexer lx(line);
    if (lx.done()) continue;
    try {
      std::string head = lx.peek();
      if (head == "program") {
        lx.next();
        p->name = lx.next();
        sawHeader = true;
      } else if (head == "objects") {
        lx.next();
        while (!lx.done()) {
          std::string tok = lx.next();
          size_t eq = tok.find('=');
          if (eq == std::string::npos) fail(Err::ParseError, "objects entries look like NAME=VALUE");
          std::string name = tok.substr(0, eq);
          std::string rest = tok.substr(eq + 1);
          Lexer vl(rest);
          p->objectInit[name] = parse_value(vl);
        }
      } else if (head == "process") {
        lx.next();
        int idx = std::stoi(lx.next());
        if (idx != p->n) fail(Err::ParseError, "processes must appear in order");
        p->n += 1;
        p->procs.emplace_back();
      } else {
        if (p->procs.empty()) fail(Err::ParseError, "instruction before any process section");
        p->procs.back().push_back(parse_instruction(lx));
      }
      if (!lx.done() && lx.peek() != "<end>" && head != "objects")
        ;  // trailing tokens are caught by individual parsers
    } catch (const Error& e) {
      if (e.code() == Err::ParseError)
        fail(Err::ParseError, "line " + std::to_string(lineNo) + ": " + e.what());
      throw;
    }
  }
  if (!sawHeader) fail(Err::ParseError, "missing 'program' header");
  p->number_sites();
  return p;
}

}  // namespace blunt
