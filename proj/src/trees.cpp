#include "blunt/trees.hpp"

#include <functional>
#include <sstream>

#include "blunt/errors.hpp"

namespace blunt {

namespace {

class CollectSink : public StepSink {
 public:
  void emit(const Step& s) override { steps.push_back(s); }
  std::vector<Step> steps;
};

void check_no_randomness(const EngineState& s, const Directive& d) {
  if (sample_domain(s, d))
    fail(Err::WrongConfiguration, "execution trees require randomness-free configurations");
}

}  // namespace

ExecTree enumerate_tree(ProgramPtr program, const Bindings& bindings, const TreeOptions& opts) {
  ExecTree t;
  t.nodes.push_back({});
  EngineState root = init_state(std::move(program), bindings);
  std::function<void(const EngineState&, int, int)> rec = [&](const EngineState& s, int node,
                                                              int depth) {
    if (depth >= opts.maxDepth || s.all_terminal()) return;
    for (const Directive& d : legal_directives(s)) {
      if (static_cast<long>(t.nodes.size()) >= opts.maxNodes)
        fail(Err::TreeTooLarge, "node cap " + std::to_string(opts.maxNodes) + " hit");
      check_no_randomness(s, d);
      EngineState child = s;
      CollectSink sink;
      apply(child, d, nullptr, &sink);
      ExecTree::Node n;
      n.parent = node;
      n.steps = std::move(sink.steps);
      t.nodes.push_back(std::move(n));
      rec(child, static_cast<int>(t.nodes.size()) - 1, depth + 1);
    }
  };
  rec(root, 0, 0);
  return t;
}

ExecTree tree_from_scripts(ProgramPtr program, const Bindings& bindings,
                           const std::vector<std::vector<Directive>>& scripts) {
  ExecTree t;
  t.nodes.push_back({});
  // states per node, kept only while building
  std::vector<EngineState> states;
  states.push_back(init_state(program, bindings));
  std::vector<std::vector<std::pair<std::string, int>>> edges(1);

  for (const auto& script : scripts) {
    int node = 0;
    for (const Directive& d : script) {
      Directive rd = resolve_directive(states[node], d);
      std::string key = rd.str();
      int next = -1;
      for (const auto& [k, child] : edges[node])
        if (k == key) next = child;
      if (next < 0) {
        check_no_randomness(states[node], rd);
        EngineState child = states[node];
        CollectSink sink;
        apply(child, rd, nullptr, &sink);
        ExecTree::Node n;
        n.parent = node;
        n.steps = std::move(sink.steps);
        t.nodes.push_back(std::move(n));
        next = static_cast<int>(t.nodes.size()) - 1;
        states.push_back(std::move(child));
        edges[node].push_back({key, next});
        edges.emplace_back();
      }
      node = next;
    }
  }
  return t;
}

void extend_exhaustive(ExecTree& t, ProgramPtr program, const Bindings& bindings, int extraDepth,
                       long maxNodes) {
  if (extraDepth <= 0) return;
  // replay each original node's directives to recover its state
  size_t original = t.nodes.size();
  for (size_t node = 0; node < original; ++node) {
    std::vector<int> path;
    for (int n = static_cast<int>(node); n > 0; n = t.nodes[n].parent) path.push_back(n);
    std::reverse(path.begin(), path.end());
    EngineState s = init_state(program, bindings);
    bool replayable = true;
    for (int n : path) {
      // recover the directive from the recorded steps
      const std::vector<Step>& steps = t.nodes[n].steps;
      if (steps.empty()) {
        replayable = false;
        break;
      }
      Directive d = steps[0].kind == StepKind::Deliver
                        ? Directive::deliver(steps[0].proc, steps[0].msgId)
                        : Directive::step(steps[0].proc);
      apply(s, d, nullptr, nullptr);
    }
    if (!replayable) continue;
    std::function<void(const EngineState&, int, int)> rec = [&](const EngineState& st, int at,
                                                                int depth) {
      if (depth >= extraDepth || st.all_terminal()) return;
      for (const Directive& d : legal_directives(st)) {
        if (static_cast<long>(t.nodes.size()) >= maxNodes)
          fail(Err::TreeTooLarge, "node cap hit while padding");
        check_no_randomness(st, d);
        EngineState child = st;
        CollectSink sink;
        apply(child, d, nullptr, &sink);
        ExecTree::Node n;
        n.parent = at;
        n.steps = std::move(sink.steps);
        t.nodes.push_back(std::move(n));
        rec(child, static_cast<int>(t.nodes.size()) - 1, depth + 1);
      }
    };
    rec(s, static_cast<int>(node), 0);
  }
}

ProgramPtr two_writer_reader_program() {
  auto p = std::make_shared<Program>();
  p->name = "two-writers-one-reader";
  p->n = 3;
  p->objectInit["R"] = Value::bot();
  p->procs.push_back({Instruction::writeObj("R", Expr::constant(Value::integer(0)))});
  p->procs.push_back({Instruction::writeObj("R", Expr::constant(Value::integer(1)))});
  p->procs.push_back({
      Instruction::readObj("u", "R"),
      Instruction::readObj("v", "R"),
  });
  p->number_sites();
  return p;
}

ObstructionTree abd_obstruction_tree(int padDepth, long maxNodes) {
  ObstructionTree out;
  out.program = two_writer_reader_program();
  out.bindings = uniform_bindings(out.program->objectInit, ObjectConfig{ObjectKind::Abd, 0});

  auto S = [](int p) { return Directive::step(p); };
  auto D = [](int dest, MsgTag tag, int sender, int sn) {
    return Directive::match(dest, "R", tag, sender, sn);
  };
  using T = MsgTag;

  // Common prefix: W1 queries {p1,p2} and broadcasts (1,(1,1)); its update
  // reaches only p2. W0 banks a single stale bot reply from p1 and stays
  // mid-query. The reader queries {p1,p2}, writes back (1,(1,1)) through
  // {p1,p2}, and returns 1.
  std::vector<Directive> prefix = {
      S(1), S(1),                                      // call W1, query broadcast
      D(1, T::Query, 1, 1), D(2, T::Query, 1, 1),      //
      D(1, T::Reply, 1, 1), D(1, T::Reply, 2, 1),      //
      S(1),                                            // assign t=0 -> ts (1,1)
      S(1),                                            // update broadcast (1,(1,1))
      D(2, T::Update, 1, 2),                           // only p2 adopts
      S(0), S(0),                                      // call W0, query broadcast
      D(1, T::Query, 0, 1), D(0, T::Reply, 1, 1),      // one bot reply; still pending
      S(2), S(2),                                      // call R, query broadcast
      D(2, T::Query, 2, 1), D(1, T::Query, 2, 1),      //
      D(2, T::Reply, 2, 1), D(2, T::Reply, 1, 1),      //
      S(2),                                            // assign (1,(1,1))
      S(2),                                            // write-back broadcast
      D(2, T::Update, 2, 2), D(1, T::Update, 2, 2),    //
      D(2, T::Ack, 2, 2), D(2, T::Ack, 1, 2),          //
      S(2),                                            // R returns 1
  };

  // Extension X: W0's pending query completes with the bot reply from p0,
  // fixing ts(W0) = (1,0); the second read then returns 1.
  std::vector<Directive> extX = {
      D(0, T::Query, 0, 1), D(0, T::Reply, 0, 1),
      S(0),                                          // assign t=0 -> ts (1,0)
      S(0),                                          // update broadcast (0,(1,0))
      D(0, T::Update, 0, 2), D(1, T::Update, 0, 2),  //
      D(0, T::Ack, 0, 2), D(0, T::Ack, 1, 2),        //
      S(0),                                          // W0 returns
      S(2), S(2),                                    // call R2, query broadcast
      D(1, T::Query, 2, 3), D(2, T::Query, 2, 3),    //
      D(2, T::Reply, 1, 3), D(2, T::Reply, 2, 3),    //
      S(2),                                          // assign (1,(1,1))
      S(2),                                          // write-back
      D(1, T::Update, 2, 4), D(2, T::Update, 2, 4),  //
      D(2, T::Ack, 1, 4), D(2, T::Ack, 2, 4),        //
      S(2),                                          // R2 returns 1
  };

  // Extension Y: W0's pending query instead sees (1,(1,1)) via p2, fixing
  // ts(W0) = (2,0); its update saturates every server and the second read
  // returns 0.
  std::vector<Directive> extY = {
      D(2, T::Query, 0, 1), D(0, T::Reply, 2, 1),
      S(0),                                          // assign t=1 -> ts (2,0)
      S(0),                                          // update broadcast (0,(2,0))
      D(0, T::Update, 0, 2), D(1, T::Update, 0, 2), D(2, T::Update, 0, 2),
      D(0, T::Ack, 0, 2), D(0, T::Ack, 1, 2),        //
      S(0),                                          // W0 returns
      S(2), S(2),                                    // call R2, query broadcast
      D(1, T::Query, 2, 3), D(2, T::Query, 2, 3),    //
      D(2, T::Reply, 1, 3), D(2, T::Reply, 2, 3),    //
      S(2),                                          // assign (0,(2,0))
      S(2),                                          // write-back
      D(1, T::Update, 2, 4), D(2, T::Update, 2, 4),  //
      D(2, T::Ack, 1, 4), D(2, T::Ack, 2, 4),        //
      S(2),                                          // R2 returns 0
  };

  std::vector<Directive> sx = prefix, sy = prefix;
  sx.insert(sx.end(), extX.begin(), extX.end());
  sy.insert(sy.end(), extY.begin(), extY.end());
  out.tree = tree_from_scripts(out.program, out.bindings, {sx, sy});
  out.commonPrefixNode = static_cast<int>(prefix.size());
  extend_exhaustive(out.tree, out.program, out.bindings, padDepth, maxNodes);
  return out;
}

std::string tree_to_jsonl(const ExecTree& t) {
  std::string out;
  for (size_t i = 0; i < t.nodes.size(); ++i) {
    nlohmann::ordered_json j;
    j["node"] = i;
    j["parent"] = t.nodes[i].parent < 0 ? nlohmann::ordered_json(nullptr)
                                        : nlohmann::ordered_json(t.nodes[i].parent);
    nlohmann::ordered_json steps = nlohmann::ordered_json::array();
    for (const Step& s : t.nodes[i].steps) steps.push_back(s.to_json());
    j["steps"] = steps;
    out += j.dump();
    out += "\n";
  }
  return out;
}

ExecTree tree_from_jsonl(const std::string& text) {
  ExecTree t;
  std::istringstream in(text);
  std::string line;
  long lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::ordered_json::parse(line);
      ExecTree::Node n;
      n.parent = j.at("parent").is_null() ? -1 : j.at("parent").get<int>();
      for (const auto& sj : j.at("steps")) n.steps.push_back(Step::from_json(sj));
      size_t idx = j.at("node").get<size_t>();
      if (idx != t.nodes.size())
        fail(Err::ParseError, "tree nodes must be listed in index order");
      t.nodes.push_back(std::move(n));
    } catch (const Error&) {
      throw;
    } catch (const std::exception& ex) {
      fail(Err::ParseError, "line " + std::to_string(lineNo) + ": " + ex.what());
    }
  }
  if (t.nodes.empty() || t.nodes[0].parent != -1)
    fail(Err::ParseError, "tree must start with a parentless root");
  return t;
}

}  // namespace blunt
