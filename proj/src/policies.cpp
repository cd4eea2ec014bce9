#include "blunt/policies.hpp"

#include "blunt/errors.hpp"

namespace blunt {

Directive drain_directive(const EngineState& s) {
  for (int p = 0; p < s.program->n; ++p)
    if (step_ready(s, p)) return Directive::step(p);
  if (!s.net.inFlight.empty())
    return Directive::deliver(s.net.inFlight.front().dest, s.net.inFlight.front().id);
  fail(Err::Internal, "no runnable process and nothing in flight");
}

Directive RoundRobinPolicy::next(const EngineState& s) {
  int n = s.program->n;
  for (int i = 0; i < n; ++i) {
    int p = (cursor_ + i) % n;
    if (step_ready(s, p)) {
      cursor_ = (p + 1) % n;
      return Directive::step(p);
    }
  }
  if (!s.net.inFlight.empty())
    return Directive::deliver(s.net.inFlight.front().dest, s.net.inFlight.front().id);
  fail(Err::Internal, "round-robin: nothing schedulable");
}

Directive RandomPolicy::next(const EngineState& s) {
  std::vector<Directive> dirs = legal_directives(s);
  if (dirs.empty()) fail(Err::Internal, "random policy: nothing schedulable");
  return dirs[mix64(state_++) % dirs.size()];
}

Directive ScriptPolicy::next(const EngineState& s) {
  size_t i = static_cast<size_t>(s.directiveCount);
  if (i < script_.size()) return script_[i];
  return drain_directive(s);
}

Directive InterleavingPolicy::next(const EngineState& s) {
  for (;;) {
    if (idx_ >= order_.size()) return drain_directive(s);
    int p = order_[idx_];
    const ProcState& ps = s.procs[p];
    if (ps.frame) {
      midOp_ = true;
      if (step_ready(s, p)) return Directive::step(p);
      for (const Message& m : s.net.inFlight)
        if (m.dest == p || m.sender == p) return Directive::deliver(m.dest, m.id);
      fail(Err::Internal, "blocked operation with no messages to move");
    }
    if (!midOp_) {
      if (ps.status != ProcStatus::Running) {
        idx_ += 1;
        continue;
      }
      midOp_ = true;
      return Directive::step(p);
    }
    midOp_ = false;
    idx_ += 1;
  }
}

// --------------------------------------------------------------------------
// Crafted adversary schedules against the weakener.

namespace {

struct ScriptBuilder {
  std::vector<Directive> out;

  void step(int p) { out.push_back(Directive::step(p)); }
  void dq(int dest, const std::string& obj, int sender, int sn) {
    out.push_back(Directive::match(dest, obj, MsgTag::Query, sender, sn));
  }
  void dr(int dest, const std::string& obj, int sender, int sn) {
    out.push_back(Directive::match(dest, obj, MsgTag::Reply, sender, sn));
  }
  void du(int dest, const std::string& obj, int sender, int sn) {
    out.push_back(Directive::match(dest, obj, MsgTag::Update, sender, sn));
  }
  void da(int dest, const std::string& obj, int sender, int sn) {
    out.push_back(Directive::match(dest, obj, MsgTag::Ack, sender, sn));
  }

  /// Uninterfered ABD(^k) operation by `client` served by processes a and
  /// b; snBase is the client's phase counter before the call.
  void seq_op(int client, const std::string& obj, int k, int snBase, int a, int b) {
    step(client);  // call
    int sn = snBase;
    int iters = k >= 1 ? k : 1;
    for (int i = 0; i < iters; ++i) {
      sn += 1;
      step(client);  // query broadcast
      dq(a, obj, client, sn);
      dq(b, obj, client, sn);
      dr(client, obj, a, sn);
      dr(client, obj, b, sn);
      step(client);  // assign
    }
    if (k >= 1) step(client);  // pick
    sn += 1;
    step(client);  // update broadcast
    du(a, obj, client, sn);
    du(b, obj, client, sn);
    da(client, obj, a, sn);
    da(client, obj, b, sn);
    step(client);  // return
  }
};

class BranchingScriptPolicy : public AdversaryPolicy {
 public:
  BranchingScriptPolicy(std::string name, std::vector<Directive> prefix,
                        std::vector<Directive> onZero, std::vector<Directive> onOne)
      : name_(std::move(name)),
        prefix_(std::move(prefix)),
        onZero_(std::move(onZero)),
        onOne_(std::move(onOne)) {}

  Directive next(const EngineState& s) override {
    size_t i = static_cast<size_t>(s.directiveCount);
    if (i < prefix_.size()) return prefix_[i];
    long long coin = -1;
    for (const auto& [origin, v] : s.observed)
      if (origin == RandomOrigin::Program) {
        coin = v.num;
        break;
      }
    if (coin < 0) fail(Err::Internal, name_ + ": coin not observed after prefix");
    const auto& branch = coin == 0 ? onZero_ : onOne_;
    size_t j = i - prefix_.size();
    if (j < branch.size()) return branch[j];
    return drain_directive(s);
  }

  std::unique_ptr<AdversaryPolicy> clone() const override {
    return std::make_unique<BranchingScriptPolicy>(*this);
  }
  std::string name() const override { return name_; }

 private:
  std::string name_;
  std::vector<Directive> prefix_, onZero_, onOne_;
};

void require_weakener(const Program& program, const Bindings& bindings, int k) {
  if (program.name != "weakener" || program.n != 3)
    fail(Err::WrongConfiguration, "crafted policy applies to the 3-process weakener only");
  for (const char* name : {"R", "C"}) {
    auto it = bindings.find(name);
    if (it == bindings.end() || it->second.kind != ObjectKind::Abd || it->second.k != k)
      fail(Err::WrongConfiguration,
           std::string("crafted policy needs ") + name + " bound to abd with k=" +
               std::to_string(k));
  }
}

void append_c_suffix(ScriptBuilder& b, int k) {
  b.seq_op(1, "C", k, 0, 0, 1);  // p1 writes the coin to C
  b.seq_op(2, "C", k, 0, 0, 1);  // p2 reads C
  b.step(2);                     // branch on the test
  b.step(2);                     // loop forever (bad) or terminate
}

}  // namespace

std::unique_ptr<AdversaryPolicy> crafted_abd_weakener_policy(const Program& program,
                                                             const Bindings& bindings) {
  require_weakener(program, bindings, 0);

  ScriptBuilder pre;
  // p0's Write(0) starts; its query reaches only p0 itself.
  pre.step(0);                // call W0
  pre.step(0);                // query broadcast, sn 1
  pre.dq(0, "R", 0, 1);
  pre.dr(0, "R", 0, 1);       // first reply: bot,(0,0) from itself
  // p1's Write(1) runs its whole query phase.
  pre.step(1);                // call W1
  pre.step(1);                // query broadcast, sn 1
  pre.dq(0, "R", 1, 1);
  pre.dq(1, "R", 1, 1);
  pre.dq(2, "R", 1, 1);
  pre.dr(1, "R", 0, 1);
  pre.dr(1, "R", 1, 1);
  pre.dr(1, "R", 2, 1);
  pre.step(1);                // assign t = 0
  pre.step(1);                // update broadcast (1,(1,1)), sn 2
  // p2's first Read starts; p0 replies before seeing p1's update.
  pre.step(2);                // call R1
  pre.step(2);                // query broadcast, sn 1
  pre.dq(0, "R", 2, 1);
  pre.dr(2, "R", 0, 1);
  // p1 completes its Write with acks from p0 and itself, then flips.
  pre.du(0, "R", 1, 2);
  pre.du(1, "R", 1, 2);
  pre.da(1, "R", 0, 2);
  pre.da(1, "R", 1, 2);
  pre.step(1);                // W1 returns
  pre.step(1);                // coin flip

  // Case 1 (coin 0): R1 returns 0, R2 returns 1.
  ScriptBuilder c0;
  c0.dq(2, "R", 0, 1);        // p2's server replies bot to W0's pending query
  c0.dr(0, "R", 2, 1);
  c0.step(0);                 // W0 assign t = 0
  c0.step(0);                 // update broadcast (0,(1,0)), sn 2
  c0.du(0, "R", 0, 2);
  c0.du(2, "R", 0, 2);        // p2's server adopts (0,(1,0))
  c0.da(0, "R", 0, 2);
  c0.da(0, "R", 2, 2);
  c0.step(0);                 // W0 returns
  c0.dq(2, "R", 2, 1);        // R1's own query now sees (0,(1,0))
  c0.dr(2, "R", 2, 1);
  c0.step(2);                 // R1 assign (0,(1,0))
  c0.step(2);                 // write-back, sn 2
  c0.du(0, "R", 2, 2);
  c0.du(2, "R", 2, 2);
  c0.da(2, "R", 0, 2);
  c0.da(2, "R", 2, 2);
  c0.step(2);                 // R1 returns 0
  c0.seq_op(2, "R", 0, 2, 0, 1);  // R2 served by p0,p1: returns 1
  append_c_suffix(c0, 0);

  // Case 2 (coin 1): R1 returns 1, R2 returns 0.
  ScriptBuilder c1;
  c1.dq(1, "R", 0, 1);        // p1's server replies (1,(1,1)) to W0
  c1.dr(0, "R", 1, 1);
  c1.step(0);                 // W0 assign t = 1
  c1.dq(1, "R", 2, 1);        // p1's server replies (1,(1,1)) to R1
  c1.dr(2, "R", 1, 1);
  c1.step(2);                 // R1 assign (1,(1,1))
  c1.step(2);                 // write-back, sn 2
  c1.du(0, "R", 2, 2);
  c1.du(1, "R", 2, 2);
  c1.da(2, "R", 0, 2);
  c1.da(2, "R", 1, 2);
  c1.step(2);                 // R1 returns 1
  c1.step(0);                 // W0 update broadcast (0,(2,0)), sn 2
  c1.du(0, "R", 0, 2);
  c1.du(1, "R", 0, 2);
  c1.du(2, "R", 0, 2);
  c1.da(0, "R", 0, 2);
  c1.da(0, "R", 1, 2);
  c1.da(0, "R", 2, 2);
  c1.step(0);                 // W0 returns
  c1.seq_op(2, "R", 0, 2, 0, 1);  // R2 served by p0,p1: returns 0
  append_c_suffix(c1, 0);

  return std::make_unique<BranchingScriptPolicy>("crafted-abd", std::move(pre.out),
                                                 std::move(c0.out), std::move(c1.out));
}

std::unique_ptr<AdversaryPolicy> crafted_abd2_policy(const Program& program,
                                                     const Bindings& bindings) {
  require_weakener(program, bindings, 2);

  ScriptBuilder pre;
  // W1 runs both query phases against untouched servers and broadcasts
  // its update.
  pre.step(1);                // call W1
  pre.step(1);                // query 1, sn 1
  pre.dq(0, "R", 1, 1);
  pre.dq(1, "R", 1, 1);
  pre.dq(2, "R", 1, 1);
  pre.dr(1, "R", 0, 1);
  pre.dr(1, "R", 1, 1);
  pre.dr(1, "R", 2, 1);
  pre.step(1);                // assign t[1] = 0
  pre.step(1);                // query 2, sn 2
  pre.dq(0, "R", 1, 2);
  pre.dq(1, "R", 1, 2);
  pre.dq(2, "R", 1, 2);
  pre.dr(1, "R", 0, 2);
  pre.dr(1, "R", 1, 2);
  pre.dr(1, "R", 2, 2);
  pre.step(1);                // assign t[2] = 0
  pre.step(1);                // pick (both iterations agree)
  pre.step(1);                // update broadcast (1,(1,1)), sn 3
  // W0 finishes query 1 with bot replies and leaves query 2 pending with
  // two frozen bot replies in flight.
  pre.step(0);                // call W0
  pre.step(0);                // query 1, sn 1
  pre.dq(0, "R", 0, 1);
  pre.dq(2, "R", 0, 1);
  pre.dr(0, "R", 0, 1);
  pre.dr(0, "R", 2, 1);
  pre.step(0);                // assign t[1] = 0
  pre.step(0);                // query 2, sn 2
  pre.dq(0, "R", 0, 2);       // bot reply frozen in flight
  pre.dq(2, "R", 0, 2);       // bot reply frozen in flight
  // R1 starts and banks one bot reply.
  pre.step(2);                // call R1
  pre.step(2);                // query 1, sn 1
  pre.dq(0, "R", 2, 1);
  pre.dr(2, "R", 0, 1);
  // W1 completes against p0, p1; p1 flips.
  pre.du(0, "R", 1, 3);
  pre.du(1, "R", 1, 3);
  pre.da(1, "R", 0, 3);
  pre.da(1, "R", 1, 3);
  pre.step(1);                // W1 returns
  pre.step(1);                // coin flip

  // Case coin 0: fix ts(W0) = (1,0); gamble on R1's iteration choice.
  ScriptBuilder c0;
  c0.dr(0, "R", 0, 2);        // frozen bot
  c0.dr(0, "R", 2, 2);        // frozen bot
  c0.step(0);                 // assign t[2] = 0
  c0.step(0);                 // pick: t = 0 either way
  c0.step(0);                 // update (0,(1,0)), sn 3
  c0.du(2, "R", 0, 3);        // p2's server adopts (0,(1,0))
  c0.du(0, "R", 0, 3);
  c0.da(0, "R", 2, 3);
  c0.da(0, "R", 0, 3);
  c0.step(0);                 // W0 returns
  c0.dq(2, "R", 2, 1);        // R1's own query: (0,(1,0))
  c0.dr(2, "R", 2, 1);
  c0.step(2);                 // assign v[1] = (0,(1,0))
  c0.step(2);                 // query 2, sn 2
  c0.dq(0, "R", 2, 2);
  c0.dq(1, "R", 2, 2);
  c0.dr(2, "R", 0, 2);
  c0.dr(2, "R", 1, 2);
  c0.step(2);                 // assign v[2] = (1,(1,1))
  c0.step(2);                 // pick: u1 = 0 iff iteration 1 chosen
  c0.step(2);                 // write-back, sn 3
  c0.du(0, "R", 2, 3);
  c0.du(1, "R", 2, 3);
  c0.da(2, "R", 0, 3);
  c0.da(2, "R", 1, 3);
  c0.step(2);                 // R1 returns
  c0.seq_op(2, "R", 2, 3, 0, 1);  // R2 served by p0,p1: returns 1
  append_c_suffix(c0, 2);

  // Case coin 1: R1 returns 1 surely; gamble on W0's iteration choice.
  ScriptBuilder c1;
  c1.dq(1, "R", 2, 1);        // R1 query 1 completed by p1's (1,(1,1))
  c1.dr(2, "R", 1, 1);
  c1.step(2);                 // assign v[1] = (1,(1,1))
  c1.step(2);                 // query 2, sn 2
  c1.dq(0, "R", 2, 2);
  c1.dq(1, "R", 2, 2);
  c1.dr(2, "R", 0, 2);
  c1.dr(2, "R", 1, 2);
  c1.step(2);                 // assign v[2] = (1,(1,1))
  c1.step(2);                 // pick (agreeing iterations)
  c1.step(2);                 // write-back, sn 3
  c1.du(0, "R", 2, 3);
  c1.du(1, "R", 2, 3);
  c1.da(2, "R", 0, 3);
  c1.da(2, "R", 1, 3);
  c1.step(2);                 // R1 returns 1
  c1.dq(1, "R", 0, 2);        // W0 query 2 sees W1 via p1
  c1.dr(0, "R", 1, 2);
  c1.dr(0, "R", 0, 2);        // plus the frozen bot
  c1.step(0);                 // assign t[2] = 1
  c1.step(0);                 // pick: ts = (2,0) iff iteration 2 chosen
  c1.step(0);                 // update (0,ts), sn 3
  c1.du(0, "R", 0, 3);
  c1.du(1, "R", 0, 3);
  c1.du(2, "R", 0, 3);
  c1.da(0, "R", 0, 3);
  c1.da(0, "R", 1, 3);
  c1.da(0, "R", 2, 3);
  c1.step(0);                 // W0 returns
  c1.seq_op(2, "R", 2, 3, 0, 1);  // R2: returns 0 iff ts(W0) = (2,0)
  append_c_suffix(c1, 2);

  return std::make_unique<BranchingScriptPolicy>("crafted-abd2", std::move(pre.out),
                                                 std::move(c0.out), std::move(c1.out));
}

}  // namespace blunt
