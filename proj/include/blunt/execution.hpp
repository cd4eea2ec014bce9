#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "blunt/tape.hpp"
#include "blunt/value.hpp"

#include <json.hpp>

namespace blunt {

enum class StepKind { Local, Random, Call, Return, Send, Deliver, Access };

enum class MsgTag { Query, Reply, Update, Ack };

const char* step_kind_name(StepKind k);
const char* tag_name(MsgTag t);
MsgTag tag_from_name(const std::string& s);

/// Control points of the object implementations. Program steps use the
/// per-process instruction index; object steps use this space (>= 1000)
/// so the two never collide.
enum ObjSite : int {
  SITE_CALL = 1001,    // initial control point of every method
  SITE_RETURN = 1002,  // final control point of every method

  ABD_QUERY_BROADCAST = 1010,
  ABD_QUERY_ASSIGN = 1011,  // assignment of the query-phase result
  ABD_PICK = 1012,
  ABD_UPDATE_BROADCAST = 1013,
  ABD_SRV_QUERY = 1020,
  ABD_SRV_UPDATE = 1021,
  ABD_CLI_REPLY = 1022,
  ABD_CLI_ACK = 1023,
  ABD_STALE = 1024,

  SNAP_COLLECT_READ = 1030,
  SNAP_DECIDE = 1031,  // scan result fixed, just before return
  SNAP_PICK = 1032,
  SNAP_WRITE = 1033,
  SNAP_COMPARE = 1034,  // inconclusive double-collect comparison

  VA_COLLECT = 1040,
  VA_READ_DECIDE = 1041,
  VA_WRITE_DECIDE = 1042,
  VA_PICK = 1043,
  VA_WRITE = 1044,

  IL_READ_VAL = 1050,
  IL_READ_REPORT = 1051,
  IL_DECIDE = 1052,  // max-seq pair fixed, before the first Report write
  IL_PICK = 1053,
  IL_WRITE_REPORT = 1054,
  IL_WRITE_VAL = 1055,
};

/// One labeled transition of the step machine.
struct Step {
  long seq = 0;
  int proc = -1;
  std::optional<InvocationId> inv;
  int site = 0;
  StepKind kind = StepKind::Local;

  // Random
  std::vector<Value> domain;
  RandomOrigin origin = RandomOrigin::Program;

  // Call / Return / Random / Access
  std::string object;
  std::string method;
  Value arg;
  Value value;

  // Send / Deliver
  int msgId = -1;
  int peer = -1;  // send: destination; deliver: sender
  MsgTag tag = MsgTag::Query;
  int sn = -1;
  Timestamp ts;
  int reMsg = -1;        // send: id of the message this one answers, -1 if none
  bool mutated = false;  // deliver: handler changed the receiving server's state

  // Access
  std::string reg;  // "cell" | "val" | "report"
  int regI = -1, regJ = -1;
  std::string accessOp;  // "read" | "write"

  nlohmann::ordered_json to_json() const;
  static Step from_json(const nlohmann::ordered_json& j);
};

/// Per-invocation record kept by the engine; enough to rebuild the
/// history, the outcome, timestamps, and preamble-iteration spans
/// without the full step log.
struct InvRecord {
  InvocationId inv;
  std::string object;
  std::string method;
  Value arg;
  long callSeq = -1;
  long retSeq = -1;
  bool returned = false;
  Value ret;
  std::optional<Timestamp> ts;  // ABD/VA linearization timestamp, once fixed
  std::vector<std::pair<long, long>> iterSpans;  // [first step, deciding step] per preamble iteration
  int chosenIter = -1;                           // 1-based object-random choice; -1 if none
  long preambleEndSeq = -1;                      // first step at the built-in preamble end
};

struct Outcome {
  std::map<InvocationId, Value> returns;
  std::vector<ProcStatus> terminal;  // per process; Running prints as "blocked"

  bool operator==(const Outcome& o) const {
    return returns == o.returns && terminal == o.terminal;
  }
  std::string str() const;
};

/// Call/return action in a history.
struct Action {
  bool isCall = true;
  InvocationId inv;
  std::string object;
  std::string method;
  Value arg;    // call
  Value value;  // return
  long seq = 0;
};

struct History {
  std::vector<Action> actions;
};

struct Execution {
  std::vector<Step> steps;  // empty unless recorded
  bool stepsRecorded = false;
  std::vector<InvRecord> invs;
  std::vector<long> programRandomSeqs;
  std::vector<ProcStatus> finalStatus;
  long stepCount = 0;

  const InvRecord* find(const InvocationId& id) const {
    for (const auto& r : invs)
      if (r.inv == id) return &r;
    return nullptr;
  }
};

History project_history(const Execution& e);
Outcome outcome_of(const Execution& e);

/// Event X: every object random step selected a preamble iteration that
/// no program random step overlaps.
bool event_x_holds(const Execution& e);

/// JSON-lines serialization; serialize -> parse -> serialize is the
/// identity on these streams. `input` tags lines when bundling corpora
/// (-1 omits the field).
std::string step_to_jsonl(const Step& s, int input = -1);
std::string execution_to_jsonl(const Execution& e, int input = -1);
std::vector<std::pair<int, Step>> steps_from_jsonl(const std::string& text);

}  // namespace blunt
