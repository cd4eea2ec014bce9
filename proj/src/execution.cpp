#include "blunt/execution.hpp"

#include <sstream>

#include "blunt/errors.hpp"

namespace blunt {

using json = nlohmann::ordered_json;

const char* step_kind_name(StepKind k) {
  switch (k) {
    case StepKind::Local: return "local";
    case StepKind::Random: return "random";
    case StepKind::Call: return "call";
    case StepKind::Return: return "return";
    case StepKind::Send: return "send";
    case StepKind::Deliver: return "deliver";
    case StepKind::Access: return "access";
  }
  return "?";
}

static StepKind step_kind_from(const std::string& s) {
  if (s == "local") return StepKind::Local;
  if (s == "random") return StepKind::Random;
  if (s == "call") return StepKind::Call;
  if (s == "return") return StepKind::Return;
  if (s == "send") return StepKind::Send;
  if (s == "deliver") return StepKind::Deliver;
  if (s == "access") return StepKind::Access;
  fail(Err::ParseError, "unknown step kind " + s);
}

const char* tag_name(MsgTag t) {
  switch (t) {
    case MsgTag::Query: return "query";
    case MsgTag::Reply: return "reply";
    case MsgTag::Update: return "update";
    case MsgTag::Ack: return "ack";
  }
  return "?";
}

MsgTag tag_from_name(const std::string& s) {
  if (s == "query") return MsgTag::Query;
  if (s == "reply") return MsgTag::Reply;
  if (s == "update") return MsgTag::Update;
  if (s == "ack") return MsgTag::Ack;
  fail(Err::ParseError, "unknown message tag " + s);
}

static json value_to_json(const Value& v) {
  switch (v.kind) {
    case Value::Kind::Bot: return nullptr;
    case Value::Kind::Unit: return "ok";
    case Value::Kind::Int: return v.num;
    case Value::Kind::Vec: {
      json a = json::array();
      for (const auto& x : v.items) a.push_back(value_to_json(x));
      return a;
    }
  }
  return nullptr;
}

static Value value_from_json(const json& j) {
  if (j.is_null()) return Value::bot();
  if (j.is_string()) {
    if (j.get<std::string>() == "ok") return Value::unit();
    fail(Err::ParseError, "unknown value literal");
  }
  if (j.is_number_integer()) return Value::integer(j.get<long long>());
  if (j.is_array()) {
    std::vector<Value> xs;
    for (const auto& x : j) xs.push_back(value_from_json(x));
    return Value::vec(std::move(xs));
  }
  fail(Err::ParseError, "unparsable value");
}

json Step::to_json() const {
  json j;
  j["seq"] = seq;
  j["proc"] = proc;
  j["kind"] = step_kind_name(kind);
  if (inv) {
    json ji;
    ji["proc"] = inv->proc;
    ji["site"] = inv->site;
    ji["occ"] = inv->occ;
    j["inv"] = ji;
  } else {
    j["inv"] = nullptr;
  }
  j["site"] = site;
  json p;
  switch (kind) {
    case StepKind::Local:
      break;
    case StepKind::Random: {
      json d = json::array();
      for (const auto& v : domain) d.push_back(value_to_json(v));
      p["domain"] = d;
      p["value"] = value_to_json(value);
      p["origin"] = origin_name(origin);
      break;
    }
    case StepKind::Call:
      p["object"] = object;
      p["method"] = method;
      p["arg"] = value_to_json(arg);
      break;
    case StepKind::Return:
      p["value"] = value_to_json(value);
      break;
    case StepKind::Send:
      p["msg"] = msgId;
      p["to"] = peer;
      p["tag"] = tag_name(tag);
      p["object"] = object;
      p["sn"] = sn;
      if (tag == MsgTag::Reply || tag == MsgTag::Update) {
        p["value"] = value_to_json(value);
        p["ts"] = json::array({ts.t, ts.pid});
      }
      p["re"] = reMsg < 0 ? json(nullptr) : json(reMsg);
      break;
    case StepKind::Deliver:
      p["msg"] = msgId;
      p["from"] = peer;
      p["tag"] = tag_name(tag);
      p["object"] = object;
      p["sn"] = sn;
      p["mutated"] = mutated;
      break;
    case StepKind::Access:
      p["object"] = object;
      p["op"] = accessOp;
      p["reg"] = reg;
      p["i"] = regI;
      if (regJ >= 0) p["j"] = regJ;
      p["value"] = value_to_json(value);
      break;
  }
  j["payload"] = p;
  return j;
}

Step Step::from_json(const json& j) {
  Step s;
  s.seq = j.at("seq").get<long>();
  s.proc = j.at("proc").get<int>();
  s.kind = step_kind_from(j.at("kind").get<std::string>());
  if (!j.at("inv").is_null()) {
    const json& ji = j.at("inv");
    s.inv = InvocationId{ji.at("proc").get<int>(), ji.at("site").get<int>(), ji.at("occ").get<int>()};
  }
  s.site = j.at("site").get<int>();
  const json& p = j.at("payload");
  switch (s.kind) {
    case StepKind::Local:
      break;
    case StepKind::Random:
      for (const auto& v : p.at("domain")) s.domain.push_back(value_from_json(v));
      s.value = value_from_json(p.at("value"));
      s.origin = p.at("origin").get<std::string>() == "program" ? RandomOrigin::Program
                                                                : RandomOrigin::Object;
      break;
    case StepKind::Call:
      s.object = p.at("object").get<std::string>();
      s.method = p.at("method").get<std::string>();
      s.arg = value_from_json(p.at("arg"));
      break;
    case StepKind::Return:
      s.value = value_from_json(p.at("value"));
      break;
    case StepKind::Send:
      s.msgId = p.at("msg").get<int>();
      s.peer = p.at("to").get<int>();
      s.tag = tag_from_name(p.at("tag").get<std::string>());
      s.object = p.at("object").get<std::string>();
      s.sn = p.at("sn").get<int>();
      if (p.contains("value")) {
        s.value = value_from_json(p.at("value"));
        s.ts.t = p.at("ts")[0].get<long long>();
        s.ts.pid = p.at("ts")[1].get<int>();
      }
      if (!p.at("re").is_null()) s.reMsg = p.at("re").get<int>();
      break;
    case StepKind::Deliver:
      s.msgId = p.at("msg").get<int>();
      s.peer = p.at("from").get<int>();
      s.tag = tag_from_name(p.at("tag").get<std::string>());
      s.object = p.at("object").get<std::string>();
      s.sn = p.at("sn").get<int>();
      s.mutated = p.at("mutated").get<bool>();
      break;
    case StepKind::Access:
      s.object = p.at("object").get<std::string>();
      s.accessOp = p.at("op").get<std::string>();
      s.reg = p.at("reg").get<std::string>();
      s.regI = p.at("i").get<int>();
      if (p.contains("j")) s.regJ = p.at("j").get<int>();
      s.value = value_from_json(p.at("value"));
      break;
  }
  return s;
}

History project_history(const Execution& e) {
  History h;
  if (e.stepsRecorded) {
    for (const Step& s : e.steps) {
      if (s.kind != StepKind::Call && s.kind != StepKind::Return) continue;
      Action a;
      a.isCall = s.kind == StepKind::Call;
      a.inv = *s.inv;
      a.seq = s.seq;
      if (a.isCall) {
        a.object = s.object;
        a.method = s.method;
        a.arg = s.arg;
      } else {
        a.value = s.value;
      }
      h.actions.push_back(a);
    }
    // returns need the call's object/method for downstream consumers
    for (Action& a : h.actions) {
      if (a.isCall) continue;
      for (const Action& c : h.actions)
        if (c.isCall && c.inv == a.inv) {
          a.object = c.object;
          a.method = c.method;
          a.arg = c.arg;
        }
    }
    return h;
  }
  // reconstruct the call/return interleaving from invocation records
  std::vector<std::pair<long, Action>> evs;
  for (const InvRecord& r : e.invs) {
    Action c;
    c.isCall = true;
    c.inv = r.inv;
    c.object = r.object;
    c.method = r.method;
    c.arg = r.arg;
    c.seq = r.callSeq;
    evs.push_back({r.callSeq, c});
    if (r.returned) {
      Action t;
      t.isCall = false;
      t.inv = r.inv;
      t.object = r.object;
      t.method = r.method;
      t.arg = r.arg;
      t.value = r.ret;
      t.seq = r.retSeq;
      evs.push_back({r.retSeq, t});
    }
  }
  std::sort(evs.begin(), evs.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (auto& [_, a] : evs) h.actions.push_back(a);
  return h;
}

Outcome outcome_of(const Execution& e) {
  Outcome o;
  for (const InvRecord& r : e.invs)
    if (r.returned) o.returns[r.inv] = r.ret;
  o.terminal = e.finalStatus;
  return o;
}

std::string Outcome::str() const {
  std::string s = "{";
  bool first = true;
  for (const auto& [id, v] : returns) {
    if (!first) s += ", ";
    first = false;
    s += id.str() + ":" + v.str();
  }
  s += "}";
  for (size_t p = 0; p < terminal.size(); ++p)
    s += " p" + std::to_string(p) + "=" + status_name(terminal[p]);
  return s;
}

bool event_x_holds(const Execution& e) {
  for (const InvRecord& r : e.invs) {
    if (r.chosenIter < 1) continue;
    if (r.chosenIter > static_cast<int>(r.iterSpans.size()))
      fail(Err::Internal, "chosen iteration has no recorded span");
    auto [first, last] = r.iterSpans[r.chosenIter - 1];
    for (long prs : e.programRandomSeqs)
      if (first < prs && prs < last) return false;
  }
  return true;
}

std::string step_to_jsonl(const Step& s, int input) {
  json j = s.to_json();
  if (input >= 0) {
    json out;
    out["input"] = input;
    for (auto& [k, v] : j.items()) out[k] = v;
    return out.dump();
  }
  return j.dump();
}

std::string execution_to_jsonl(const Execution& e, int input) {
  if (!e.stepsRecorded) fail(Err::Internal, "execution was run without step recording");
  std::string out;
  for (const Step& s : e.steps) {
    out += step_to_jsonl(s, input);
    out += "\n";
  }
  return out;
}

std::vector<std::pair<int, Step>> steps_from_jsonl(const std::string& text) {
  std::vector<std::pair<int, Step>> out;
  std::istringstream in(text);
  std::string line;
  long lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& ex) {
      fail(Err::ParseError, "line " + std::to_string(lineNo) + ": " + ex.what());
    }
    int input = j.contains("input") ? j.at("input").get<int>() : 0;
    try {
      out.push_back({input, Step::from_json(j)});
    } catch (const std::exception& ex) {
      fail(Err::ParseError, "line " + std::to_string(lineNo) + ": " + ex.what());
    }
  }
  return out;
}

}  // namespace blunt
