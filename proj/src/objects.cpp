#include "blunt/objects.hpp"

namespace blunt {

const char* object_kind_name(ObjectKind k) {
  switch (k) {
    case ObjectKind::Atomic: return "atomic";
    case ObjectKind::Abd: return "abd";
    case ObjectKind::Snapshot: return "snapshot";
    case ObjectKind::Va: return "va";
    case ObjectKind::Il: return "il";
  }
  return "?";
}

ObjectKind object_kind_from(const std::string& s) {
  if (s == "atomic") return ObjectKind::Atomic;
  if (s == "abd" || s == "abd-k") return ObjectKind::Abd;
  if (s == "snapshot") return ObjectKind::Snapshot;
  if (s == "va") return ObjectKind::Va;
  if (s == "il") return ObjectKind::Il;
  fail(Err::ParseError, "unknown object kind '" + s + "'");
}

Bindings uniform_bindings(const std::map<std::string, Value>& objectInit, ObjectConfig cfg) {
  cfg.validate();
  Bindings b;
  for (const auto& [name, _] : objectInit) b[name] = cfg;
  return b;
}

ObjectState ObjectState::init(const ObjectConfig& cfg, const Value& initial, int n) {
  ObjectState st;
  st.cfg = cfg;
  switch (cfg.kind) {
    case ObjectKind::Atomic:
      st.atomicVal = initial;
      break;
    case ObjectKind::Abd:
      st.abd.servers.assign(n, AbdServer{initial, Timestamp{0, 0}});
      st.abd.sn.assign(n, 0);
      break;
    case ObjectKind::Snapshot: {
      SnapCell cell;
      cell.val = initial;
      cell.seq = 0;
      cell.snap.assign(n, initial);
      st.snap.cells.assign(n, cell);
      break;
    }
    case ObjectKind::Va:
      st.va.val.assign(n, VaCell{initial, Timestamp{0, 0}});
      break;
    case ObjectKind::Il:
      st.il.val.assign(n, IlCell{initial, 0});
      st.il.report.assign(n, std::vector<IlCell>(n, IlCell{initial, 0}));
      st.il.writerSeq.assign(n, 0);
      break;
  }
  return st;
}

PreambleMapping PreambleMapping::pi0(std::vector<std::string> methods) {
  PreambleMapping pm;
  pm.name = "pi0";
  for (auto& m : methods) pm.siteOf[m] = SITE_CALL;
  return pm;
}

PreambleMapping PreambleMapping::full(std::vector<std::string> methods) {
  PreambleMapping pm;
  pm.name = "full";
  for (auto& m : methods) pm.siteOf[m] = SITE_RETURN;
  return pm;
}

PreambleMapping PreambleMapping::abd() {
  PreambleMapping pm;
  pm.name = "abd";
  pm.siteOf["read"] = ABD_QUERY_ASSIGN;
  pm.siteOf["write"] = ABD_QUERY_ASSIGN;
  return pm;
}

PreambleMapping PreambleMapping::snapshot(bool extendedUpdate) {
  PreambleMapping pm;
  pm.name = extendedUpdate ? "snapshot-extended" : "snapshot";
  pm.siteOf["scan"] = SNAP_DECIDE;
  pm.siteOf["update"] = extendedUpdate ? SNAP_DECIDE : SITE_CALL;
  return pm;
}

PreambleMapping PreambleMapping::va() {
  PreambleMapping pm;
  pm.name = "va";
  pm.siteOf["read"] = VA_READ_DECIDE;
  pm.siteOf["write"] = VA_WRITE_DECIDE;
  return pm;
}

PreambleMapping PreambleMapping::il() {
  PreambleMapping pm;
  pm.name = "il";
  pm.siteOf["read"] = IL_DECIDE;
  pm.siteOf["write"] = SITE_CALL;
  return pm;
}

PreambleMapping PreambleMapping::abd_through_update() {
  PreambleMapping pm;
  pm.name = "abd-through-update";
  pm.siteOf["read"] = SITE_RETURN;
  pm.siteOf["write"] = SITE_RETURN;
  return pm;
}

ObjectSpec ObjectSpec::register_spec(Value initial) {
  ObjectSpec s;
  s.kind = Kind::Register;
  s.name = "register";
  s.initial = std::move(initial);
  return s;
}

ObjectSpec ObjectSpec::snapshot_spec(int n, Value cellInitial) {
  ObjectSpec s;
  s.kind = Kind::Snapshot;
  s.name = "snapshot";
  s.n = n;
  s.initial = std::move(cellInitial);
  return s;
}

Value ObjectSpec::init_state() const {
  if (kind == Kind::Register) return initial;
  return Value::vec(std::vector<Value>(n, initial));
}

std::optional<std::pair<Value, Value>> ObjectSpec::step(const Value& state,
                                                        const std::string& method,
                                                        const Value& arg, int proc) const {
  if (kind == Kind::Register) {
    if (method == "read") return std::make_pair(state, state);
    if (method == "write") return std::make_pair(arg, Value::unit());
    return std::nullopt;
  }
  if (method == "scan") return std::make_pair(state, state);
  if (method == "update") {
    if (proc < 0 || proc >= n) return std::nullopt;
    Value next = state;
    next.items[proc] = arg;
    return std::make_pair(next, Value::unit());
  }
  return std::nullopt;
}

}  // namespace blunt
