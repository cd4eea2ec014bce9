#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "blunt/errors.hpp"
#include "blunt/execution.hpp"
#include "blunt/value.hpp"

namespace blunt {

enum class ObjectKind { Atomic, Abd, Snapshot, Va, Il };

const char* object_kind_name(ObjectKind k);
ObjectKind object_kind_from(const std::string& s);

/// Binding of a declared program object to an implementation. k = 0 is
/// the untransformed implementation; k >= 1 iterates the preamble k
/// times and draws the iteration to keep uniformly at random (k = 1
/// still takes the unit-domain random step).
struct ObjectConfig {
  ObjectKind kind = ObjectKind::Atomic;
  int k = 0;
  bool extendedUpdatePreamble = false;  // snapshot Update preamble spans its embedded scan

  void validate() const {
    if (k < 0) fail(Err::NonPositiveK, "k must be >= 1 (or 0 for the untransformed object)");
  }
  int iters() const { return k >= 1 ? k : 1; }
  bool transformed() const { return k >= 1; }
};

using Bindings = std::map<std::string, ObjectConfig>;

Bindings uniform_bindings(const std::map<std::string, Value>& objectInit, ObjectConfig cfg);

// --------------------------------------------------------------------------
// Shared object state, one entry per declared object. Plain value types so
// engine states copy and digest cheaply.

struct AbdServer {
  Value val;
  Timestamp ts;  // initially (0,0)
};

struct AbdState {
  std::vector<AbdServer> servers;
  std::vector<int> sn;  // per-client phase counter, persists across invocations
};

struct SnapCell {
  Value val;
  long seq = 0;
  std::vector<Value> snap;  // embedded snapshot written with the value
};

struct SnapshotState {
  std::vector<SnapCell> cells;
};

struct VaCell {
  Value val;
  Timestamp ts;
};

struct VaState {
  std::vector<VaCell> val;
};

struct IlCell {
  Value val;
  long seq = 0;
};

struct IlState {
  std::vector<IlCell> val;                  // Val[i], one per reader i
  std::vector<std::vector<IlCell>> report;  // Report[i][j], writer i, reader j
  std::vector<long> writerSeq;              // per-process sequence numbers
};

struct ObjectState {
  ObjectConfig cfg;
  Value atomicVal;
  AbdState abd;
  SnapshotState snap;
  VaState va;
  IlState il;

  static ObjectState init(const ObjectConfig& cfg, const Value& initial, int n);
};

// --------------------------------------------------------------------------
// Preamble mappings

/// Per-method control point ending the effect-free preamble. SITE_CALL
/// denotes the trivial mapping (every called invocation qualifies) and
/// SITE_RETURN the full-method mapping (completeness = returned).
struct PreambleMapping {
  std::string name;
  std::map<std::string, int> siteOf;

  int site_for(const std::string& method) const {
    auto it = siteOf.find(method);
    if (it == siteOf.end()) fail(Err::UnknownMethod, "no preamble point for method " + method);
    return it->second;
  }

  static PreambleMapping pi0(std::vector<std::string> methods);
  static PreambleMapping full(std::vector<std::string> methods);
  static PreambleMapping abd();
  static PreambleMapping snapshot(bool extendedUpdate = false);
  static PreambleMapping va();
  static PreambleMapping il();
  /// Deliberately wrong ABD mapping whose "preamble" runs through the
  /// update phase; the effect-free audit must reject it.
  static PreambleMapping abd_through_update();
};

// --------------------------------------------------------------------------
// Sequential specifications

/// Deterministic sequential specification used by the linearizability
/// checkers: a decision procedure (state, method, arg) -> (state', ret).
struct ObjectSpec {
  enum class Kind { Register, Snapshot };
  Kind kind = Kind::Register;
  std::string name = "register";
  int n = 0;       // snapshot width
  Value initial;   // register initial value, or per-cell initial

  static ObjectSpec register_spec(Value initial = Value::bot());
  static ObjectSpec snapshot_spec(int n, Value cellInitial = Value::bot());

  Value init_state() const;
  /// Returns nullopt when (method, arg) is not applicable.
  std::optional<std::pair<Value, Value>> step(const Value& state, const std::string& method,
                                              const Value& arg, int proc) const;
};

}  // namespace blunt
