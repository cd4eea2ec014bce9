#pragma once

#include <optional>
#include <string>
#include <vector>

#include "blunt/execution.hpp"
#include "blunt/objects.hpp"
#include "blunt/program.hpp"

namespace blunt {

/// One call or return event of a history, with the call metadata
/// duplicated onto the return for convenience.
struct HEvent {
  bool isCall = true;
  InvocationId inv;
  std::string object;
  std::string method;
  Value arg;
  Value ret;
};

using Hist = std::vector<HEvent>;

Hist history_events(const History& h);
Hist project_object(const Hist& h, const std::string& object);

struct LinOp {
  InvocationId inv;
  std::string method;
  Value arg;
  Value ret;
};

using Linearization = std::vector<LinOp>;

struct LinResult {
  bool ok = false;
  Linearization witness;  // valid linearization when ok
};

/// Wing&Gong-style search: true iff some completion/pruning of pending
/// calls permutes into a spec-legal sequential history preserving the
/// order of non-overlapping operations.
LinResult check_linearizable(const Hist& h, const ObjectSpec& spec);

/// Replays a linearization through the sequential specification; used
/// to cross-check witnesses produced elsewhere.
bool replay_linearization(const Linearization& lin, const ObjectSpec& spec);

// --------------------------------------------------------------------------
// Execution trees

/// Prefix-closed execution set as a tree; each edge carries the steps of
/// one scheduling directive.
struct ExecTree {
  struct Node {
    int parent = -1;
    std::vector<Step> steps;
  };
  std::vector<Node> nodes;  // nodes[0] is the empty execution

  std::vector<std::vector<int>> children() const;
  /// Call/return event introduced by the node's steps, if any.
  std::optional<HEvent> event_of(int node) const;
};

struct StrongOptions {
  long candidateBudget = 5000000;
};

struct StrongResult {
  bool ok = false;
  /// On failure, the deepest node at which every assignment choice was
  /// exhausted, with its history.
  int witnessNode = -1;
  Hist witnessHist;
};

/// True iff a prefix-preserving assignment of linearizations exists for
/// the whole tree (backtracking over linearization extensions per node).
StrongResult check_strong_linearizable(const ExecTree& t, const ObjectSpec& spec,
                                       const StrongOptions& opts = {});

struct TailResult {
  bool ok = false;
  bool plainLinearizable = false;  // every node of the unfiltered tree
  StrongResult strongOnFiltered;
  int filteredNodes = 0;
};

/// Filters the tree to nodes complete w.r.t. pm (keeping the induced
/// tree), requires plain linearizability of every node, and runs the
/// strong check on the filtered set.
TailResult check_tail_strong(const ExecTree& t, const ObjectSpec& spec,
                             const PreambleMapping& pm, const StrongOptions& opts = {});

// --------------------------------------------------------------------------
// Canonical ABD linearization (timestamp order, writes before reads)

struct AbdInvInfo {
  InvocationId inv;
  bool isWrite = false;
  Value arg;
  std::optional<Timestamp> ts;
  bool returned = false;
  Value readVal;  // value a read will return, fixed at its query assign
  long assignSeq = -1;
};

/// Logically-completed invocations ordered by timestamp, the write before
/// reads of equal timestamp. Precondition: complete w.r.t. the ABD
/// preamble mapping (every invocation has a timestamp).
Linearization abd_canonical_linearization(const std::vector<AbdInvInfo>& invs);

/// Adapter from a recorded execution of a single ABD object.
Linearization abd_canonical_linearization(const Execution& e);

/// ABD invocation summaries visible at one node of an execution tree.
std::vector<AbdInvInfo> abd_invs_at(const ExecTree& t, int node);

/// True iff the node's execution is complete w.r.t. pm.
bool tree_node_complete(const ExecTree& t, int node, const PreambleMapping& pm);

}  // namespace blunt
