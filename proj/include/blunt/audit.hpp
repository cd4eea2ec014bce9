#pragma once

#include <string>
#include <vector>

#include "blunt/engine.hpp"
#include "blunt/objects.hpp"

namespace blunt {

struct AuditFinding {
  bool effectFree = true;
  std::string reason;  // first violation found, if any
};

/// Post-hoc audit of one recorded execution: every step inside a
/// declared preamble region must be a local step, a read-only base
/// access, or a send/receive whose handler leaves the handling server's
/// persistent state unchanged. Messages are attributed to the preamble
/// that (transitively) caused them.
AuditFinding audit_execution(const Execution& e, const PreambleMapping& pm);

/// Runs a driver set of seeded interleavings of a small program over the
/// given object binding and audits each method's declared preamble.
/// True iff every observed preamble step qualifies.
bool audit_effect_free(ObjectKind kind, const ObjectConfig& cfg, const PreambleMapping& pm,
                       int seeds = 40, std::string* whyNot = nullptr);

}  // namespace blunt
