#pragma once

#include <string>
#include <vector>

#include "blunt/engine.hpp"
#include "blunt/lincheck.hpp"

namespace blunt {

struct TreeOptions {
  int maxDepth = 8;        // directives from the root (or extension base)
  long maxNodes = 200000;
};

/// Exhaustive bounded scheduling of a randomness-free program: every
/// legal directive at every node, depth-capped.
ExecTree enumerate_tree(ProgramPtr program, const Bindings& bindings, const TreeOptions& opts);

/// Union of the prefixes of the given directive scripts.
ExecTree tree_from_scripts(ProgramPtr program, const Bindings& bindings,
                           const std::vector<std::vector<Directive>>& scripts);

/// Grows every node of `t` by all legal directive sequences up to
/// `extraDepth`; refutations found on the padded tree still hold for the
/// full execution tree.
void extend_exhaustive(ExecTree& t, ProgramPtr program, const Bindings& bindings, int extraDepth,
                       long maxNodes);

/// Two writers and one double-reader on a single register.
ProgramPtr two_writer_reader_program();

struct ObstructionTree {
  ExecTree tree;
  ProgramPtr program;
  Bindings bindings;
  int commonPrefixNode = -1;  // the node holding the pending write mid-query
};

/// Crafted ABD execution tree around a pending write whose linearization
/// order must flip depending on later deliveries: a returned read forces
/// one write order, and the two extensions realize contradictory orders.
ObstructionTree abd_obstruction_tree(int padDepth = 1, long maxNodes = 200000);

/// JSON-lines tree serialization: {"node":i,"parent":p|null,"steps":[...]}.
std::string tree_to_jsonl(const ExecTree& t);
ExecTree tree_from_jsonl(const std::string& text);

}  // namespace blunt
