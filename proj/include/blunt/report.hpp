#pragma once

#include <string>
#include <vector>

#include "blunt/engine.hpp"
#include "blunt/objects.hpp"
#include "blunt/program.hpp"

#include <json.hpp>

namespace blunt {

struct ExperimentConfig {
  std::string programName = "weakener";
  std::string programFile;           // overrides programName when set
  std::string objectKind = "atomic";  // atomic | abd | abd-k | snapshot | va | il
  int k = 1;                          // preamble iterations for abd-k
  std::string adversary = "crafted";  // crafted | search | random | file
  std::string adversaryFile;          // directive script for adversary=file
  long trials = 0;
  uint64_t masterSeed = 0;
  long stepBudget = 1000000;
  long searchBudget = 20000000;
  bool guideSearch = true;
  std::string outPath;
  std::string trialCsvPath;
  std::string emitHistoriesPath;
  std::string emitTreePath;  // with --enumerate-tree
  int treeDepth = 0;
  std::string emitObstructionTreePath;
};

ProgramPtr load_program(const ExperimentConfig& cfg);
Bindings bindings_for(const ExperimentConfig& cfg, const Program& prog);
ObjectConfig object_config_for(const ExperimentConfig& cfg);

/// Directive script files: JSON array of {"kind":"step","proc":p} or
/// {"kind":"deliver","dest":d,"object":o,"tag":t,"from":s,"sn":n}.
std::vector<Directive> parse_directive_script(const std::string& text);

struct Report {
  nlohmann::ordered_json body;
  bool anyViolation = false;
};

/// Executes the configured experiment (Monte Carlo replay or search) and
/// assembles the self-contained report.
Report cmd_run(const ExperimentConfig& cfg);

struct CheckOptions {
  std::string mode = "lin";  // lin | strong | tail
  std::string inputPath;
  std::string spec = "register";  // register | snapshot
  std::string initial = "bot";
  std::string pm = "abd";
  std::string object;  // restrict lin checks to one object's projection
  int snapshotWidth = 3;
};

/// Verdict records to stdout, one JSON line per input; returns the
/// process exit status (nonzero iff any violation).
int cmd_check(const CheckOptions& opts);

/// Comparison table (text + optional CSV) across report files.
int cmd_report(const std::vector<std::string>& reportFiles, const std::string& csvPath);

std::string version_string();

}  // namespace blunt
