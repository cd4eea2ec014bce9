#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "blunt/errors.hpp"
#include "blunt/report.hpp"

using namespace blunt;

int main(int argc, char** argv) {
  CLI::App app{"blunt: adversarial-scheduling simulator and checker suite"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);

  ExperimentConfig cfg;
  bool noGuide = false;
  auto addRunFlags = [&](CLI::App* sub) {
    sub->add_option("--program", cfg.programName, "program name (weakener)");
    sub->add_option("--program-file", cfg.programFile, "program text file");
    sub->add_option("--object", cfg.objectKind, "atomic | abd | abd-k | snapshot | va | il");
    sub->add_option("--k", cfg.k, "preamble iterations for abd-k");
    sub->add_option("--adversary", cfg.adversary, "crafted | search | random | round-robin | file");
    sub->add_option("--adversary-file", cfg.adversaryFile, "directive script (JSON)");
    sub->add_option("--trials", cfg.trials, "Monte Carlo trials");
    sub->add_option("--seed", cfg.masterSeed, "master seed");
    sub->add_option("--step-budget", cfg.stepBudget, "per-run step budget");
    sub->add_option("--search-budget", cfg.searchBudget, "search node budget");
    sub->add_flag("--no-guide", noGuide, "search without the crafted move-ordering hint");
    sub->add_option("--out", cfg.outPath, "report JSON path (default stdout)");
    sub->add_option("--trial-csv", cfg.trialCsvPath, "per-trial CSV path");
    sub->add_option("--emit-histories", cfg.emitHistoriesPath, "JSONL event stream of all trials");
    sub->add_option("--enumerate-tree", cfg.treeDepth, "also enumerate the execution tree to this depth");
    sub->add_option("--emit-tree", cfg.emitTreePath, "JSONL path for the enumerated tree");
    sub->add_option("--emit-obstruction-tree", cfg.emitObstructionTreePath,
                    "JSONL path for the crafted pending-write tree");
  };

  CLI::App* runCmd = app.add_subcommand("run", "run an experiment");
  addRunFlags(runCmd);
  CLI::App* searchCmd = app.add_subcommand("search", "run with the optimal-adversary search");
  addRunFlags(searchCmd);

  CheckOptions chk;
  CLI::App* checkCmd = app.add_subcommand("check", "linearizability checks on recorded inputs");
  checkCmd->add_option("--mode", chk.mode, "lin | strong | tail")->required();
  checkCmd->add_option("--input", chk.inputPath, "JSONL history or tree file")->required();
  checkCmd->add_option("--spec", chk.spec, "register | snapshot");
  checkCmd->add_option("--initial", chk.initial, "initial value (bot or integer)");
  checkCmd->add_option("--pm", chk.pm, "preamble mapping for tail checks");
  checkCmd->add_option("--object", chk.object, "restrict to one object's projection");
  checkCmd->add_option("--snapshot-width", chk.snapshotWidth, "cells in the snapshot spec");

  std::vector<std::string> reportFiles;
  std::string reportCsv;
  CLI::App* reportCmd = app.add_subcommand("report", "tabulate report files");
  reportCmd->add_option("inputs", reportFiles, "report JSON files")->required();
  reportCmd->add_option("--csv", reportCsv, "CSV output path");

  CLI11_PARSE(app, argc, argv);

  if (const char* env = std::getenv("BLUNT_SEED")) cfg.masterSeed = std::strtoull(env, nullptr, 10);
  cfg.guideSearch = !noGuide;

  try {
    if (runCmd->parsed() || searchCmd->parsed()) {
      if (searchCmd->parsed()) cfg.adversary = "search";
      cmd_run(cfg);
      return 0;
    }
    if (checkCmd->parsed()) return cmd_check(chk);
    if (reportCmd->parsed()) return cmd_report(reportFiles, reportCsv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
