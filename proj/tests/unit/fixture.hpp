#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "oodret/cli.hpp"
#include "test_util.hpp"

// One clean corpus processed through every CLI stage, shared by the tests of
// this binary.
struct CleanRun {
  TempDir dir;
  std::filesystem::path corpus;
  std::filesystem::path manifest;
  std::filesystem::path work;

  static const CleanRun& get() {
    static CleanRun run;
    return run;
  }

 private:
  CleanRun() {
    corpus = dir.path / "corpus";
    manifest = corpus / "manifest.json";
    work = dir.path / "work";
    run({"synth", "--out", corpus.string(), "--seed", "4", "--frames", "50"});
    for (const char* stage : {"segment", "track", "ingest", "eval"}) {
      run({stage, "--manifest", manifest.string(), "--work", work.string()});
    }
  }

  static void run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    if (oodret::run_cli(args, out, err) != 0) throw std::runtime_error("fixture stage failed: " + err.str());
  }
};

struct CliResult {
  int status = 0;
  std::string out;
  std::string err;
};

inline CliResult cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int status = oodret::run_cli(args, out, err);
  return {status, out.str(), err.str()};
}
