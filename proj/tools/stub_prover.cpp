// Deterministic stand-in for a REPL prover; speaks the pipe protocol on
// stdin/stdout. The prelude name comes from PROVER_SNAPSHOT.
#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "fwiki/prover_session.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Stub prover"};
  fwiki::StubOptions options;
  if (const char* r = std::getenv("STUB_REJECT")) options.reject_substring = r;
  if (const char* c = std::getenv("STUB_CRASH")) options.crash_substring = c;
  app.add_option("--reject", options.reject_substring, "answer commands containing this text with an exception");
  app.add_option("--crash", options.crash_substring, "exit when a command contains this text");
  CLI11_PARSE(app, argc, argv);

  fwiki::SnapshotToken prelude{"base"};
  if (const char* s = std::getenv("PROVER_SNAPSHOT")) prelude.name = s;
  std::ios::sync_with_stdio(false);
  return fwiki::run_stub_protocol(std::cin, std::cout, options, prelude);
}
