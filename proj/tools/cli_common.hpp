#pragma once

#include <CLI11.hpp>
#include <string>

namespace fwiki::cli {

struct CreolifyArgs {
  std::string input;
  std::string output;
  std::string index;
  std::string rules;
  std::string macros;
};

void add_creolify_options(CLI::App& app, CreolifyArgs& args);
int run_creolify(const CreolifyArgs& args);

struct AdviceServerArgs {
  std::string host = "127.0.0.1";
  int port = 7070;
  int timeout_ms = 10000;
};

void add_advice_server_options(CLI::App& app, AdviceServerArgs& args);
int run_advice_server(const AdviceServerArgs& args);

/// Blocks until SIGINT or SIGTERM. Call before starting threads.
void block_termination_signals();
void wait_for_termination();

}  // namespace fwiki::cli
