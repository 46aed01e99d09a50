#include "cli_common.hpp"

#include <signal.h>

#include <fstream>
#include <iostream>
#include <sstream>

#include "fwiki/advice.hpp"
#include "fwiki/creolifier.hpp"

namespace fwiki::cli {

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void add_creolify_options(CLI::App& app, CreolifyArgs& args) {
  app.add_option("input", args.input, "annotated LaTeX file")->required()->check(CLI::ExistingFile);
  app.add_option("-o,--output", args.output, "wiki output (default: stdout)");
  app.add_option("--index", args.index, "symbol index TSV used to resolve annotations")->check(CLI::ExistingFile);
  app.add_option("--rules", args.rules, "rule file replacing the default rules")->check(CLI::ExistingFile);
  app.add_option("--macros", args.macros, "math macro prelude passed through to pages")->check(CLI::ExistingFile);
}

int run_creolify(const CreolifyArgs& args) {
  SymbolIndex index;
  if (!args.index.empty()) index = import_index(slurp(args.index));
  CreolifyOptions options;
  if (!args.rules.empty()) options.rules = parse_rules(slurp(args.rules));
  if (!args.macros.empty()) options.macro_prelude = slurp(args.macros);
  CreolifyResult result;
  try {
    result = creolify(slurp(args.input), index, options);
  } catch (const CreolifyError& e) {
    std::cerr << args.input << ":" << e.line() << ": " << e.what() << "\n";
    return 1;
  }
  for (const auto& w : result.warnings) std::cerr << args.input << ": warning: " << w << "\n";
  for (const auto& u : result.unresolved) std::cerr << args.input << ": unresolved: " << u << "\n";
  if (args.output.empty()) {
    std::cout << result.wiki;
  } else {
    std::ofstream out(args.output, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + args.output);
    out << result.wiki;
  }
  return 0;
}

void add_advice_server_options(CLI::App& app, AdviceServerArgs& args) {
  app.add_option("--host", args.host, "listen address")->capture_default_str();
  app.add_option("--port", args.port, "listen port (0 picks one)")->capture_default_str()->check(CLI::Range(0, 65535));
  app.add_option("--timeout-ms", args.timeout_ms, "per-request strategy timeout")->capture_default_str();
}

int run_advice_server(const AdviceServerArgs& args) {
  block_termination_signals();
  AdviceServer server({std::make_shared<TautologyStrategy>()}, std::chrono::milliseconds(args.timeout_ms));
  const auto port = server.start(args.host, static_cast<std::uint16_t>(args.port));
  std::cout << "advice server listening on " << args.host << ":" << port << std::endl;
  wait_for_termination();
  server.stop();
  return 0;
}

void block_termination_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
}

void wait_for_termination() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  int sig = 0;
  sigwait(&set, &sig);
}

}  // namespace fwiki::cli
