#include <cstdlib>
#include <iostream>

#include "cli_common.hpp"
#include "fwiki/service.hpp"

namespace {

fwiki::AdapterFactory pipe_factory(const std::string& command, const fwiki::SnapshotToken& token) {
  auto argv = fwiki::split_command_line(command);
  if (argv.empty()) throw std::invalid_argument("empty --prover-cmd");
  return [argv, token] { return std::make_unique<fwiki::PipeProverAdapter>(argv, token); };
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"formal wiki engine"};
  app.require_subcommand(1);

  std::string repo;
  auto* build = app.add_subcommand("build", "index sources and render static pages into rendered/");
  build->add_option("repo", repo)->required()->check(CLI::ExistingDirectory);

  auto* index = app.add_subcommand("index", "write index/symbols.tsv");
  index->add_option("repo", repo)->required()->check(CLI::ExistingDirectory);

  std::string host = "127.0.0.1";
  int port = 8080;
  std::string prover_cmd = "stub_prover";
  std::string snapshot = "base";
  std::string advisor;
  if (const char* env = std::getenv("ADVISOR_ADDR")) advisor = env;
  bool no_cache = false;
  auto* serve = app.add_subcommand("serve", "serve pages, states, edits and advice over HTTP");
  serve->add_option("repo", repo)->required()->check(CLI::ExistingDirectory);
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str()->check(CLI::Range(0, 65535));
  serve->add_option("--prover-cmd", prover_cmd, "prover command line")->capture_default_str();
  serve->add_option("--snapshot", snapshot, "prelude snapshot name passed to the prover")->capture_default_str();
  serve->add_option("--advisor", advisor, "advice server host:port (default $ADVISOR_ADDR)");
  serve->add_flag("--no-cache", no_cache, "keep state entries in memory only");

  fwiki::cli::CreolifyArgs creo;
  auto* creolify = app.add_subcommand("creolify", "translate annotated LaTeX into wiki markup");
  fwiki::cli::add_creolify_options(*creolify, creo);

  fwiki::cli::AdviceServerArgs adv;
  auto* advice = app.add_subcommand("advice-server", "run the line-protocol advice server");
  fwiki::cli::add_advice_server_options(*advice, adv);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*build) {
      fwiki::RepositoryStore(repo).build();
    } else if (*index) {
      fwiki::RepositoryStore(repo).write_index();
    } else if (*serve) {
      fwiki::cli::block_termination_signals();
      fwiki::ServiceOptions options;
      options.snapshot = {snapshot};
      options.factory = pipe_factory(prover_cmd, options.snapshot);
      options.advisor = advisor;
      options.persist_cache = !no_cache;
      fwiki::WikiService service(std::make_shared<fwiki::RepositoryStore>(repo), std::move(options));
      const auto bound = service.start(host, static_cast<std::uint16_t>(port));
      std::cout << "serving " << repo << " on http://" << host << ":" << bound << "/" << std::endl;
      fwiki::cli::wait_for_termination();
      service.stop();
    } else if (*creolify) {
      return fwiki::cli::run_creolify(creo);
    } else if (*advice) {
      return fwiki::cli::run_advice_server(adv);
    }
  } catch (const std::exception& e) {
    std::cerr << "engine: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
