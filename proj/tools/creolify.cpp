#include <iostream>

#include "cli_common.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Translate annotated LaTeX into wiki markup"};
  fwiki::cli::CreolifyArgs args;
  fwiki::cli::add_creolify_options(app, args);
  CLI11_PARSE(app, argc, argv);
  try {
    return fwiki::cli::run_creolify(args);
  } catch (const std::exception& e) {
    std::cerr << "creolify: " << e.what() << "\n";
    return 2;
  }
}
