#include <iostream>

#include "cli_common.hpp"
#include "fwiki/advice.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Ask the advice server about one goal line"};
  std::string host = "127.0.0.1";
  int port = 7070;
  int timeout_ms = 15000;
  std::string goal;
  app.add_option("--host", host)->capture_default_str();
  app.add_option("--port", port)->capture_default_str()->check(CLI::Range(1, 65535));
  app.add_option("--timeout-ms", timeout_ms)->capture_default_str();
  app.add_option("goal", goal, "assumptions and conclusion separated by backticks")->required();
  CLI11_PARSE(app, argc, argv);
  try {
    for (const auto& line : fwiki::request_advice(host, static_cast<std::uint16_t>(port), goal,
                                                  std::chrono::milliseconds(timeout_ms))) {
      std::cout << line << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "advise: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
