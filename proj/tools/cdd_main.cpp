#include <csignal>
#include <iostream>

#include "cdd/cli/commands.hpp"

namespace {

void on_sigint(int) {
  if (cdd::interrupt_flag().exchange(true)) std::_Exit(cdd::kExitInterrupted);
}

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_sigint);
  std::vector<std::string> args(argv + 1, argv + argc);
  return cdd::run_cli(args, std::cout, std::cerr);
}
