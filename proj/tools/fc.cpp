#include <csignal>
#include <iostream>

#include "fc/cli.hpp"

int main(int argc, char** argv) {
  std::signal(SIGPIPE, SIG_IGN);
  return fc::run_cli(argc, argv, std::cout, std::cerr);
}
