#include <vector>
#include <string>

#include "posecam/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return posecam::cli::cli_main(args);
}
