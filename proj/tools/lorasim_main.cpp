#include <string>
#include <vector>

#include "lorasim/cli.hpp"

int main(int argc, char** argv) {
  return lorasim::cli::dispatch(std::vector<std::string>(argv + 1, argv + argc));
}
