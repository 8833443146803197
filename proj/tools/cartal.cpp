#include <string>
#include <vector>

#include "cartal/cli.hpp"

int main(int argc, char** argv) {
  return cartal::cli::run(std::vector<std::string>(argv, argv + argc));
}
