#include "navguard/harness.hpp"

int main(int argc, char** argv) {
  return navguard::harness::cli_dispatch(argc, argv);
}
