#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "degp/linalg.hpp"

int main(int argc, char** argv) {
  degp::nd::use_single_thread_blas();
  return doctest::Context(argc, argv).run();
}
