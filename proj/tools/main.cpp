#include "cranial/cli.hpp"

int main(int argc, char** argv) { return cranial::cli::run(argc, argv); }
