#include "cli.hpp"

int main(int argc, char** argv) { return accessprice::cli::run(argc, argv); }
