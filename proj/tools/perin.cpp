#include "perin/cli.hpp"

int main(int argc, char** argv) { return perin::run(argc, argv); }
