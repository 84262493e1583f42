#include "qpwave/cli.hpp"

int main(int argc, char** argv) { return qpwave::run(argc, argv); }
