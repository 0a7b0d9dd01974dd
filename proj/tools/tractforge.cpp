#include "tractforge/cli.hpp"

int main(int argc, char** argv) { return tractforge::cmd_dispatch(argc, argv); }
