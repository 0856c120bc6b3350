#include "scenefit/cli.hpp"

int main(int argc, char** argv) { return scenefit::cli_main(argc, argv); }
