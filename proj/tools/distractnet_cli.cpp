#include "distractnet/cli/app.hpp"

int main(int argc, char** argv) { return distractnet::cli::run(argc, argv); }
