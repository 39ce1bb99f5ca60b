#include "gestauth/cli.hpp"

int main(int argc, char** argv) { return gestauth::cli::run(argc, argv); }
