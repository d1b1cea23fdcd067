#include "atg/cli.hpp"

int main(int argc, char** argv) { return atg::cli::dispatch(argc, argv); }
