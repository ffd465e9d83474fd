#include "cli.hpp"

int main(int argc, char** argv) { return dbfgm::cli::dispatch(argc, argv); }
