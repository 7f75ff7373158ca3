#include "wkcal/cli/app.hpp"

int main(int argc, char** argv) { return wkcal::cli::run(argc, argv); }
