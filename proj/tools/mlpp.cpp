#include "mlpp/cli.hpp"

int main(int argc, char** argv) { return mlpp::run_cli(argc, argv); }
