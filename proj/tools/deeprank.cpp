#include <deeprank/cli.hpp>

#include <iostream>

int main(int argc, char** argv)
{
	return deeprank::cli::run(argc, argv, std::cout, std::cerr);
}
