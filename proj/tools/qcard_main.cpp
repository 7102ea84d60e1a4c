#include <qcard/cli.hpp>

int main(int argc, char** argv) {
    return qcard::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
