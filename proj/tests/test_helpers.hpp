#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qcard/sim.hpp"

namespace test_helpers {

// Scratch directory wiped per call, namespaced per test tag.
inline std::filesystem::path fresh_temp_dir(const std::string& tag) {
    const auto dir =
        std::filesystem::temp_directory_path() / ("qcard_test_" + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline void write_file(const std::filesystem::path& path,
                       const std::string& content) {
    std::ofstream out(path);
    out << content;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline double max_abs_diff(const qcard::sim::StateVector& a,
                           const qcard::sim::StateVector& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        worst = std::max(worst, std::abs(a.amps[i] - b.amps[i]));
    }
    return worst;
}

// |a - b| <= abs_floor or relatively within rel. Finite-difference oracles
// bottom out around 1e-9, so comparisons against them need a small floor.
inline bool close(double a, double b, double rel, double abs_floor) {
    const double diff = std::abs(a - b);
    return diff <= abs_floor || diff <= rel * std::max(std::abs(a), std::abs(b));
}

// Deterministic stream of doubles for property tests.
class RandomStream {
  public:
    explicit RandomStream(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng_);
    }
    int uniform_int(int lo, int hi) {
        return std::uniform_int_distribution<int>(lo, hi)(rng_);
    }

  private:
    std::mt19937_64 rng_;
};

} // namespace test_helpers
