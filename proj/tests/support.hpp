#pragma once

// Helpers shared by the test binaries.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "kgagent/embedding.hpp"
#include "kgagent/rng.hpp"

namespace testing_support {

/// Unit vector along axis `i` in `dim` dimensions.
inline std::vector<double> axis(std::size_t dim, std::size_t i) {
    std::vector<double> v(dim, 0.0);
    v.at(i) = 1.0;
    return v;
}

/// An embedding whose cosine with axis 0 is exactly `c` (up to rounding),
/// lying in the plane of axes 0 and `other`.
inline kgagent::Embedding at_cosine(double c, std::size_t dim = 8, std::size_t other = 1, double scale = 1.0) {
    std::vector<double> v(dim, 0.0);
    v[0] = c * scale;
    v[other] = std::sqrt(std::max(0.0, 1.0 - c * c)) * scale;
    return kgagent::Embedding(v);
}

inline kgagent::Embedding random_embedding(kgagent::Rng& rng, std::size_t dim) {
    std::vector<double> v(dim);
    for (auto& x : v) x = rng.normal();
    return kgagent::Embedding(v);
}

/// Fresh directory under the system temp dir, removed by the destructor.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path = std::filesystem::temp_directory_path() /
               ("kgagent_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
};

} // namespace testing_support
