#pragma once

#include <cstdint>
#include <filesystem>
#include <unistd.h>
#include <memory>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include <dbsde/dbsde.hpp>

namespace dbsde::testing {

inline std::shared_ptr<const BrownianEnsemble> gaussian(const TimeGrid& g, std::size_t M, std::uint64_t seed,
                                                        std::size_t d = 1) {
    return std::make_shared<const BrownianEnsemble>(BrownianEnsemble::gaussian(g, M, d, seed));
}

inline std::shared_ptr<const BrownianEnsemble> tree(const TimeGrid& g, std::uint64_t seed = 0) {
    return std::make_shared<const BrownianEnsemble>(BrownianEnsemble::bernoulli_tree(g, seed));
}

/// Swallows warnings for the lifetime of the object.
struct QuietWarnings {
    ScopedWarningHandler guard{[](const std::string&) {}};
};

struct WarningCapture {
    std::vector<std::string> messages;
    ScopedWarningHandler guard{[this](const std::string& m) { messages.push_back(m); }};
};

/// Restores the default thread cap on scope exit.
struct ThreadCap {
    explicit ThreadCap(int n) { set_num_threads(n); }
    ~ThreadCap() { set_num_threads(0); }
};

inline std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() /
            ("dbsde_" + std::to_string(::getpid()) + "_" + name)).string();
}

}  // namespace dbsde::testing
