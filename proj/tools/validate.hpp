#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dbsde::app {

struct CheckRow {
    std::string name;
    bool pass = false;
    std::string detail;
};

/// Oracle self-checks behind the `validate` subcommand.
std::vector<CheckRow> run_validation(std::uint64_t seed);

}  // namespace dbsde::app
