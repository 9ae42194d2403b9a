#pragma once

// Experiment configuration (YAML) and the command-line subcommands.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include <dbsde/dbsde.hpp>

namespace dbsde::app {

enum ExitCode : int { kOk = 0, kNumericalFailure = 1, kConfigError = 2 };

struct Experiment {
    YAML::Node root;
    TimeGrid grid;
    bool tree = false;
    std::size_t paths = 0;
    std::uint64_t seed = 0;
    ForwardModel model;
    DiscretePath phi;
    GeneratorSpec generator;
    Payoff payoff;
    SolverConfig solver;
    std::string out_dir = "out";

    std::shared_ptr<const BrownianEnsemble> brownian() const;
    std::shared_ptr<const BrownianEnsemble> brownian(const TimeGrid& g, std::size_t m) const;
};

/// Parses YAML text; `origin` names the source in diagnostics.
YAML::Node parse_config(const std::string& text, const std::string& origin = "config");
YAML::Node load_config(const std::string& path);

/// `a.b.c=value`, value parsed as YAML.
void apply_override(YAML::Node& root, const std::string& assignment);

/// Validates the tree and builds the experiment. Throws ConfigurationError
/// with "origin:line: message" diagnostics.
Experiment build_experiment(const YAML::Node& root);

/// Full command line, e.g. {"dbsde", "price", "--config", "x.yaml"}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dbsde::app
