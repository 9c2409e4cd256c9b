#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "crowdloc/scene.hpp"
#include "output.hpp"

namespace crowdloc::cli {

// Each subcommand registers its flags on `app` and returns the function that
// runs it after parsing.
using Runner = std::function<void()>;

Runner add_learn_priors(CLI::App& app, const GlobalOptions& g);
Runner add_evaluate(CLI::App& app, const GlobalOptions& g);
Runner add_match_demo(CLI::App& app, const GlobalOptions& g);
Runner add_simulate(CLI::App& app, const GlobalOptions& g);
Runner add_grad_check(CLI::App& app, const GlobalOptions& g);

// Loads an annotation file, picking the format from its extension. CSV files
// take their size from --image-size when given, else from the sidecar.
Scene load_scene(const std::filesystem::path& path, const GlobalOptions& g);

bool parse_on_off(const std::string& v);

}  // namespace crowdloc::cli
