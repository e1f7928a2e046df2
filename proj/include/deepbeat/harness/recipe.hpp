#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "deepbeat/sim.hpp"

namespace deepbeat::harness {

/// Parses `key = value` lines ('#' starts a comment). Unknown or repeated
/// keys are configuration errors. List values are comma separated;
/// noise_factors also accepts the named lists default, methods, figure.
sim::DatasetRecipe parse_recipe(std::string_view text);
sim::DatasetRecipe load_recipe(const std::filesystem::path& path);

/// Canonical text form; parse_recipe(format_recipe(r)) reproduces r.
std::string format_recipe(const sim::DatasetRecipe& recipe);

}  // namespace deepbeat::harness
