#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>

#include "svlq/fields.hpp"

namespace svlq {

using json = nlohmann::json;

// Declarative problem description; see docs/config.md for the schema.
Problem build_problem(const json& config);
Problem load_problem(const std::filesystem::path& path);

// Sampled representation that rebuilds to identical values.
json problem_to_json(const Problem& p);

// Same problem on a grid refined by `factor` (t0 index scaled along).
json refine_config(const json& config, int factor);

json matrix_to_json(const Mat& m);
Mat matrix_from_json(const json& j, int rows, int cols, const std::string& where);

}  // namespace svlq
