#pragma once

#include "pdsplit/solvers.hpp"

#include <json.hpp>

#include <filesystem>

namespace pdsplit {

using Json = nlohmann::json;

Json to_json(const LinearOperator& op);
LinearOperator operator_from_json(const Json& j);

Json to_json(const ConvexFunctionSpec& f);
ConvexFunctionSpec convex_from_json(const Json& j);

Json to_json(const SmoothFunctionSpec& f);
SmoothFunctionSpec smooth_from_json(const Json& j);

/// {"R", "F", "blocks": [{"J", "gstar", "L", "gamma"}], "gamma_r", "theta"}.
/// Dense operators are nested row arrays; the finite-difference operator is
/// {"type": "finite_difference", "n": N, "boundary": "neumann"}.
Json to_json(const PDProblem& p);
PDProblem problem_from_json(const Json& j);

/// {"x": [...], "v": [[...], ...]}
Json to_json(const PrimalDualPoint& z);
PrimalDualPoint solution_from_json(const Json& j);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

}  // namespace pdsplit
