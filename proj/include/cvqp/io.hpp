/**
 * @file io.hpp
 * @brief JSON interchange for problems and solver results.
 *
 * Problem document:
 *
 *   { "P": [[...], ...] | {"diag": [...]},
 *     "q": [...], "A": [[...], ...], "B": [[...], ...],
 *     "l": [...], "u": [...], "beta": 0.95, "kappa": 0.3 }
 *
 * Matrices are row-major arrays of rows. Infinite bounds (and kappa) are
 * written as the strings "inf" / "-inf".
 */
#pragma once

#include "cvqp/core.hpp"
#include "cvqp/solver.hpp"

#include "json.hpp"

#include <string>

namespace cvqp {

nlohmann::json problem_to_json(const CvqpProblem& problem);

/// Throws Error(ParseError) on missing fields or wrong shapes.
CvqpProblem problem_from_json(const nlohmann::json& doc);

CvqpProblem load_problem(const std::string& path);
void save_problem(const CvqpProblem& problem, const std::string& path);

nlohmann::json result_to_json(const SolverResult& result);

}  // namespace cvqp
