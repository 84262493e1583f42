#pragma once

// Persistence: the solution JSON document, CSV tables, atomic file writes.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "qpwave/diagnostics.hpp"
#include "qpwave/dynamics.hpp"
#include "qpwave/solver.hpp"

namespace qpwave {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kVersion = "1.0.0";

// A solution together with the run configuration that produced it.
struct SolutionDocument {
  SolutionRecord record;
  Json run_config;  // null when absent
};

Json problem_config_to_json(const ProblemConfig& cfg);

Json solution_to_json(const SolutionDocument& doc);
// Throws SchemaVersionMismatch or CorruptFile.
SolutionDocument solution_from_json(const Json& j);

// Pretty-printed with two-space indent and a trailing newline.
std::string dump_json(const Json& j);

void store_solution(const std::filesystem::path& path, const SolutionDocument& doc);
SolutionDocument load_solution(const std::filesystem::path& path);

// Writes to a sibling temporary file, then renames over the target.
void write_atomic(const std::filesystem::path& path, const std::string& content);

// Shortest decimal that round-trips; "inf", "-inf", "nan" for non-finite values.
std::string format_double(double x);

std::string trace_csv(const NewtonTrace& trace);
std::string sweep_csv(const AcceptanceReport& rep);
std::string theta_csv(const ThetaSweepResult& res);
std::string trajectory_csv(const TrajectorySummary& traj);
std::string bifurcation_csv(const BifurcationResult& res);

Json sweep_to_json(const AcceptanceReport& rep);
Json theta_to_json(const ThetaSweepResult& res);
Json trajectory_to_json(const TrajectorySummary& traj);
Json bifurcation_to_json(const BifurcationResult& res);
Json decay_fit_to_json(const DecayFit& f);

}  // namespace qpwave
