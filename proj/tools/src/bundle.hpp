#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "config_file.hpp"
#include "funnel/pipeline.hpp"
#include "funnel/verify.hpp"

namespace funnel::tools {

/// Locale-independent, 17 significant digits, round-trips exactly.
std::string format_double(double value);
double parse_double(const std::string& token);

/// Simple CSV table: header plus rows of already formatted cells.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  ///< throws if absent
};

void write_table(const std::string& path, const Table& table);
Table read_table(const std::string& path);

/// File names inside a solution directory.
namespace files {
inline constexpr const char* kConfig = "config.cfg";
inline constexpr const char* kTrajectory = "trajectory.csv";
inline constexpr const char* kFunnel = "funnel.csv";
inline constexpr const char* kIterations = "iterations.csv";
inline constexpr const char* kVerification = "verification.csv";
inline constexpr const char* kPaths = "verification_paths.csv";
inline constexpr const char* kSummary = "summary.json";
inline constexpr const char* kFigures = "figures";
}  // namespace files

Table trajectory_table(const Trajectory& t);
Trajectory trajectory_from(const Table& table, int state_dim, int input_dim);

/// Q_k (lower triangle by columns), Y_k and K_k (row-major) and beta_k.
Table funnel_table(const Funnel& f, int state_dim, int input_dim);
Funnel funnel_from(const Table& table, int state_dim, int input_dim);

Table iterations_table(const std::vector<IterationRecord>& history);

/// One row per sample and node with the containment value and every
/// constraint margin; input margins are empty on the last node.
Table verification_table(const VerificationReport& report, const ConstraintSet& constraints);
/// Rollout states, inputs and disturbances per sample and node.
Table paths_table(const VerificationReport& report);

nlohmann::json verification_summary(const VerificationReport& report, const VerifySettings& settings);

void write_json(const std::string& path, const nlohmann::json& document);
nlohmann::json read_json(const std::string& path);

}  // namespace funnel::tools
