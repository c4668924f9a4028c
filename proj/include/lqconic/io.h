#pragma once

/// @file
/// JSON problem and result documents, trajectory CSV files, and the problem
/// hash that ties a result to the problem it was computed from.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lqconic/analyzers.h"
#include "lqconic/model.h"
#include "lqconic/riccati.h"

namespace lqconic {

inline constexpr std::string_view kSchemaVersion = "1.0";
inline constexpr std::string_view kToolVersion = "0.1.0";

/// Riccati equation given directly in standard form (M may be indefinite),
/// used by the DRI-cloud experiment.
struct StandardRiccati {
  MatrixFunction A;
  MatrixFunction M;
  MatrixFunction Q;
  SymMat lambda_f;
};

struct DocumentOptions {
  std::optional<double> tol;
  std::optional<double> escape_cap;
  std::optional<std::uint64_t> seed;
};

struct ProblemDocument {
  double T = 1.0;
  std::optional<int> steps;
  /// Set for every variant except "riccati".
  std::optional<ProblemSpec> spec;
  std::optional<StandardRiccati> riccati;
  DocumentOptions options;
  /// FNV-1a of the canonical system and variant sections.
  std::string hash;
};

/// Throws Error(kParse) with the position for malformed JSON and with the
/// field path for schema errors.  Grid settings are taken from `horizon`
/// unless overridden by the caller afterwards.
ProblemDocument parse_problem(std::string_view text);
ProblemDocument read_problem(const std::filesystem::path& path);

/// 64-bit FNV-1a, as 16 lower-case hex digits.
std::string fnv1a_hex(std::string_view bytes);

struct ResultDocument {
  std::string command;
  std::string problem_hash;
  std::optional<Certificate> certificate;
  std::optional<NormResult> norm;
};

std::string serialize_result(const ResultDocument& doc);
ResultDocument parse_result(std::string_view text);

/// Columns t and vec(Λ) (column-major), one row per node, 17 significant
/// digits; nodes outside the valid range are written as nan.
void write_trajectory_csv(const std::filesystem::path& path,
                          const MatTrajectory& traj);
MatTrajectory read_trajectory_csv(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

/// "%.17g"
std::string format_double(double v);

}  // namespace lqconic
