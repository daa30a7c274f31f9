#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dwr/adapt.hpp"

namespace dwr {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ReferenceKind { none, exact, file };

enum class OutputLevels { none, all, last };

struct StudyConfig {
  std::string experiment = "custom";
  Problem problem;
  std::string source = "constant 1";
  DomainSpec domain = DomainSpec::rectangle(0.0, 0.0, 1.0, 1.0);
  int initial_refinements = 1;
  MultiGoalConfig goals;
  ReferenceKind reference = ReferenceKind::none;
  std::vector<double> reference_values;
  std::filesystem::path reference_file;
  AdaptOptions adapt;
  std::filesystem::path output_dir = "out";
  OutputLevels indicators = OutputLevels::all;
  OutputLevels solutions = OutputLevels::last;
  std::size_t reference_max_dofs = 500000;
  bool verbose = false;
};

/// Defaults of the shipped studies: "example1", "example2", "custom".
StudyConfig experiment_defaults(const std::string& name, const std::filesystem::path& data_dir);

/// key = value lines, `#` comments. Relative paths resolve against base_dir.
/// Throws ConfigError with the offending line number.
StudyConfig parse_config(const std::string& text, const std::filesystem::path& base_dir,
                         const std::filesystem::path& data_dir);
StudyConfig load_config(const std::filesystem::path& path, const std::filesystem::path& data_dir);

/// Resolves the reference goal values (reads the file when needed).
void resolve_reference(StudyConfig& cfg);

std::vector<double> read_reference_file(const std::filesystem::path& path);
void write_reference_file(const std::filesystem::path& path, const std::vector<double>& values,
                          const std::string& comment);

/// Goal values on the finest uniform Q2 mesh whose dof count stays within
/// max_dofs, solved by nested warm-started Newton.
std::vector<double> compute_reference(const StudyConfig& cfg, std::size_t max_dofs, std::ostream* log = nullptr);

/// Runs the study and writes levels.csv, goals.csv, indicator and solution
/// dumps and plot.gp into cfg.output_dir. Throws SolverFailure.
std::vector<LevelRecord> run_study(const StudyConfig& cfg, std::ostream* log = nullptr);

extern const char* const kLevelsHeader;
void write_levels_csv(const std::vector<LevelRecord>& records, std::ostream& out);
std::vector<LevelRecord> read_levels_csv(std::istream& in);

/// Least-squares slope of log(error) against log(dofs) over the last `window`
/// entries; nonpositive errors are skipped. NaN when fewer than two points remain.
double slope(const std::vector<double>& dofs, const std::vector<double>& errors, std::size_t window);

}  // namespace dwr
