#pragma once

// Dataset ingestion, JSON serialization and the command layer behind the CLI.
// Every command returns an exit code and a JSON report; none of them touches
// stdout, and none of them records wall-clock time, so reports are
// reproducible byte for byte.

#include "exdep/common.hpp"
#include "exdep/cp_decomposition.hpp"
#include "exdep/failure_regions.hpp"
#include "exdep/max_linear.hpp"
#include "exdep/tail_margins.hpp"
#include "exdep/tpdm.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace exdep {

using Json = nlohmann::ordered_json;

enum ExitCode : int {
  kExitOk = 0,
  kExitInput = 2,
  kExitDegenerate = 3,
  kExitExhausted = 4,
};

/// Malformed or unreadable input (maps to exit code 2).
class InputError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

// ---------------------------------------------------------------------------
// CSV

struct CsvTable {
  std::vector<std::string> names;
  Matrix data;
  std::size_t rows_read = 0;     ///< data rows in the file
  std::size_t rows_dropped = 0;  ///< rows removed for missing fields
};

/// Numeric CSV with an optional header row. Empty fields, NA and NaN mark
/// missing values; rows with any missing field are dropped and counted.
CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text, const std::string& source = "<memory>");

std::string format_csv(const Matrix& data, const std::vector<std::string>& names = {});
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

// ---------------------------------------------------------------------------
// JSON helpers

/// Finite numbers as numbers, infinities and NaN as the strings "inf", "-inf", "nan".
Json number_json(double x);
double json_number(const Json& j);
Json matrix_json(const Matrix& m);
Matrix json_matrix(const Json& j);
Json vector_json(const Vector& v);

Json to_json(const TailIndexEstimate& est, bool with_path = false);
Json to_json(const GpdFit& fit);
Json to_json(const TpdmValidation& v);
/// Paths are written 1-based.
Json to_json(const DecompositionResult& res);
Json model_json(const MaxLinearModel& model);
MaxLinearModel json_model(const Json& j);
TailMatrix json_tail_matrix(const Json& j, double fallback_alpha = 0.0);

/// {kind, x, v?, groups?, f?, degree?, normalize?}; groups are 1-based.
/// Generic regions name their functional: "mean", "sum", "product", "min", "max".
FailureRegion json_region(const Json& j, Index d);
Json region_json(const FailureRegion& region);

struct SummaryStats {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0, mean = 0.0;
  std::size_t count = 0;
};

/// Quartiles by linear interpolation between order statistics (type 7).
SummaryStats summarize(std::vector<double> values);
Json to_json(const SummaryStats& s);

// ---------------------------------------------------------------------------
// Commands

enum class AlphaMode { PerColumn, Pooled, Fixed };
enum class Strategy { Simple, Exhaustive, Pragmatic, Enumerate };

std::string to_string(AlphaMode mode);
std::string to_string(Strategy strategy);
Strategy strategy_from_string(const std::string& name);

struct PipelineConfig {
  AlphaMode alpha_mode = AlphaMode::PerColumn;
  double alpha = 2.0;  ///< used when alpha_mode == Fixed
  double quantile_level = 0.95;
  double gpd_level = 0.95;
  bool standardize = false;
  Strategy strategy = Strategy::Pragmatic;
  std::uint64_t seed = 1;
  std::size_t max_restarts = 100000;
  std::size_t n_decompositions = 200;
  double gap_threshold = 5.0;
  bool include_factor = false;  ///< tpdm: embed the empirical factor
  unsigned threads = 1;         ///< never echoed into reports
  DecompositionOptions decomposition{};
  TailIndexConfig tail{};

  // Optional side outputs and inputs.
  std::string standardized_csv;  ///< margins: standardized data
  std::string sigma_csv;         ///< tpdm: d x d matrix
  std::string data_csv;          ///< simulate: output; prob: data for the empirical estimate
  std::string summary_csv;       ///< prob: summary statistics for plotting

  void validate() const;
  Exec exec() const { return Exec{threads}; }
};

Json config_json(const PipelineConfig& cfg);

struct CommandResult {
  int exit_code = kExitOk;
  Json report;
  std::string message;
};

/// Runs `fn`, translating library exceptions into exit codes 2 and 3.
template <class Fn>
CommandResult guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const EstimationError& e) {
    return {kExitDegenerate, Json::object(), e.what()};
  } catch (const ConsistencyError& e) {
    return {kExitDegenerate, Json::object(), e.what()};
  } catch (const std::exception& e) {
    return {kExitInput, Json::object(), e.what()};
  }
}

CommandResult cmd_margins(const std::string& csv_path, const PipelineConfig& cfg);
CommandResult cmd_tpdm(const std::string& csv_path, const PipelineConfig& cfg);
CommandResult cmd_decompose(const std::string& tpdm_path, const PipelineConfig& cfg);
CommandResult cmd_prob(const std::string& decompositions_path, const std::string& region_path,
                       const PipelineConfig& cfg);
CommandResult cmd_simulate(const std::string& model_path, std::size_t n,
                           const PipelineConfig& cfg);
CommandResult cmd_reproduce_synthetic(const PipelineConfig& cfg);

// In-memory forms used by the file commands.
Json margins_report(const CsvTable& table, const PipelineConfig& cfg);
Json tpdm_report(const CsvTable& table, const PipelineConfig& cfg);
CommandResult decompose_report(const TailMatrix& sigma, const PipelineConfig& cfg,
                               const Json& carry = Json::object());
CommandResult prob_report(const Json& decompositions, const Json& region, const PipelineConfig& cfg,
                          const Matrix* data = nullptr);
Json reproduce_synthetic_report(const PipelineConfig& cfg);

}  // namespace exdep
