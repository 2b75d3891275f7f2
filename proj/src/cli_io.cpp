#include "exdep/cli_io.hpp"

#include "exdep/fixtures.hpp"
#include "exdep/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

namespace exdep {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "na";
}

bool parse_double(const std::string& cell, double& out) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (begin != end && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

std::string json_string(const Json& j, const char* key, const std::string& fallback) {
  return j.contains(key) ? j.at(key).get<std::string>() : fallback;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

Json load_json_file(const std::string& path) {
  const auto text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path + ": invalid JSON: " + e.what());
  }
}

bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

Vector column_alphas(const Matrix& data, const TailIndexConfig& tail, Json& report) {
  Vector alphas(data.cols());
  for (Index j = 0; j < data.cols(); ++j) {
    const Vector col = data.col(j);
    const auto est = automated_tail_index(std::span<const double>(col.data(), col.size()), tail);
    alphas(j) = est.alpha_hat;
    report.push_back(to_json(est));
  }
  return alphas;
}

Json input_json(const std::string& source, const CsvTable& table) {
  return Json{{"source", source},
              {"rows_read", table.rows_read},
              {"rows_dropped", table.rows_dropped},
              {"rows_used", table.data.rows()},
              {"columns", table.names}};
}

std::vector<Index> one_based(const std::vector<Index>& path) {
  std::vector<Index> out(path);
  for (auto& p : out) ++p;
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// CSV

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << text;
  if (!out) throw InputError("failed writing " + path);
}

CsvTable parse_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    rows.push_back(split_fields(line));
    line_numbers.push_back(line_no);
  }
  if (rows.empty()) throw InputError(source + ": no data");

  CsvTable table;
  const std::size_t width = rows.front().size();
  bool header = false;
  for (const auto& cell : rows.front()) {
    double v;
    if (!is_missing(cell) && !parse_double(cell, v)) header = true;
  }
  std::size_t first = 0;
  if (header) {
    table.names = rows.front();
    first = 1;
  } else {
    for (std::size_t j = 0; j < width; ++j) table.names.push_back("c" + std::to_string(j + 1));
  }

  std::vector<double> values;
  std::size_t kept = 0;
  for (std::size_t r = first; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != width) {
      throw InputError(source + ":" + std::to_string(line_numbers[r]) + ": expected " +
                       std::to_string(width) + " fields, found " + std::to_string(row.size()));
    }
    ++table.rows_read;
    bool missing = false;
    std::vector<double> parsed(width);
    for (std::size_t j = 0; j < width; ++j) {
      if (is_missing(row[j])) {
        missing = true;
        continue;
      }
      if (!parse_double(row[j], parsed[j])) {
        throw InputError(source + ":" + std::to_string(line_numbers[r]) + ": non-numeric value '" +
                         row[j] + "'");
      }
    }
    if (missing) {
      ++table.rows_dropped;
      continue;
    }
    values.insert(values.end(), parsed.begin(), parsed.end());
    ++kept;
  }
  if (kept == 0) throw InputError(source + ": no complete rows");
  table.data = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), static_cast<Index>(kept), static_cast<Index>(width));
  return table;
}

CsvTable read_csv(const std::string& path) { return parse_csv(read_text_file(path), path); }

std::string format_csv(const Matrix& data, const std::vector<std::string>& names) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t j = 0; j < names.size(); ++j) os << (j ? "," : "") << names[j];
  if (!names.empty()) os << '\n';
  for (Index i = 0; i < data.rows(); ++i) {
    for (Index j = 0; j < data.cols(); ++j) os << (j ? "," : "") << data(i, j);
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// JSON helpers

Json number_json(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

double json_number(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw InputError("expected a number in JSON, found " + j.dump());
}

Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(number_json(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix json_matrix(const Json& j) {
  if (!j.is_array() || j.empty()) throw InputError("expected a non-empty array of rows");
  const auto rows = static_cast<Index>(j.size());
  const auto cols = static_cast<Index>(j.front().size());
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      throw InputError("matrix rows have unequal length");
    }
    for (Index c = 0; c < cols; ++c) m(r, c) = json_number(row.at(static_cast<std::size_t>(c)));
  }
  return m;
}

Json vector_json(const Vector& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(number_json(v(i)));
  return out;
}

Json to_json(const TailIndexEstimate& est, bool with_path) {
  Json j{{"alpha_hat", number_json(est.alpha_hat)},
         {"gamma_hat", est.gamma_hat},
         {"k_used", est.k_used},
         {"eyeball_fallback", est.fallback}};
  if (with_path) {
    Json path = Json::array();
    for (const auto& [k, g] : est.path) path.push_back(Json::array({k, g}));
    j["path"] = std::move(path);
  }
  return j;
}

Json to_json(const GpdFit& fit) {
  return Json{{"threshold", fit.threshold},   {"sigma", fit.sigma_hat},
              {"gamma", fit.gamma_hat},       {"n_exceed", fit.n_exceed},
              {"method", fit.method},         {"degenerate", fit.degenerate},
              {"log_likelihood", number_json(fit.log_likelihood)}};
}

Json to_json(const TpdmValidation& v) {
  return Json{{"symmetric", v.symmetric},
              {"nonnegative", v.nonnegative},
              {"psd", v.psd},
              {"symmetry_defect", v.symmetry_defect},
              {"min_entry", v.min_entry},
              {"min_eigenvalue", v.min_eigenvalue},
              {"psd_tolerance", v.psd_tolerance}};
}

Json to_json(const DecompositionResult& res) {
  Json d_values = Json::array();
  for (double v : res.d_values) d_values.push_back(number_json(v));
  return Json{{"path", one_based(res.path)},
              {"A_star", matrix_json(res.a_star)},
              {"A", matrix_json(res.a)},
              {"D_values", std::move(d_values)},
              {"frobenius_gap", res.frobenius_gap},
              {"exact", res.exact},
              {"degenerate", res.degenerate},
              {"boundary_steps", res.boundary_steps},
              {"nonzero_columns", prune_zero_columns(res.a_star).cols()}};
}

Json model_json(const MaxLinearModel& model) {
  return Json{{"alpha", model.alpha()},
              {"d", model.dim()},
              {"q", model.factors()},
              {"A", matrix_json(model.coefficients())}};
}

MaxLinearModel json_model(const Json& j) {
  if (!j.contains("A") || !j.contains("alpha")) throw InputError("model JSON needs A and alpha");
  return MaxLinearModel(json_matrix(j.at("A")), json_number(j.at("alpha")));
}

TailMatrix json_tail_matrix(const Json& j, double fallback_alpha) {
  if (!j.contains("sigma")) throw InputError("TPDM JSON needs a sigma field");
  double alpha = fallback_alpha;
  if (j.contains("alpha")) alpha = json_number(j.at("alpha"));
  if (!(alpha > 0.0)) throw InputError("TPDM file carries no tail index; pass --alpha");
  return TailMatrix(json_matrix(j.at("sigma")), alpha);
}

FailureRegion json_region(const Json& j, Index d) {
  if (!j.is_object() || !j.contains("kind")) throw InputError("region JSON needs a kind");
  const auto kind = region_kind_from_string(j.at("kind").get<std::string>());
  const double x = j.contains("x") && !j.at("x").is_array() ? json_number(j.at("x")) : 1.0;
  const bool normalize = j.value("normalize", false);

  auto weights = [&](double fill) {
    if (!j.contains("v")) return Vector(Vector::Constant(d, fill));
    Vector v(static_cast<Index>(j.at("v").size()));
    for (Index i = 0; i < v.size(); ++i) v(i) = json_number(j.at("v").at(static_cast<std::size_t>(i)));
    if (v.size() != d) throw InputError("weight vector length does not match dimension");
    if (normalize) v /= v.sum();
    return v;
  };
  auto groups = [&]() {
    Groups g;
    if (!j.contains("groups")) {
      g.emplace_back(static_cast<std::size_t>(d));
      std::iota(g.front().begin(), g.front().end(), Index{0});
      return g;
    }
    for (const auto& grp : j.at("groups")) {
      std::vector<Index> members;
      for (const auto& idx : grp) members.push_back(idx.get<Index>() - 1);
      g.push_back(std::move(members));
    }
    return g;
  };

  FailureRegion region;
  switch (kind) {
    case RegionKind::Max:
    case RegionKind::Min: {
      Vector xs = Vector::Constant(d, x);
      if (j.contains("x") && j.at("x").is_array()) {
        if (static_cast<Index>(j.at("x").size()) != d) {
          throw InputError("threshold vector length does not match dimension");
        }
        for (Index i = 0; i < d; ++i) xs(i) = json_number(j.at("x").at(static_cast<std::size_t>(i)));
      }
      region = kind == RegionKind::Max ? FailureRegion::max(xs) : FailureRegion::min(xs);
      break;
    }
    case RegionKind::Sum:
      region = FailureRegion::sum(weights(1.0 / static_cast<double>(d)), x);
      break;
    case RegionKind::MinOfSums:
      region = FailureRegion::min_of_sums(weights(1.0), groups(), x);
      break;
    case RegionKind::MaxOfSums:
      region = FailureRegion::max_of_sums(weights(1.0), groups(), x);
      break;
    case RegionKind::Generic: {
      const auto name = json_string(j, "f", "mean");
      if (name == "mean") {
        region = FailureRegion::generic([](const Vector& y) { return y.mean(); }, x, 1.0, name);
      } else if (name == "sum") {
        const Vector v = weights(1.0);
        region = FailureRegion::generic([v](const Vector& y) { return v.dot(y); }, x, 1.0, name);
      } else if (name == "product") {
        region = FailureRegion::generic([](const Vector& y) { return y.prod(); }, x,
                                        static_cast<double>(d), name);
      } else if (name == "min") {
        region = FailureRegion::generic([](const Vector& y) { return y.minCoeff(); }, x, 1.0, name);
      } else if (name == "max") {
        region = FailureRegion::generic([](const Vector& y) { return y.maxCoeff(); }, x, 1.0, name);
      } else {
        throw InputError("unknown functional '" + name + "'");
      }
      if (j.contains("degree")) region.degree = json_number(j.at("degree"));
      break;
    }
  }
  region.validate(d);
  return region;
}

Json region_json(const FailureRegion& region) {
  Json j{{"kind", to_string(region.kind)}};
  if (region.kind == RegionKind::Max || region.kind == RegionKind::Min) {
    j["x"] = vector_json(region.x);
  } else {
    j["x"] = region.threshold;
  }
  if (region.v.size() > 0) j["v"] = vector_json(region.v);
  if (!region.groups.empty()) {
    Json groups = Json::array();
    for (const auto& g : region.groups) groups.push_back(one_based(g));
    j["groups"] = std::move(groups);
  }
  if (region.kind == RegionKind::Generic) {
    j["f"] = region.label;
    j["degree"] = region.degree;
  }
  return j;
}

SummaryStats summarize(std::vector<double> values) {
  SummaryStats s;
  s.count = values.size();
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  auto quantile = [&](double p) {
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  s.min = values.front();
  s.max = values.back();
  s.q1 = quantile(0.25);
  s.median = quantile(0.5);
  s.q3 = quantile(0.75);
  CompensatedSum acc;
  for (double v : values) acc.add(v);
  s.mean = acc.value() / static_cast<double>(values.size());
  return s;
}

Json to_json(const SummaryStats& s) {
  return Json{{"count", s.count}, {"min", s.min}, {"q1", s.q1},     {"median", s.median},
              {"q3", s.q3},       {"max", s.max}, {"mean", s.mean}};
}

// ---------------------------------------------------------------------------
// Configuration

std::string to_string(AlphaMode mode) {
  switch (mode) {
    case AlphaMode::PerColumn: return "per-column";
    case AlphaMode::Pooled: return "pooled";
    case AlphaMode::Fixed: return "fixed";
  }
  return "unknown";
}

std::string to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::Simple: return "simple";
    case Strategy::Exhaustive: return "exhaustive";
    case Strategy::Pragmatic: return "pragmatic";
    case Strategy::Enumerate: return "enumerate";
  }
  return "unknown";
}

Strategy strategy_from_string(const std::string& name) {
  if (name == "simple") return Strategy::Simple;
  if (name == "exhaustive") return Strategy::Exhaustive;
  if (name == "pragmatic") return Strategy::Pragmatic;
  if (name == "enumerate") return Strategy::Enumerate;
  throw InputError("unknown strategy '" + name + "'");
}

void PipelineConfig::validate() const {
  auto level_ok = [](double p) { return p > 0.0 && p < 1.0; };
  if (!level_ok(quantile_level)) throw InputError("quantile level must lie in (0, 1)");
  if (!level_ok(gpd_level)) throw InputError("GPD threshold level must lie in (0, 1)");
  if (n_decompositions < 1) throw InputError("number of decompositions must be at least 1");
  if (max_restarts < 1) throw InputError("max restarts must be at least 1");
  if (alpha_mode == AlphaMode::Fixed && !(alpha > 0.0 && std::isfinite(alpha))) {
    throw InputError("alpha must be positive");
  }
}

Json config_json(const PipelineConfig& cfg) {
  Json j{{"alpha_mode", to_string(cfg.alpha_mode)}};
  if (cfg.alpha_mode == AlphaMode::Fixed) j["alpha"] = cfg.alpha;
  j["quantile_level"] = cfg.quantile_level;
  j["gpd_level"] = cfg.gpd_level;
  j["standardize"] = cfg.standardize;
  j["strategy"] = to_string(cfg.strategy);
  j["seed"] = cfg.seed;
  j["max_restarts"] = cfg.max_restarts;
  j["n_decompositions"] = cfg.n_decompositions;
  j["gap_threshold"] = cfg.gap_threshold;
  j["tol_d"] = cfg.decomposition.tol_d;
  j["exact_tol"] = cfg.decomposition.exact_tol;
  return j;
}

// ---------------------------------------------------------------------------
// margins

Json margins_report(const CsvTable& table, const PipelineConfig& cfg) {
  cfg.validate();
  Json report{{"command", "margins"}, {"config", config_json(cfg)}};
  const Matrix& data = table.data;
  Json columns = Json::array();
  for (Index j = 0; j < data.cols(); ++j) {
    const Vector col = data.col(j);
    const std::span<const double> sample(col.data(), static_cast<std::size_t>(col.size()));
    const auto est = automated_tail_index(sample, cfg.tail);
    StandardizeConfig sc;
    sc.threshold_level = cfg.gpd_level;
    const auto cdf = fit_semiparametric_cdf(sample, sc);
    Json entry{{"name", table.names[static_cast<std::size_t>(j)]}};
    entry.update(to_json(est));
    entry["gpd"] = to_json(cdf.tail());
    columns.push_back(std::move(entry));
  }
  report["columns"] = std::move(columns);
  if (cfg.alpha_mode == AlphaMode::Pooled) {
    report["pooled"] = to_json(pooled_alpha_automated(data, cfg.tail));
  }
  if (!cfg.standardized_csv.empty()) {
    StandardizeConfig sc;
    sc.threshold_level = cfg.gpd_level;
    const auto std_data = standardize_frechet(data, sc, cfg.exec());
    write_text_file(cfg.standardized_csv, format_csv(std_data.values, table.names));
    report["standardized_csv"] = cfg.standardized_csv;
    report["plateau_guards"] = std_data.plateau_guards;
  }
  return report;
}

CommandResult cmd_margins(const std::string& csv_path, const PipelineConfig& cfg) {
  return guarded([&] {
    const auto table = read_csv(csv_path);
    auto report = margins_report(table, cfg);
    report["input"] = input_json(csv_path, table);
    return CommandResult{kExitOk, std::move(report), {}};
  });
}

// ---------------------------------------------------------------------------
// tpdm

Json tpdm_report(const CsvTable& table, const PipelineConfig& cfg) {
  cfg.validate();
  Json report{{"command", "tpdm"}, {"config", config_json(cfg)}};
  Matrix data = table.data;
  double alpha = cfg.alpha;
  std::string source = "fixed";
  if (cfg.standardize) {
    StandardizeConfig sc;
    sc.threshold_level = cfg.gpd_level;
    data = standardize_frechet(data, sc, cfg.exec()).values;
    alpha = 2.0;
    source = "standardized";
  } else if (cfg.alpha_mode == AlphaMode::Pooled) {
    const auto est = pooled_alpha_automated(data, cfg.tail);
    alpha = est.alpha_hat;
    source = "pooled";
    report["pooled"] = to_json(est);
  } else if (cfg.alpha_mode == AlphaMode::PerColumn) {
    Json per_column = Json::array();
    const Vector alphas = column_alphas(data, cfg.tail, per_column);
    alpha = alphas.mean();
    source = "per-column-mean";
    report["per_column"] = std::move(per_column);
  }
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw EstimationError("tail index estimate is not a positive finite number");
  }

  const auto polar = polar_transform(data, alpha);
  const auto mass = estimate_mass(polar, cfg.quantile_level);
  const auto est = estimate_tpdm(polar, mass, cfg.exec());

  report["alpha"] = alpha;
  report["alpha_source"] = source;
  report["d"] = data.cols();
  report["names"] = table.names;
  report["n"] = mass.n;
  report["dropped_zero_rows"] = polar.dropped_zero_rows;
  report["quantile_level"] = cfg.quantile_level;
  report["r0"] = mass.r0;
  report["n_exc"] = mass.n_exc;
  report["m_hat"] = mass.m_hat;
  report["sigma"] = matrix_json(est.matrix.sigma());
  report["validation"] = to_json(est.validation);
  report["psd_warning"] = est.psd_warning;
  Json stability = Json::array();
  for (const auto& row : mass_stability_table(polar)) {
    stability.push_back(
        Json{{"level", row.level}, {"r0", row.r0}, {"n_exc", row.n_exc}, {"m_hat", row.m_hat}});
  }
  report["stability"] = std::move(stability);
  if (cfg.include_factor) report["empirical_factor"] = matrix_json(empirical_factor(polar, mass));
  if (!cfg.sigma_csv.empty()) {
    write_text_file(cfg.sigma_csv, format_csv(est.matrix.sigma(), table.names));
    report["sigma_csv"] = cfg.sigma_csv;
  }
  return report;
}

CommandResult cmd_tpdm(const std::string& csv_path, const PipelineConfig& cfg) {
  return guarded([&] {
    const auto table = read_csv(csv_path);
    auto report = tpdm_report(table, cfg);
    report["input"] = input_json(csv_path, table);
    return CommandResult{kExitOk, std::move(report), {}};
  });
}

// ---------------------------------------------------------------------------
// decompose

CommandResult decompose_report(const TailMatrix& sigma, const PipelineConfig& cfg,
                               const Json& carry) {
  cfg.validate();
  const auto& opts = cfg.decomposition;
  Json report{{"command", "decompose"},
              {"config", config_json(cfg)},
              {"alpha", sigma.alpha()},
              {"d", sigma.dim()},
              {"sigma", matrix_json(sigma.sigma())},
              {"strategy", to_string(cfg.strategy)},
              {"n_requested", cfg.n_decompositions}};

  std::vector<DecompositionResult> found;
  Json search;
  switch (cfg.strategy) {
    case Strategy::Simple: {
      auto res = search_simple(sigma, opts);
      search = Json{{"max_d", number_json(res.max_d())}};
      if (res.exact) found.push_back(std::move(res));
      break;
    }
    case Strategy::Exhaustive:
      found = search_exhaustive(sigma, cfg.n_decompositions, opts);
      search = Json::object();
      break;
    case Strategy::Pragmatic: {
      auto col = collect_pragmatic(sigma, cfg.n_decompositions, cfg.seed, cfg.max_restarts, opts,
                                   cfg.exec());
      search = Json{{"restarts", col.restarts},
                    {"dead_ends", col.dead_ends},
                    {"duplicates", col.duplicates}};
      found = std::move(col.results);
      break;
    }
    case Strategy::Enumerate: {
      auto census = enumerate_all_paths(sigma, opts, cfg.gap_threshold, cfg.exec());
      search = Json{{"paths", census.total},
                    {"usable", census.usable},
                    {"exact", census.exact},
                    {"within_gap", census.within_gap}};
      for (auto& res : census.results) {
        if (res.exact && found.size() < cfg.n_decompositions) found.push_back(std::move(res));
      }
      break;
    }
  }
  report["search"] = std::move(search);
  report["n_found"] = found.size();
  Json list = Json::array();
  for (const auto& res : found) list.push_back(to_json(res));
  report["decompositions"] = std::move(list);
  for (const auto& [key, value] : carry.items()) report[key] = value;

  if (found.empty()) {
    report["best_approximate"] = to_json(search_simple(sigma, opts));
    return {kExitExhausted, std::move(report), "no exact decomposition found within the budget"};
  }
  return {kExitOk, std::move(report), {}};
}

CommandResult cmd_decompose(const std::string& tpdm_path, const PipelineConfig& cfg) {
  return guarded([&] {
    const double fallback = cfg.alpha_mode == AlphaMode::Fixed ? cfg.alpha : 0.0;
    if (has_suffix(tpdm_path, ".csv")) {
      if (fallback <= 0.0) throw InputError("a CSV TPDM needs --alpha");
      const auto table = read_csv(tpdm_path);
      return decompose_report(TailMatrix(table.data, fallback), cfg);
    }
    const auto j = load_json_file(tpdm_path);
    Json carry = Json::object();
    for (const char* key : {"m_hat", "r0", "n_exc", "empirical_factor"}) {
      if (j.contains(key)) carry[key] = j.at(key);
    }
    return decompose_report(json_tail_matrix(j, fallback), cfg, carry);
  });
}

// ---------------------------------------------------------------------------
// prob

CommandResult prob_report(const Json& decompositions, const Json& region_spec,
                          const PipelineConfig& cfg, const Matrix* data) {
  if (!decompositions.contains("decompositions") || !decompositions.contains("alpha")) {
    throw InputError("decomposition file needs alpha and decompositions");
  }
  const double alpha = json_number(decompositions.at("alpha"));
  const auto d = decompositions.at("d").get<Index>();
  FailureRegion region = json_region(region_spec, d);
  if (data != nullptr && data->cols() != d) {
    throw InputError("data has " + std::to_string(data->cols()) + " columns, expected " +
                     std::to_string(d));
  }

  Json report{{"command", "prob"}, {"alpha", alpha}, {"d", d}};
  if (region_spec.contains("x_quantile")) {
    if (data == nullptr) throw InputError("x_quantile needs data (--data)");
    const double level = json_number(region_spec.at("x_quantile"));
    std::vector<double> values(static_cast<std::size_t>(data->rows()));
    const FailureRegion unit = region.at_scale(1.0);
    for (Index i = 0; i < data->rows(); ++i) {
      values[static_cast<std::size_t>(i)] = unit.excess_ratio(data->row(i).transpose());
    }
    const double q = order_statistic_quantile(values, level);
    if (!(q > 0.0)) throw InputError("empirical threshold quantile is not positive");
    region = region.at_scale(q);
    report["x_quantile"] = level;
  }
  if (region.kind == RegionKind::Sum || region.kind == RegionKind::MinOfSums ||
      region.kind == RegionKind::MaxOfSums) {
    report["weights"] = region_spec.value("normalize", false) ? "normalized" : "raw";
  }
  report["region"] = region_json(region);

  Json per = Json::array();
  std::vector<double> ps;
  for (const auto& dec : decompositions.at("decompositions")) {
    if (!dec.value("exact", false)) continue;
    const Matrix a = prune_zero_columns(json_matrix(dec.at("A")), 0.0);
    if (a.rows() != d) throw InputError("decomposition dimension mismatch");
    const auto fp = failure_probability(MaxLinearModel(a, alpha), region);
    ps.push_back(fp.p);
    Json contributions = Json::array();
    for (double c : fp.per_column) contributions.push_back(c);
    per.push_back(Json{{"path", dec.at("path")},
                       {"nu", fp.nu},
                       {"p", fp.p},
                       {"flags", Json{{"not_extreme", fp.not_extreme}, {"clamped", fp.clamped}}},
                       {"per_column_contributions", std::move(contributions)}});
  }
  report["n_exact"] = ps.size();
  report["per_decomposition"] = std::move(per);
  const auto stats = summarize(ps);
  report["summary"] = to_json(stats);

  if (region.kind == RegionKind::Sum && (alpha == 1.0 || alpha == 2.0) &&
      decompositions.contains("sigma")) {
    const TailMatrix sigma(json_matrix(decompositions.at("sigma")), alpha);
    report["nu_from_tpdm"] = nu_sum_from_tpdm(sigma, region.v, region.threshold);
  }
  if (decompositions.contains("empirical_factor")) {
    const Matrix factor = json_matrix(decompositions.at("empirical_factor"));
    const Matrix a = alpha == 2.0 ? factor : entrywise_power(factor, 2.0 / alpha);
    const auto fp = failure_probability(MaxLinearModel(prune_zero_columns(a, 0.0), alpha), region);
    report["p_tilde"] = fp.p;
    report["nu_tilde"] = fp.nu;
  }
  if (data != nullptr) report["p_empirical"] = empirical_failure_probability(*data, region);

  if (!cfg.summary_csv.empty()) {
    std::ostringstream os;
    os << std::setprecision(17) << "statistic,value\n"
       << "count," << stats.count << "\nmin," << stats.min << "\nq1," << stats.q1 << "\nmedian,"
       << stats.median << "\nq3," << stats.q3 << "\nmax," << stats.max << "\nmean," << stats.mean
       << '\n';
    if (report.contains("p_tilde")) os << "p_tilde," << report["p_tilde"].get<double>() << '\n';
    if (report.contains("p_empirical")) {
      os << "p_empirical," << report["p_empirical"].get<double>() << '\n';
    }
    write_text_file(cfg.summary_csv, os.str());
    report["summary_csv"] = cfg.summary_csv;
  }
  if (ps.empty()) {
    return {kExitExhausted, std::move(report), "decomposition file holds no exact decomposition"};
  }
  return {kExitOk, std::move(report), {}};
}

CommandResult cmd_prob(const std::string& decompositions_path, const std::string& region_path,
                       const PipelineConfig& cfg) {
  return guarded([&] {
    const auto decompositions = load_json_file(decompositions_path);
    const auto region = load_json_file(region_path);
    if (cfg.data_csv.empty()) return prob_report(decompositions, region, cfg, nullptr);
    const auto table = read_csv(cfg.data_csv);
    return prob_report(decompositions, region, cfg, &table.data);
  });
}

// ---------------------------------------------------------------------------
// simulate

CommandResult cmd_simulate(const std::string& model_path, std::size_t n,
                           const PipelineConfig& cfg) {
  return guarded([&] {
    if (cfg.data_csv.empty()) throw InputError("simulate needs an output CSV (--data)");
    MaxLinearModel model = [&] {
      if (has_suffix(model_path, ".csv")) {
        if (cfg.alpha_mode != AlphaMode::Fixed) throw InputError("a CSV model needs --alpha");
        return MaxLinearModel(read_csv(model_path).data, cfg.alpha);
      }
      return json_model(load_json_file(model_path));
    }();
    const Matrix y = simulate(model, n, cfg.seed, cfg.exec());
    std::vector<std::string> names;
    for (Index j = 0; j < model.dim(); ++j) names.push_back("y" + std::to_string(j + 1));
    const auto text = format_csv(y, names);
    write_text_file(cfg.data_csv, text);
    Json report{{"command", "simulate"},
                {"model", model_json(model)},
                {"n", n},
                {"seed", cfg.seed},
                {"data_csv", cfg.data_csv},
                {"fnv1a64", hex64(fnv1a(text))},
                {"tpdm", matrix_json(tpdm_of_model(model).sigma())},
                {"marginal_scales", vector_json(marginal_scales(model))}};
    return CommandResult{kExitOk, std::move(report), {}};
  });
}

// ---------------------------------------------------------------------------
// reproduce-synthetic

namespace {

struct ReferenceCounts {
  std::size_t usable, exact, within_gap;
};

const ReferenceCounts kReference[] = {{94, 12, 58}, {86, 16, 72}, {88, 24, 76}};

Json d_values_json(const DecompositionResult& res) {
  Json out = Json::array();
  for (double v : res.d_values) out.push_back(number_json(v));
  return out;
}

}  // namespace

Json reproduce_synthetic_report(const PipelineConfig& cfg) {
  constexpr double kAlpha = 4.0;
  constexpr double kTarget = 0.1;
  const auto& opts = cfg.decomposition;
  Json report{{"command", "reproduce-synthetic"},
              {"alpha", kAlpha},
              {"nu_target", kTarget},
              {"gap_threshold", cfg.gap_threshold},
              {"tol_d", opts.tol_d},
              {"exact_tol", opts.exact_tol}};
  Json matrices = Json::array();
  const auto fixtures = synthetic_fixtures();
  for (std::size_t f = 0; f < fixtures.size(); ++f) {
    const auto& fx = fixtures[f];
    const Index d = fx.a.rows();
    const TailMatrix sigma(fx.a * fx.a.transpose(), kAlpha);
    const MaxLinearModel truth(entrywise_power(fx.a, 2.0 / kAlpha), kAlpha);
    const auto census = enumerate_all_paths(sigma, opts, cfg.gap_threshold, cfg.exec());

    const Vector ones = Vector::Ones(d);
    std::vector<std::pair<std::string, FailureRegion>> shapes = {
        {"f1_mean", FailureRegion::sum(ones / static_cast<double>(d), 1.0)},
        {"f2_product", FailureRegion::generic([](const Vector& y) { return y.prod(); }, 1.0,
                                              static_cast<double>(d), "product")},
        {"f3_min", FailureRegion::min(ones)},
        {"f4_max", FailureRegion::max(ones)},
    };
    Json regions = Json::object();
    for (auto& [name, shape] : shapes) {
      const double t = calibrate_threshold(truth, shape, kTarget);
      shape = shape.at_scale(t);
      std::vector<double> exact_nu, gap_nu;
      for (const auto& res : census.results) {
        if (res.degenerate || res.frobenius_gap > cfg.gap_threshold) continue;
        const double nu = exponent_measure(to_model(res), shape);
        gap_nu.push_back(nu);
        if (res.exact) exact_nu.push_back(nu);
      }
      regions[name] = Json{{"threshold", t},
                           {"nu_true", exponent_measure(truth, shape)},
                           {"exact", to_json(summarize(exact_nu))},
                           {"within_gap", to_json(summarize(gap_nu))},
                           {"exact_values", exact_nu},
                           {"within_gap_values", gap_nu}};
    }

    Json partitions = Json::object();
    for (const auto& [cols, part] : census.by_columns) {
      partitions[std::to_string(cols)] = Json{
          {"usable", part.usable}, {"exact", part.exact}, {"within_gap", part.within_gap}};
    }
    std::size_t exact_equal_truth = 0;
    for (const auto& res : census.results) {
      if (!res.exact) continue;
      const Matrix pruned = prune_zero_columns(res.a_star);
      if (pruned.cols() != fx.a.cols()) continue;
      // Match columns of the pruned factor to columns of the fixture.
      std::vector<bool> used(static_cast<std::size_t>(fx.a.cols()), false);
      bool all = true;
      for (Index c = 0; c < pruned.cols() && all; ++c) {
        bool hit = false;
        for (Index k = 0; k < fx.a.cols() && !hit; ++k) {
          if (!used[static_cast<std::size_t>(k)] &&
              (pruned.col(c) - fx.a.col(k)).cwiseAbs().maxCoeff() <= 1e-9) {
            used[static_cast<std::size_t>(k)] = true;
            hit = true;
          }
        }
        all = hit;
      }
      if (all) ++exact_equal_truth;
    }

    const auto& ref = kReference[f];
    Json discrepancies = Json::array();
    if (census.usable != ref.usable) discrepancies.push_back("usable");
    if (census.exact != ref.exact) discrepancies.push_back("exact");
    if (census.within_gap != ref.within_gap) discrepancies.push_back("within_gap");

    Json audit = Json::array();
    for (const auto& res : census.results) {
      const bool borderline = res.degenerate || res.boundary_steps > 0 ||
                              (res.frobenius_gap > opts.exact_tol && res.frobenius_gap <= 1e-6);
      if (!borderline) continue;
      audit.push_back(Json{{"path", one_based(res.path)},
                           {"frobenius_gap", res.frobenius_gap},
                           {"D_values", d_values_json(res)},
                           {"degenerate", res.degenerate},
                           {"boundary_steps", res.boundary_steps},
                           {"exact", res.exact}});
    }

    matrices.push_back(Json{{"name", fx.name},
                            {"d", d},
                            {"q", fx.a.cols()},
                            {"paths", census.total},
                            {"usable", census.usable},
                            {"exact", census.exact},
                            {"within_gap", census.within_gap},
                            {"by_columns", std::move(partitions)},
                            {"exact_equal_to_fixture", exact_equal_truth},
                            {"reference", Json{{"usable", ref.usable},
                                               {"exact", ref.exact},
                                               {"within_gap", ref.within_gap}}},
                            {"discrepancies", std::move(discrepancies)},
                            {"regions", std::move(regions)},
                            {"audit", std::move(audit)}});
  }
  report["matrices"] = std::move(matrices);
  return report;
}

CommandResult cmd_reproduce_synthetic(const PipelineConfig& cfg) {
  return guarded([&] { return CommandResult{kExitOk, reproduce_synthetic_report(cfg), {}}; });
}

}  // namespace exdep
