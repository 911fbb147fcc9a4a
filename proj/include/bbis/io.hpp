#pragma once

#include "baselines.hpp"
#include "errors.hpp"
#include "harness.hpp"
#include "kernels.hpp"
#include "targets.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace bbis {

using json = nlohmann::json;

namespace detail {

inline std::vector<std::string> split(const std::string& text, char sep)
{
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(text);
  while (std::getline(in, field, sep)) {
    out.push_back(field);
  }
  if (!text.empty() && text.back() == sep) {
    out.emplace_back();
  }
  return out;
}

inline std::string trim(const std::string& s)
{
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) {
    return {};
  }
  return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

inline bool parse_number(const std::string& text, double& value)
{
  const std::string t = trim(text);
  if (t.empty()) {
    return false;
  }
  char* end = nullptr;
  value = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size();
}

inline std::ifstream open_input(const std::string& path)
{
  std::ifstream in(path);
  if (!in) {
    throw ArgumentError("cannot open '" + path + "'");
  }
  return in;
}

//! Numeric rows of a comma-separated file. A first line that does not parse
//! as numbers is treated as a header and returned in `header`.
inline std::vector<std::vector<double>> read_numeric_csv(std::istream& in,
                                                         std::vector<std::string>& header)
{
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) {
      continue;
    }
    const auto fields = split(line, ',');
    std::vector<double> row;
    bool numeric = true;
    for (const auto& f : fields) {
      double v = 0.0;
      if (!parse_number(f, v)) {
        numeric = false;
        break;
      }
      row.push_back(v);
    }
    if (!numeric) {
      if (rows.empty() && header.empty()) {
        for (const auto& f : fields) {
          header.push_back(trim(f));
        }
        continue;
      }
      throw ArgumentError("non-numeric field on line " + std::to_string(line_no));
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ArgumentError("ragged row on line " + std::to_string(line_no));
    }
    if (!header.empty() && row.size() != header.size()) {
      throw ArgumentError("row width does not match the header on line " + std::to_string(line_no));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Point sets and weights
// ---------------------------------------------------------------------------

inline PointSet read_points_csv(std::istream& in)
{
  std::vector<std::string> header;
  const auto rows = detail::read_numeric_csv(in, header);
  if (rows.empty()) {
    throw ArgumentError("point file has no rows");
  }
  PointSet points(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < rows[i].size(); ++k) {
      points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
  }
  return points;
}

inline PointSet read_points_csv(const std::string& path)
{
  auto in = detail::open_input(path);
  return read_points_csv(in);
}

inline void write_points_csv(std::ostream& out, const PointSet& points, bool header = true)
{
  if (header) {
    for (Eigen::Index k = 0; k < points.cols(); ++k) {
      out << (k ? "," : "") << 'x' << k;
    }
    out << '\n';
  }
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index k = 0; k < points.cols(); ++k) {
      out << (k ? "," : "") << format_double(points(i, k));
    }
    out << '\n';
  }
}

inline void write_weights_csv(std::ostream& out, const Eigen::VectorXd& w)
{
  out << "index,weight\n";
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    out << i << ',' << format_double(w[i]) << '\n';
  }
}

//! Reads `index,weight` (header optional); indices must be 0..n-1 in order.
inline Eigen::VectorXd read_weights_csv(std::istream& in)
{
  std::vector<std::string> header;
  const auto rows = detail::read_numeric_csv(in, header);
  if (rows.empty() || rows.front().size() != 2) {
    throw ArgumentError("weight file needs two columns: index, weight");
  }
  Eigen::VectorXd w(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i][0] != static_cast<double>(i)) {
      throw ArgumentError("weight indices must run 0..n-1 in order");
    }
    w[static_cast<Eigen::Index>(i)] = rows[i][1];
  }
  return w;
}

inline Eigen::VectorXd read_weights_csv(const std::string& path)
{
  auto in = detail::open_input(path);
  return read_weights_csv(in);
}

// ---------------------------------------------------------------------------
// Probit data sets: header f0..f{d-1},label
// ---------------------------------------------------------------------------

inline void write_probit_csv(std::ostream& out, const ProbitModel& model)
{
  for (int k = 0; k < model.dimension(); ++k) {
    out << 'f' << k << ',';
  }
  out << "label\n";
  for (int l = 0; l < model.size(); ++l) {
    for (int k = 0; k < model.dimension(); ++k) {
      out << format_double(model.features(l, k)) << ',';
    }
    out << model.labels[l] << '\n';
  }
}

inline ProbitModel read_probit_csv(std::istream& in, double prior_variance = 0.1)
{
  std::vector<std::string> header;
  const auto rows = detail::read_numeric_csv(in, header);
  if (header.empty()) {
    throw ArgumentError("probit data needs a header row");
  }
  if (rows.empty() || rows.front().size() < 2) {
    throw ArgumentError("probit data needs at least one feature column and a label column");
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(rows.front().size() - 1);
  ProbitModel model{ Eigen::MatrixXd(n, d), Eigen::VectorXi(n), prior_variance };
  for (Eigen::Index l = 0; l < n; ++l) {
    const auto& row = rows[static_cast<std::size_t>(l)];
    for (Eigen::Index k = 0; k < d; ++k) {
      model.features(l, k) = row[static_cast<std::size_t>(k)];
    }
    const double label = row.back();
    if (label != 0.0 && label != 1.0) {
      throw ArgumentError("probit labels must be 0 or 1 (row " + std::to_string(l) + ")");
    }
    model.labels[l] = static_cast<int>(label);
  }
  model.validate();
  return model;
}

inline ProbitModel read_probit_csv(const std::string& path, double prior_variance = 0.1)
{
  auto in = detail::open_input(path);
  return read_probit_csv(in, prior_variance);
}

// ---------------------------------------------------------------------------
// Gaussian mixtures as JSON: {"weights": [...], "means": [[...], ...], "variances": [...]}
// ---------------------------------------------------------------------------

inline json mixture_to_json(const GaussianMixture& model)
{
  json j;
  j["weights"] = std::vector<double>(model.weights.begin(), model.weights.end());
  j["variances"] = std::vector<double>(model.variances.begin(), model.variances.end());
  j["means"] = json::array();
  for (int c = 0; c < model.components(); ++c) {
    std::vector<double> mu(static_cast<std::size_t>(model.dimension()));
    for (int k = 0; k < model.dimension(); ++k) {
      mu[static_cast<std::size_t>(k)] = model.means(c, k);
    }
    j["means"].push_back(mu);
  }
  return j;
}

inline GaussianMixture mixture_from_json(const json& j)
{
  try {
    const auto w = j.at("weights").get<std::vector<double>>();
    const auto v = j.at("variances").get<std::vector<double>>();
    const auto mu = j.at("means").get<std::vector<std::vector<double>>>();
    if (mu.empty()) {
      throw ArgumentError("mixture needs at least one component");
    }
    GaussianMixture model;
    model.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    model.variances = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    model.means.resize(static_cast<Eigen::Index>(mu.size()), static_cast<Eigen::Index>(mu.front().size()));
    for (std::size_t c = 0; c < mu.size(); ++c) {
      if (mu[c].size() != mu.front().size()) {
        throw ArgumentError("mixture means have inconsistent dimensions");
      }
      for (std::size_t k = 0; k < mu[c].size(); ++k) {
        model.means(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k)) = mu[c][k];
      }
    }
    model.validate();
    return model;
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("malformed mixture: ") + e.what());
  }
}

inline GaussianMixture read_mixture_json(const std::string& path)
{
  auto in = detail::open_input(path);
  try {
    return mixture_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ArgumentError("cannot parse '" + path + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Target specs
// ---------------------------------------------------------------------------

namespace detail {

inline std::string resolve_path(const std::string& path, const std::filesystem::path& base)
{
  const std::filesystem::path p(path);
  return (p.is_absolute() || base.empty()) ? path : (base / p).string();
}

} // namespace detail

//! Parses "kind[:key=value,...]":
//!   gaussian:d=2
//!   gmm[:fixture=mixture20 | file=mix.json]
//!   gmm_interp:lambda=0.5[,file=mix.json]
//!   probit:data=data.csv[,prior_var=0.1]  or  probit:n_data=100,d=10,seed=1
inline TargetConfig parse_target_spec(const std::string& spec, const std::filesystem::path& base = {})
{
  TargetConfig tc;
  const auto colon = spec.find(':');
  tc.kind = spec.substr(0, colon);
  std::map<std::string, std::string> kv;
  if (colon != std::string::npos) {
    for (const auto& item : detail::split(spec.substr(colon + 1), ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) {
        throw ArgumentError("target spec option '" + item + "' is not key=value");
      }
      kv[detail::trim(item.substr(0, eq))] = detail::trim(item.substr(eq + 1));
    }
  }
  auto number = [&](const std::string& key) {
    double v = 0.0;
    if (!detail::parse_number(kv.at(key), v)) {
      throw ArgumentError("target spec option '" + key + "' is not a number");
    }
    return v;
  };
  std::set<std::string> allowed;
  if (tc.kind == "gaussian") {
    allowed = { "d" };
    if (kv.contains("d")) {
      tc.dimension = static_cast<int>(number("d"));
    }
  } else if (tc.kind == "gmm" || tc.kind == "gmm_interp") {
    allowed = { "fixture", "file", "lambda" };
    if (kv.contains("fixture") && kv.at("fixture") != "mixture20") {
      throw ArgumentError("unknown mixture fixture '" + kv.at("fixture") + "'");
    }
    if (kv.contains("file")) {
      tc.mixture = read_mixture_json(detail::resolve_path(kv.at("file"), base));
    }
    if (tc.kind == "gmm_interp") {
      if (!kv.contains("lambda")) {
        throw ArgumentError("gmm_interp needs lambda");
      }
      tc.lambda = number("lambda");
    } else if (kv.contains("lambda")) {
      throw ArgumentError("lambda applies only to gmm_interp");
    }
  } else if (tc.kind == "probit") {
    allowed = { "data", "prior_var", "n_data", "d", "seed" };
    if (kv.contains("prior_var")) {
      tc.prior_variance = number("prior_var");
    }
    if (kv.contains("data")) {
      tc.probit = read_probit_csv(detail::resolve_path(kv.at("data"), base), tc.prior_variance);
      tc.dimension = tc.probit->dimension();
    } else {
      tc.dimension = kv.contains("d") ? static_cast<int>(number("d")) : 10;
      tc.n_data = kv.contains("n_data") ? static_cast<int>(number("n_data")) : 100;
      tc.data_seed = kv.contains("seed") ? static_cast<std::uint64_t>(number("seed")) : 1;
    }
  } else {
    throw ArgumentError("unknown target kind '" + tc.kind + "'");
  }
  for (const auto& [key, value] : kv) {
    if (!allowed.contains(key)) {
      throw ArgumentError("unknown option '" + key + "' for target kind '" + tc.kind + "'");
    }
  }
  return tc;
}

// ---------------------------------------------------------------------------
// Experiment configs (JSON)
// ---------------------------------------------------------------------------

namespace detail {

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where)
{
  if (!j.is_object()) {
    throw ArgumentError(where + " must be an object");
  }
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) {
      throw ArgumentError("unknown key '" + key + "' in " + where);
    }
  }
}

template<typename T>
void read_opt(const json& j, const char* key, T& out)
{
  if (j.contains(key)) {
    out = j.at(key).get<T>();
  }
}

inline GaussianMixture mixture_field(const json& j, const std::filesystem::path& base)
{
  if (j.is_string()) {
    return read_mixture_json(resolve_path(j.get<std::string>(), base));
  }
  return mixture_from_json(j);
}

inline TargetConfig target_from_json(const json& j, const std::filesystem::path& base)
{
  if (j.is_string()) {
    return parse_target_spec(j.get<std::string>(), base);
  }
  check_keys(j,
             { "kind", "dimension", "mixture", "fixture", "lambda", "n_data", "data_seed",
               "prior_variance", "data", "truth_draws", "truth_burn_in", "truth_seed" },
             "target");
  TargetConfig tc;
  tc.kind = j.at("kind").get<std::string>();
  read_opt(j, "dimension", tc.dimension);
  read_opt(j, "lambda", tc.lambda);
  read_opt(j, "n_data", tc.n_data);
  read_opt(j, "data_seed", tc.data_seed);
  read_opt(j, "prior_variance", tc.prior_variance);
  read_opt(j, "truth_draws", tc.truth_draws);
  read_opt(j, "truth_burn_in", tc.truth_burn_in);
  read_opt(j, "truth_seed", tc.truth_seed);
  if (j.contains("fixture") && j.at("fixture").get<std::string>() != "mixture20") {
    throw ArgumentError("unknown mixture fixture");
  }
  if (j.contains("mixture")) {
    tc.mixture = mixture_field(j.at("mixture"), base);
  }
  if (j.contains("data")) {
    tc.probit = read_probit_csv(resolve_path(j.at("data").get<std::string>(), base), tc.prior_variance);
    tc.dimension = tc.probit->dimension();
  }
  return tc;
}

inline SchemeConfig scheme_from_json(const json& j)
{
  SchemeConfig s;
  if (j.is_string()) {
    s.kind = scheme_from_string(j.get<std::string>());
    return s;
  }
  check_keys(j, { "kind", "label", "lower_bound", "method", "max_iters", "tol", "lambda" }, "scheme");
  s.kind = scheme_from_string(j.at("kind").get<std::string>());
  read_opt(j, "label", s.label);
  read_opt(j, "lower_bound", s.lower_bound);
  read_opt(j, "max_iters", s.qp.max_iters);
  read_opt(j, "tol", s.qp.tol);
  read_opt(j, "lambda", s.cf_lambda);
  if (j.contains("method")) {
    const auto m = j.at("method").get<std::string>();
    if (m == "mirror_descent") {
      s.method = QpMethod::mirror_descent;
    } else if (m == "frank_wolfe") {
      s.method = QpMethod::frank_wolfe;
    } else if (m == "automatic") {
      s.method = QpMethod::automatic;
    } else {
      throw ArgumentError("unknown solver method '" + m + "'");
    }
  }
  return s;
}

} // namespace detail

//! Relative file paths inside the config resolve against `base`.
inline ExperimentConfig config_from_json(const json& j, const std::filesystem::path& base = {})
{
  try {
    detail::check_keys(j,
                       { "target", "sampler", "schemes", "n_grid", "trials", "test_functions", "seed",
                         "output", "record_wall_time", "compute_ksd", "description" },
                       "config");
    ExperimentConfig c;
    c.target = detail::target_from_json(j.at("target"), base);
    if (j.contains("sampler")) {
      const json& s = j.at("sampler");
      detail::check_keys(s, { "kind", "proposal", "steps", "step_size", "init_scale", "minibatch_size" },
                         "sampler");
      c.sampler.kind = s.at("kind").get<std::string>();
      detail::read_opt(s, "steps", c.sampler.steps);
      detail::read_opt(s, "step_size", c.sampler.step_size);
      detail::read_opt(s, "init_scale", c.sampler.init_scale);
      detail::read_opt(s, "minibatch_size", c.sampler.minibatch_size);
      if (s.contains("proposal")) {
        c.sampler.proposal = detail::mixture_field(s.at("proposal"), base);
      }
    }
    for (const auto& s : j.at("schemes")) {
      c.schemes.push_back(detail::scheme_from_json(s));
    }
    c.n_grid = j.at("n_grid").get<std::vector<int>>();
    detail::read_opt(j, "trials", c.trials);
    if (j.contains("test_functions")) {
      c.test_functions.clear();
      for (const auto& f : j.at("test_functions")) {
        c.test_functions.push_back(test_function_from_string(f.get<std::string>()));
      }
    }
    detail::read_opt(j, "seed", c.seed);
    detail::read_opt(j, "output", c.output);
    detail::read_opt(j, "record_wall_time", c.record_wall_time);
    detail::read_opt(j, "compute_ksd", c.compute_ksd);
    std::set<std::string> names;
    for (const auto& s : c.schemes) {
      if (!names.insert(s.name()).second) {
        throw ArgumentError("duplicate scheme label '" + s.name() + "'");
      }
    }
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("malformed config: ") + e.what());
  }
}

inline ExperimentConfig read_config(const std::string& path)
{
  auto in = detail::open_input(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ArgumentError("cannot parse '" + path + "': " + e.what());
  }
  return config_from_json(j, std::filesystem::path(path).parent_path());
}

//! Ground truth per record key, so squared errors can be recomputed.
inline void write_truth_csv(std::ostream& out, const std::vector<ExperimentRecord>& records)
{
  out << "n,trial,test_fn,truth\n";
  std::set<std::tuple<int, int, std::string>> seen;
  for (const auto& r : records) {
    if (seen.insert({ r.n, r.trial, r.test_fn }).second) {
      out << r.n << ',' << r.trial << ',' << r.test_fn << ',' << format_double(r.truth) << '\n';
    }
  }
}

} // namespace bbis
