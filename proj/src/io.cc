#include "lqconic/io.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "lqconic/error.h"

namespace lqconic {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void field_error(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::kParse, "field '" + path + "': " + what);
}

double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) field_error(path, "expected a number");
  return j.get<double>();
}

const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) field_error(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) field_error(path + "." + key, "missing");
  return *it;
}

const json* optional_field(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

Eigen::MatrixXd parse_dense(const json& j, const std::string& path) {
  if (j.is_number()) return Eigen::MatrixXd::Constant(1, 1, j.get<double>());
  if (!j.is_array()) field_error(path, "expected a number or an array");
  if (j.empty()) return Eigen::MatrixXd(0, 0);
  if (j.front().is_number()) {
    // A flat array is a column.
    Eigen::MatrixXd v(static_cast<Eigen::Index>(j.size()), 1);
    for (std::size_t i = 0; i < j.size(); ++i) {
      v(static_cast<Eigen::Index>(i), 0) =
          get_number(j[i], path + "[" + std::to_string(i) + "]");
    }
    return v;
  }
  const std::size_t rows = j.size();
  if (!j.front().is_array()) field_error(path, "expected rows of numbers");
  const std::size_t cols = j.front().size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows),
                    static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const std::string rp = path + "[" + std::to_string(r) + "]";
    if (!j[r].is_array() || j[r].size() != cols) {
      field_error(rp, "expected a row of " + std::to_string(cols) + " numbers");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          get_number(j[r][c], rp + "[" + std::to_string(c) + "]");
    }
  }
  return m;
}

MatrixFunction parse_function(const json& j, const std::string& path,
                              double T) {
  if (j.is_object()) {
    const json& s = require(j, "samples", path);
    if (!s.is_array() || s.size() < 2) {
      field_error(path + ".samples", "expected at least two samples");
    }
    std::vector<Eigen::MatrixXd> samples;
    for (std::size_t k = 0; k < s.size(); ++k) {
      samples.push_back(
          parse_dense(s[k], path + ".samples[" + std::to_string(k) + "]"));
      if (samples.back().rows() != samples.front().rows() ||
          samples.back().cols() != samples.front().cols()) {
        field_error(path + ".samples[" + std::to_string(k) + "]",
                    "sample shapes differ");
      }
    }
    return MatrixFunction::Sampled(T, std::move(samples));
  }
  return MatrixFunction(parse_dense(j, path));
}

Eigen::VectorXd parse_vector(const json& j, const std::string& path) {
  const Eigen::MatrixXd m = parse_dense(j, path);
  if (m.cols() != 1 && m.size() != 0) field_error(path, "expected a vector");
  return m.size() == 0 ? Eigen::VectorXd() : Eigen::VectorXd(m.col(0));
}

SymMat parse_sym(const json& j, const std::string& path) {
  const Eigen::MatrixXd m = parse_dense(j, path);
  if (m.rows() != m.cols() || m.size() == 0) {
    field_error(path, "expected a nonempty square matrix");
  }
  if (max_abs(Eigen::MatrixXd(m - m.transpose())) >
      1e-12 * std::max(1.0, max_abs(m))) {
    field_error(path, "matrix is not symmetric");
  }
  return SymMat(m);
}

CostData parse_cost(const json& v, int n, int m) {
  CostData c;
  c.Q = parse_dense(require(v, "Q", "variant"), "variant.Q");
  c.R = parse_dense(require(v, "R", "variant"), "variant.R");
  if (const json* N = optional_field(v, "N")) {
    c.N = parse_dense(*N, "variant.N");
  } else {
    c.N = Eigen::MatrixXd::Zero(n, m);
  }
  return c;
}

// Integers and floats with equal value hash alike.
json canonical(const json& j) {
  if (j.is_number()) return json(j.get<double>());
  if (j.is_array()) {
    json out = json::array();
    for (const auto& e : j) out.push_back(canonical(e));
    return out;
  }
  if (j.is_object()) {
    json out = json::object();
    for (auto it = j.begin(); it != j.end(); ++it) {
      out[it.key()] = canonical(it.value());
    }
    return out;
  }
  return j;
}

json number_or_null(double v) {
  return std::isfinite(v) ? json(v) : json(nullptr);
}

double number_or_nan(const json& obj, const char* key, const std::string& path) {
  const json& j = require(obj, key, path);
  if (j.is_null()) return kNaN;
  return get_number(j, path + "." + key);
}

json dense_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json certificate_json(const Certificate& c) {
  json j;
  j["variant"] = c.variant;
  j["grid"] = {{"T", c.grid.horizon()}, {"steps", c.grid.steps()}};
  j["minus_infinity"] = c.minus_infinity;
  j["escape_time"] = c.escape_time ? json(*c.escape_time) : json(nullptr);
  j["optimal_value"] = number_or_null(c.optimal_value);
  j["primal_value"] = number_or_null(c.primal_value);
  j["duality_gap"] = number_or_null(c.duality_gap);
  j["alignment"] = number_or_null(c.alignment);
  j["dual_min_eig"] = number_or_null(c.dual_min_eig);
  j["rank_ok"] = c.rank_ok;
  if (c.verdict) j["verdict"] = *c.verdict;
  if (c.lambda_max_eig) j["lambda_max_eig"] = number_or_null(*c.lambda_max_eig);
  if (c.sign_ok) j["sign_ok"] = *c.sign_ok;
  if (c.gamma) j["gamma"] = *c.gamma;
  if (c.lambda) {
    const MatTrajectory& L = *c.lambda;
    json samples = json::array();
    for (int k = L.valid_begin(); k < L.valid_end(); ++k) {
      samples.push_back(dense_json(L[k].matrix()));
    }
    j["lambda"] = {{"dim", L.dim()},
                   {"valid_begin", L.valid_begin()},
                   {"valid_end", L.valid_end()},
                   {"samples", std::move(samples)}};
  }
  if (c.gain) {
    json K = json::array();
    for (const auto& k : c.gain->K) K.push_back(dense_json(k));
    j["gain"] = {{"K", std::move(K)}};
    if (!c.gain->Kdot.empty()) {
      json Kd = json::array();
      for (const auto& k : c.gain->Kdot) Kd.push_back(dense_json(k));
      j["gain"]["Kdot"] = std::move(Kd);
    }
  }
  return j;
}

int get_int(const json& obj, const char* key, const std::string& path) {
  const json& j = require(obj, key, path);
  if (!j.is_number_integer()) field_error(path + "." + key, "expected an integer");
  return j.get<int>();
}

bool get_bool(const json& obj, const char* key, const std::string& path) {
  const json& j = require(obj, key, path);
  if (!j.is_boolean()) field_error(path + "." + key, "expected a boolean");
  return j.get<bool>();
}

Certificate certificate_from_json(const json& j) {
  const std::string p = "certificate";
  Certificate c;
  const json& v = require(j, "variant", p);
  if (!v.is_string()) field_error(p + ".variant", "expected a string");
  c.variant = v.get<std::string>();
  const json& g = require(j, "grid", p);
  c.grid = TimeGrid(get_number(require(g, "T", p + ".grid"), p + ".grid.T"),
                    get_int(g, "steps", p + ".grid"));
  c.minus_infinity = get_bool(j, "minus_infinity", p);
  const double et = number_or_nan(j, "escape_time", p);
  if (!std::isnan(et)) c.escape_time = et;
  c.optimal_value = number_or_nan(j, "optimal_value", p);
  c.primal_value = number_or_nan(j, "primal_value", p);
  c.duality_gap = number_or_nan(j, "duality_gap", p);
  c.alignment = number_or_nan(j, "alignment", p);
  c.dual_min_eig = number_or_nan(j, "dual_min_eig", p);
  c.rank_ok = get_bool(j, "rank_ok", p);
  if (j.contains("verdict")) c.verdict = get_bool(j, "verdict", p);
  if (j.contains("lambda_max_eig")) {
    c.lambda_max_eig = number_or_nan(j, "lambda_max_eig", p);
  }
  if (j.contains("sign_ok")) c.sign_ok = get_bool(j, "sign_ok", p);
  if (j.contains("gamma")) c.gamma = get_number(j["gamma"], p + ".gamma");

  if (const json* L = optional_field(j, "lambda")) {
    const std::string lp = p + ".lambda";
    const int dim = get_int(*L, "dim", lp);
    const int b = get_int(*L, "valid_begin", lp);
    const int e = get_int(*L, "valid_end", lp);
    const json& s = require(*L, "samples", lp);
    if (dim < 1 || b < 0 || e > c.grid.size() || b > e || !s.is_array() ||
        static_cast<int>(s.size()) != e - b) {
      field_error(lp, "inconsistent range or sample count");
    }
    std::vector<SymMat> samples(static_cast<std::size_t>(c.grid.size()),
                                SymMat(Eigen::MatrixXd::Constant(dim, dim, kNaN)));
    for (int k = b; k < e; ++k) {
      const std::string sp = lp + ".samples[" + std::to_string(k - b) + "]";
      const Eigen::MatrixXd m = parse_dense(s[static_cast<std::size_t>(k - b)], sp);
      if (m.rows() != dim || m.cols() != dim) field_error(sp, "wrong shape");
      samples[static_cast<std::size_t>(k)] = SymMat(m);
    }
    MatTrajectory traj(c.grid, std::move(samples), "lambda");
    traj.set_valid_range(b, e);
    c.lambda = std::move(traj);
  }
  if (const json* G = optional_field(j, "gain")) {
    const std::string gp = p + ".gain";
    const json& K = require(*G, "K", gp);
    if (!K.is_array() || static_cast<int>(K.size()) != c.grid.size()) {
      field_error(gp + ".K", "expected one matrix per grid node");
    }
    Gain gain{c.grid, {}, {}};
    for (std::size_t k = 0; k < K.size(); ++k) {
      gain.K.push_back(parse_dense(K[k], gp + ".K[" + std::to_string(k) + "]"));
    }
    if (const json* Kd = optional_field(*G, "Kdot")) {
      if (!Kd->is_array() || Kd->size() != K.size()) {
        field_error(gp + ".Kdot", "expected one matrix per grid node");
      }
      for (std::size_t k = 0; k < Kd->size(); ++k) {
        gain.Kdot.push_back(
            parse_dense((*Kd)[k], gp + ".Kdot[" + std::to_string(k) + "]"));
      }
    }
    c.gain = std::move(gain);
  }
  return c;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ProblemDocument parse_problem(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse,
                "malformed JSON at byte " + std::to_string(e.byte) + ": " +
                    e.what());
  }
  if (!doc.is_object()) field_error("$", "expected an object");
  if (const json* sv = optional_field(doc, "schema_version")) {
    if (!sv->is_string() || sv->get<std::string>() != kSchemaVersion) {
      field_error("schema_version",
                  "unsupported, expected \"" + std::string(kSchemaVersion) + "\"");
    }
  }

  ProblemDocument out;
  const json& horizon = require(doc, "horizon", "$");
  out.T = get_number(require(horizon, "T", "horizon"), "horizon.T");
  if (horizon.contains("steps")) out.steps = get_int(horizon, "steps", "horizon");

  const json& v = require(doc, "variant", "$");
  const json& type = require(v, "type", "variant");
  if (!type.is_string()) field_error("variant.type", "expected a string");
  const std::string kind = type.get<std::string>();

  if (const json* o = optional_field(doc, "options")) {
    if (const json* t = optional_field(*o, "tol")) {
      out.options.tol = get_number(*t, "options.tol");
    }
    if (const json* c = optional_field(*o, "escape_cap")) {
      out.options.escape_cap = get_number(*c, "options.escape_cap");
    }
    if (const json* s = optional_field(*o, "seed")) {
      if (!s->is_number_unsigned()) {
        field_error("options.seed", "expected a nonnegative integer");
      }
      out.options.seed = s->get<std::uint64_t>();
    }
  }

  // The grid resolution is a solver setting; the horizon is problem data.
  json hashed = {{"variant", canonical(v)}, {"T", out.T}};

  if (kind == "riccati") {
    StandardRiccati r;
    r.A = parse_function(require(v, "A", "variant"), "variant.A", out.T);
    r.M = parse_function(require(v, "M", "variant"), "variant.M", out.T);
    r.Q = parse_function(require(v, "Q", "variant"), "variant.Q", out.T);
    const int n = static_cast<int>(r.A.rows());
    if (n < 1 || r.A.cols() != n || r.M.rows() != n || r.M.cols() != n ||
        r.Q.rows() != n || r.Q.cols() != n) {
      field_error("variant", "A, M, Q must be square of equal size");
    }
    r.lambda_f = SymMat::Zero(n);
    if (const json* lf = optional_field(v, "lambda_f")) {
      r.lambda_f = parse_sym(*lf, "variant.lambda_f");
      if (r.lambda_f.dim() != n) field_error("variant.lambda_f", "wrong size");
    }
    out.riccati = std::move(r);
  } else {
    const json& s = require(doc, "system", "$");
    hashed["system"] = canonical(s);
    StateSpace sys;
    sys.A = parse_function(require(s, "A", "system"), "system.A", out.T);
    sys.B = parse_function(require(s, "B", "system"), "system.B", out.T);
    if (const json* C = optional_field(s, "C")) {
      sys.C = parse_function(*C, "system.C", out.T);
    } else {
      sys.C = MatrixFunction(Eigen::MatrixXd(0, 0));
    }
    if (const json* D = optional_field(s, "D")) {
      sys.D = parse_function(*D, "system.D", out.T);
    } else {
      sys.D = MatrixFunction(Eigen::MatrixXd(0, 0));
    }
    const int n = sys.n();
    const int m = sys.m();

    ProblemVariant variant;
    if (kind == "lqr") {
      variant = LqrProblem{parse_cost(v, n, m),
                           parse_vector(require(v, "x0", "variant"), "variant.x0")};
    } else if (kind == "iqc") {
      variant = GeneralIqcProblem{
          parse_cost(v, n, m),
          parse_vector(require(v, "x0", "variant"), "variant.x0")};
    } else if (kind == "slqr") {
      StochLqrProblem p;
      p.cost = parse_cost(v, n, m);
      p.Xi = parse_sym(require(v, "Xi", "variant"), "variant.Xi");
      p.W = parse_function(require(v, "W", "variant"), "variant.W", out.T);
      variant = std::move(p);
    } else if (kind == "bounded_real") {
      variant = BoundedRealProblem{
          get_number(require(v, "gamma", "variant"), "variant.gamma")};
    } else if (kind == "positive_real") {
      variant = PositiveRealProblem{};
    } else {
      field_error("variant.type", "unknown variant '" + kind + "'");
    }
    out.spec = ProblemSpec{std::move(sys), TimeGrid(out.T, out.steps.value_or(512)),
                           std::move(variant)};
  }
  out.hash = fnv1a_hex(hashed.dump());
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

ProblemDocument read_problem(const std::filesystem::path& path) {
  return parse_problem(read_text(path));
}

std::string serialize_result(const ResultDocument& doc) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["tool"] = {{"name", "lqconic"}, {"version", kToolVersion}};
  j["command"] = doc.command;
  j["problem_hash"] = doc.problem_hash;
  if (doc.certificate) j["certificate"] = certificate_json(*doc.certificate);
  if (doc.norm) {
    j["norm"] = {{"gamma_star", doc.norm->gamma_star},
                 {"iterations", doc.norm->iterations},
                 {"lo", doc.norm->lo},
                 {"hi", doc.norm->hi}};
  }
  return j.dump(2) + "\n";
}

ResultDocument parse_result(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse,
                "malformed JSON at byte " + std::to_string(e.byte) + ": " +
                    e.what());
  }
  if (!j.is_object()) field_error("$", "expected an object");
  ResultDocument doc;
  const json& cmd = require(j, "command", "$");
  const json& hash = require(j, "problem_hash", "$");
  if (!cmd.is_string()) field_error("command", "expected a string");
  if (!hash.is_string()) field_error("problem_hash", "expected a string");
  doc.command = cmd.get<std::string>();
  doc.problem_hash = hash.get<std::string>();
  if (const json* c = optional_field(j, "certificate")) {
    doc.certificate = certificate_from_json(*c);
  }
  if (const json* n = optional_field(j, "norm")) {
    NormResult r;
    r.gamma_star = get_number(require(*n, "gamma_star", "norm"), "norm.gamma_star");
    r.iterations = get_int(*n, "iterations", "norm");
    r.lo = get_number(require(*n, "lo", "norm"), "norm.lo");
    r.hi = get_number(require(*n, "hi", "norm"), "norm.hi");
    doc.norm = r;
  }
  return doc;
}

void write_trajectory_csv(const std::filesystem::path& path,
                          const MatTrajectory& traj) {
  const int n = traj.dim();
  std::string out = "t";
  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < n; ++r) {
      out += ",L_" + std::to_string(r + 1) + "_" + std::to_string(c + 1);
    }
  }
  out += "\n";
  for (int k = 0; k < traj.size(); ++k) {
    out += format_double(traj.grid().node(k));
    for (int c = 0; c < n; ++c) {
      for (int r = 0; r < n; ++r) {
        out += ",";
        out += traj.valid(k) ? format_double(traj[k](r, c)) : "nan";
      }
    }
    out += "\n";
  }
  write_text(path, out);
}

MatTrajectory read_trajectory_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kParse, path.string() + ": empty file");
  }
  const long cols = std::count(line.begin(), line.end(), ',');
  const int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(cols))));
  if (n < 1 || static_cast<long>(n) * n != cols) {
    throw Error(ErrorCode::kParse, path.string() + ": header is not t + n² columns");
  }
  std::vector<double> times;
  std::vector<SymMat> samples;
  std::vector<bool> finite;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(row, cell, ',')) {
      char* end = nullptr;
      v.push_back(std::strtod(cell.c_str(), &end));
      if (end == cell.c_str() || *end != '\0') {
        throw Error(ErrorCode::kParse, path.string() + ":" +
                                           std::to_string(lineno) +
                                           ": bad number '" + cell + "'");
      }
    }
    if (static_cast<long>(v.size()) != cols + 1) {
      throw Error(ErrorCode::kParse, path.string() + ":" +
                                         std::to_string(lineno) +
                                         ": wrong column count");
    }
    times.push_back(v[0]);
    Eigen::MatrixXd m(n, n);
    for (int c = 0; c < n; ++c) {
      for (int r = 0; r < n; ++r) m(r, c) = v[static_cast<std::size_t>(1 + c * n + r)];
    }
    finite.push_back(m.allFinite());
    samples.push_back(SymMat(m));
  }
  if (times.size() < 2) {
    throw Error(ErrorCode::kParse, path.string() + ": need at least two rows");
  }
  MatTrajectory traj(TimeGrid(times.back(), static_cast<int>(times.size()) - 1),
                     std::move(samples), path.stem().string());
  int b = 0;
  while (b < static_cast<int>(finite.size()) && !finite[static_cast<std::size_t>(b)]) ++b;
  int e = b;
  while (e < static_cast<int>(finite.size()) && finite[static_cast<std::size_t>(e)]) ++e;
  traj.set_valid_range(b, e);
  return traj;
}

}  // namespace lqconic
