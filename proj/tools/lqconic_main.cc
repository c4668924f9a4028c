// lqconic: command-line front end for the LQ analyzers.
//
// Exit codes: 0 ok, 1 input error, 2 infimum is −∞, 3 not passive,
// 4 verification failed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "lqconic/analyzers.h"
#include "lqconic/error.h"
#include "lqconic/io.h"

namespace {

using namespace lqconic;
using nlohmann::json;

enum Exit { kOk = 0, kInput = 1, kMinusInfinity = 2, kNotPassive = 3,
            kVerifyFailed = 4 };

struct Flags {
  std::string input;
  std::string result;
  std::string out;
  std::optional<int> steps;
  std::optional<double> tol;
  std::optional<double> T;
  std::optional<std::uint64_t> seed;
  int samples = 100;
  std::string csv_dir;
};

class Timer {
 public:
  double ms() const {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void emit(const Flags& f, const std::string& text) {
  if (f.out.empty()) {
    std::cout << text;
  } else {
    write_text(f.out, text);
  }
}

ProblemDocument load(const Flags& f) {
  ProblemDocument doc = read_problem(f.input);
  if (f.T) doc.T = *f.T;
  if (f.steps) doc.steps = *f.steps;
  if (doc.spec) doc.spec->grid = TimeGrid(doc.T, doc.steps.value_or(512));
  return doc;
}

AnalyzerOptions analyzer_options(const Flags& f, const ProblemDocument& doc) {
  AnalyzerOptions o;
  o.tol = f.tol.value_or(doc.options.tol.value_or(kDefaultTol));
  if (doc.options.escape_cap) o.riccati.escape_cap = *doc.options.escape_cap;
  return o;
}

const ProblemSpec& require_spec(const ProblemDocument& doc) {
  if (!doc.spec) {
    throw Error(ErrorCode::kValidation,
                "this command needs a document with a system section");
  }
  return *doc.spec;
}

std::string describe(double v) { return format_double(v); }

int cmd_solve(const std::string& command, const Flags& f) {
  const ProblemDocument doc = load(f);
  const ProblemSpec& spec = require_spec(doc);
  const AnalyzerOptions opts = analyzer_options(f, doc);
  Timer timer;
  Certificate cert = command == "lqr"    ? solve_lqr(spec, opts)
                     : command == "slqr" ? solve_stoch_lqr(spec, opts)
                                         : iqc_infimum(spec, opts);
  emit(f, serialize_result({command, doc.hash, cert, std::nullopt}));
  if (cert.minus_infinity) {
    std::cerr << command << ": infimum is -inf, escape at t = "
              << describe(*cert.escape_time) << " (" << timer.ms() << " ms)\n";
    return kMinusInfinity;
  }
  std::cerr << command << ": value = " << describe(cert.optimal_value)
            << ", gap = " << describe(cert.duality_gap) << " (" << timer.ms()
            << " ms)\n";
  return kOk;
}

int cmd_hinf(const Flags& f) {
  const ProblemDocument doc = load(f);
  const ProblemSpec& spec = require_spec(doc);
  AnalyzerOptions opts = analyzer_options(f, doc);
  const double tol = f.tol.value_or(kDefaultTol);
  Timer timer;
  const NormResult r = hinf_norm_bisection(spec.sys, spec.grid, tol, opts);
  emit(f, serialize_result({"hinf", doc.hash, std::nullopt, r}));
  std::cerr << "hinf: gamma* = " << describe(r.gamma_star) << " in ["
            << describe(r.lo) << ", " << describe(r.hi) << "] ("
            << timer.ms() << " ms)\n";
  return kOk;
}

int cmd_passivity(const Flags& f) {
  const ProblemDocument doc = load(f);
  const ProblemSpec& spec = require_spec(doc);
  Timer timer;
  const TestResult r =
      passivity_test(spec.sys, spec.grid, analyzer_options(f, doc));
  emit(f, serialize_result({"passivity", doc.hash, r.certificate, std::nullopt}));
  std::cerr << "passivity: " << (r.passed ? "passive" : "not passive");
  if (r.certificate.escape_time) {
    std::cerr << ", escape at t = " << describe(*r.certificate.escape_time);
  }
  std::cerr << " (" << timer.ms() << " ms)\n";
  return r.passed ? kOk : kNotPassive;
}

json escape_json(const DreSolution& s) {
  return {{"escaped", s.escaped},
          {"escape_time", s.escape_time ? json(*s.escape_time) : json(nullptr)}};
}

int cmd_dri_cloud(const Flags& f) {
  const ProblemDocument doc = load(f);
  const TimeGrid grid(doc.T, doc.steps.value_or(512));
  const AnalyzerOptions opts = analyzer_options(f, doc);

  std::optional<RiccatiModel> model;
  SymMat lambda_f;
  if (doc.riccati) {
    model = RiccatiModel::Standard(doc.riccati->A, doc.riccati->M, doc.riccati->Q);
    lambda_f = doc.riccati->lambda_f;
  } else {
    const ProblemSpec& spec = require_spec(doc);
    validate(spec, opts.tol);
    model = RiccatiModel(spec.sys, assemble_quadform(spec, opts.tol));
    lambda_f = SymMat::Zero(spec.sys.n());
  }

  DriCloudOptions copt;
  copt.samples = f.samples;
  copt.seed = f.seed.value_or(doc.options.seed.value_or(0));
  copt.riccati = opts.riccati;
  if (copt.samples < 0) throw Error(ErrorCode::kValidation, "--samples < 0");

  Timer timer;
  const DriCloudReport rep = dri_cloud(*model, lambda_f, grid, copt);

  json files = json::array();
  if (!f.csv_dir.empty()) {
    std::filesystem::create_directories(f.csv_dir);
    const std::filesystem::path dir(f.csv_dir);
    write_trajectory_csv(dir / "dre.csv", rep.extremal.lambda);
    files.push_back("dre.csv");
    for (std::size_t i = 0; i < rep.samples.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "sample_%03zu.csv", i);
      write_trajectory_csv(dir / name, rep.samples[i].solution.lambda);
      files.push_back(name);
    }
  }

  json samples = json::array();
  for (std::size_t i = 0; i < rep.samples.size(); ++i) {
    json s = escape_json(rep.samples[i].solution);
    s["seed"] = rep.seeds[i];
    s["excess"] = rep.excess[i];
    samples.push_back(std::move(s));
  }
  json summary = {{"schema_version", kSchemaVersion},
                  {"tool", {{"name", "lqconic"}, {"version", kToolVersion}}},
                  {"command", "dri-cloud"},
                  {"problem_hash", doc.hash},
                  {"grid", {{"T", grid.horizon()}, {"steps", grid.steps()}}},
                  {"seed", copt.seed},
                  {"switch_points", copt.switch_points},
                  {"tolerance", copt.tol},
                  {"maximal", rep.maximal},
                  {"worst_excess", rep.worst_excess},
                  {"escaped_samples", rep.escaped_samples},
                  {"dre", escape_json(rep.extremal)},
                  {"samples", std::move(samples)},
                  {"files", std::move(files)}};
  emit(f, summary.dump(2) + "\n");
  std::cerr << "dri-cloud: " << rep.samples.size() << " samples, maximal = "
            << (rep.maximal ? "true" : "false") << " (" << timer.ms()
            << " ms)\n";
  return kOk;
}

int cmd_verify(const Flags& f) {
  ProblemDocument doc = load(f);
  const ResultDocument res = parse_result(read_text(f.result));
  if (res.problem_hash != doc.hash) {
    std::cerr << "verify: problem hash " << doc.hash
              << " does not match the result's " << res.problem_hash << "\n";
    return kInput;
  }
  ProblemSpec spec = require_spec(doc);
  const AnalyzerOptions opts = analyzer_options(f, doc);

  VerificationReport rep;
  if (res.norm) {
    auto add = [&](const char* name, double gamma, bool expect) {
      const bool got = bounded_real_test(spec.sys, gamma, spec.grid, opts).passed;
      rep.checks.push_back({name, gamma, expect ? 1.0 : 0.0, got == expect});
    };
    if (res.norm->hi > 0.0) {
      add("passes_at_hi", res.norm->hi, true);
      add("fails_at_lo", res.norm->lo, false);
    }
    rep.passed = std::all_of(rep.checks.begin(), rep.checks.end(),
                             [](const Check& c) { return c.passed; });
  } else if (res.certificate) {
    spec.grid = res.certificate->grid;
    rep = verify_solution(spec, *res.certificate, opts);
  } else {
    throw Error(ErrorCode::kParse, "result has neither certificate nor norm");
  }

  json checks = json::array();
  for (const Check& c : rep.checks) {
    checks.push_back({{"name", c.name},
                      {"value", std::isfinite(c.value) ? json(c.value) : json(nullptr)},
                      {"threshold", c.threshold},
                      {"passed", c.passed}});
  }
  const json report = {{"command", "verify"},
                       {"problem_hash", doc.hash},
                       {"passed", rep.passed},
                       {"checks", std::move(checks)}};
  std::cout << report.dump(2) << "\n";
  if (!f.out.empty()) write_text(f.out, report.dump(2) + "\n");
  return rep.passed ? kOk : kVerifyFailed;
}

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("input", f.input, "problem document (JSON)")->required();
  sub->add_option("--out", f.out, "output path (default: stdout)");
  sub->add_option("--steps", f.steps, "grid steps (default 512)");
  sub->add_option("--tol", f.tol, "tolerance (default 1e-9)");
  sub->add_option("--T", f.T, "horizon override");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-horizon LQ analysis by covariance and conic duality"};
  app.require_subcommand(1);
  Flags f;

  for (const char* name : {"lqr", "slqr", "iqc"}) {
    add_common(app.add_subcommand(name, std::string("solve a ") + name +
                                            " problem"),
               f);
  }
  add_common(app.add_subcommand("hinf", "finite-horizon induced L2 norm"), f);
  add_common(app.add_subcommand("passivity", "finite-horizon passivity test"), f);
  CLI::App* cloud = app.add_subcommand("dri-cloud", "DRI solution cloud vs DRE");
  add_common(cloud, f);
  cloud->add_option("--samples", f.samples, "number of DRI samples");
  cloud->add_option("--seed", f.seed, "random seed");
  cloud->add_option("--csv-dir", f.csv_dir, "write one CSV per trajectory here");
  CLI::App* verify = app.add_subcommand("verify", "check a result document");
  add_common(verify, f);
  verify->add_option("result", f.result, "result document (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInput;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    if (cmd == "lqr" || cmd == "slqr" || cmd == "iqc") return cmd_solve(cmd, f);
    if (cmd == "hinf") return cmd_hinf(f);
    if (cmd == "passivity") return cmd_passivity(f);
    if (cmd == "dri-cloud") return cmd_dri_cloud(f);
    if (cmd == "verify") return cmd_verify(f);
  } catch (const ValidationError& e) {
    for (const Violation& v : e.violations()) {
      std::cerr << to_string(v.code) << ": " << v.field << ": " << v.message
                << "\n";
    }
    return kInput;
  } catch (const Error& e) {
    std::cerr << to_string(e.code()) << ": " << e.what() << "\n";
    return kInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInput;
  }
  return kInput;
}
