// bergman-lab: command-line front end for the weighted Bergman projection library.

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bergman/analysis.hpp"
#include "bergman/io.hpp"
#include "bergman/kernel.hpp"
#include "bergman/projection.hpp"
#include "bergman/weights.hpp"

namespace {

using namespace bergman;

enum Exit : int { kOk = 0, kError = 1, kInconclusive = 2 };

struct RunConfig {
  std::string command;
  std::string weight_path;
  std::string symbol_path;
  int n = 2;
  double tolerance = 1e-7;
  int grid_k_max = 12;
  long d_max = 1L << 21;
  std::string output_path;
  std::string format = "json";
  std::uint64_t seed = 0;
  unsigned threads = 1;
  int trials = 100;

  void validate() const {
    if (!(tolerance > 0.0)) throw std::invalid_argument("--tol must be > 0");
    if (n < 1) throw std::invalid_argument("--n must be >= 1");
    if (grid_k_max < 1 || grid_k_max > 24) throw std::invalid_argument("--kmax must lie in 1..24");
    if (d_max < 1) throw std::invalid_argument("--dmax must be >= 1");
    if (trials < 1) throw std::invalid_argument("--trials must be >= 1");
  }
};

/// Rows of JSON cells; emitted either as a JSON table report or as CSV.
struct Table {
  std::vector<std::string> columns;
  std::vector<Json> rows;
  Json summary = Json::object();
  std::vector<std::string> errors;

  void add(std::initializer_list<Json> cells) {
    Json row = Json::array();
    for (const auto& c : cells) row.push_back(c);
    rows.push_back(std::move(row));
  }
};

std::string csv_cell(const Json& v) {
  if (v.is_null()) return "";
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return format_number(v.get<double>());
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

void write_output(const RunConfig& cfg, const std::string& content) {
  if (cfg.output_path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream out(cfg.output_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + cfg.output_path);
  out << content;
  if (!out) throw std::runtime_error("write failed for " + cfg.output_path);
}

Json header(const RunConfig& cfg, const char* report) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["report"] = report;
  j["command"] = cfg.command;
  return j;
}

void emit_table(const RunConfig& cfg, const Table& t, Json meta) {
  if (cfg.format == "csv") {
    std::ostringstream s;
    CsvWriter csv(s, t.columns);
    for (const auto& row : t.rows) {
      std::vector<std::string> cells;
      for (const auto& c : row) cells.push_back(csv_cell(c));
      csv.row(cells);
    }
    write_output(cfg, s.str());
    return;
  }
  Json j = header(cfg, "table");
  for (auto& [k, v] : meta.items()) j[k] = v;
  j["columns"] = t.columns;
  j["rows"] = t.rows;
  j["summary"] = t.summary;
  j["errors"] = t.errors;
  write_output(cfg, dump(j));
}

struct Workspace {
  RadialWeight weight;
  std::shared_ptr<const MomentTable> table;
  KernelCoeffs coeffs;
  Workspace(RadialWeight w, int n, long d_max)
      : weight(std::move(w)), table(std::make_shared<const MomentTable>(weight)), coeffs(table, n, d_max) {}
};

RadialWeight require_weight(const RunConfig& cfg) {
  if (cfg.weight_path.empty()) throw std::invalid_argument(cfg.command + " needs --weight");
  return load_weight(cfg.weight_path);
}

std::vector<double> boundary_grid(int k_max, bool with_origin) {
  std::vector<double> r;
  if (with_origin) r.push_back(0.0);
  for (int k = 1; k <= k_max; ++k) r.push_back(1.0 - std::exp2(-k));
  return r;
}

Json value_or_null(const std::optional<double>& v) { return v ? json_number(*v) : Json(nullptr); }

// ---------------------------------------------------------------------------

int run_diagnose(const RunConfig& cfg) {
  const RadialWeight w = require_weight(cfg);
  const MomentTable table(w);
  const auto radii = dyadic_radii(cfg.grid_k_max);
  std::vector<double> xs;
  for (int e = 1; e <= 14; ++e) xs.push_back(std::exp2(e));
  std::vector<double> betas;
  for (int i = 1; i <= 32; ++i) betas.push_back(0.25 * i);

  std::vector<DiagnosticsReport> reports;
  reports.push_back(is_dhat_tail(w, radii));
  reports.push_back(is_dhat_moments(table, 1024));
  reports.push_back(moment_tail_window(table, xs));
  reports.push_back(is_regular(w, radii));
  const BetaEstimate beta = dhat_beta_estimate(w, radii, betas);

  if (cfg.format == "csv") {
    std::ostringstream s;
    CsvWriter csv(s, {"criterion_id", "verdict", "parameter", "ratio", "flagged"});
    for (const auto& r : reports) {
      for (const auto& e : r.evidence) {
        csv.row({r.criterion_id, to_string(r.verdict), format_number(e.parameter), format_number(e.ratio),
                 e.flagged ? "true" : "false"});
      }
    }
    write_output(cfg, s.str());
  } else {
    Json j = header(cfg, "diagnose");
    j["weight_label"] = w.label();
    Json arr = Json::array();
    for (const auto& r : reports) arr.push_back(to_json(r));
    j["reports"] = std::move(arr);
    Json b;
    b["admissible"] = beta.admissible;
    b["beta0"] = json_number(beta.beta0);
    b["constant"] = json_number(beta.constant);
    j["beta_estimate"] = std::move(b);
    write_output(cfg, dump(j));
  }
  return reports.front().verdict == Verdict::inconclusive ? kInconclusive : kOk;
}

int run_kernel(const RunConfig& cfg) {
  Workspace ws(require_weight(cfg), cfg.n, cfg.d_max);
  Table t;
  t.columns = {"z", "w", "kernel_re", "kernel_im", "kernel_degree", "rk_re", "rk_im", "rk_degree"};
  const auto grid = boundary_grid(cfg.grid_k_max, true);
  for (double zr : grid) {
    for (double wr : grid) {
      const BallPoint z = BallPoint::along_e1(cfg.n, zr);
      const BallPoint w = BallPoint::along_e1(cfg.n, wr);
      try {
        const SeriesValue k = eval_kernel(ws.coeffs, z, w, cfg.tolerance);
        const SeriesValue rk = eval_RK(ws.coeffs, z, w, cfg.tolerance);
        t.add({json_number(zr), json_number(wr), json_number(k.value.real()), json_number(k.value.imag()), k.degree,
               json_number(rk.value.real()), json_number(rk.value.imag()), rk.degree});
      } catch (const std::exception& e) {
        t.errors.push_back("z=" + format_number(zr) + " w=" + format_number(wr) + ": " + e.what());
        t.add({json_number(zr), json_number(wr), nullptr, nullptr, nullptr, nullptr, nullptr, nullptr});
      }
    }
  }
  t.summary["c0"] = json_number(ws.coeffs.coeff(0));
  emit_table(cfg, t, {{"weight_label", ws.weight.label()}, {"n", cfg.n}});
  return t.errors.empty() ? kOk : kError;
}

int run_project(const RunConfig& cfg) {
  Workspace ws(require_weight(cfg), cfg.n, cfg.d_max);
  if (cfg.symbol_path.empty()) throw std::invalid_argument("project needs --symbol");
  const BoundedSymbol phi = load_symbol(cfg.symbol_path, cfg.n);
  QuadSpec q;
  q.tolerance = cfg.tolerance;
  Table t;
  t.columns = {"r", "projection_re", "projection_im", "bloch_density"};
  double sup = 0.0;
  for (double r : boundary_grid(cfg.grid_k_max, true)) {
    const BallPoint z = BallPoint::along_e1(cfg.n, r);
    std::optional<Complex> p;
    std::optional<double> density;
    try {
      p = project(ws.coeffs, ws.weight, phi, z, q);
      density = (1.0 - r * r) * std::abs(project_radial_derivative(ws.coeffs, ws.weight, phi, z, q));
      sup = std::max(sup, *density);
    } catch (const std::exception& e) {
      t.errors.push_back("r=" + format_number(r) + ": " + e.what());
    }
    t.add({json_number(r), p ? json_number(p->real()) : Json(nullptr), p ? json_number(p->imag()) : Json(nullptr),
           value_or_null(density)});
  }
  t.summary["symbol"] = phi.kind_name();
  t.summary["sup_norm_bound"] = json_number(phi.sup_norm_bound());
  t.summary["bloch_lower_bound"] = json_number(sup);
  emit_table(cfg, t, {{"weight_label", ws.weight.label()}, {"n", cfg.n}});
  return t.errors.empty() ? kOk : kError;
}

int run_theorem(const RunConfig& cfg) {
  const RadialWeight w = require_weight(cfg);
  TheoremConfig tc;
  tc.k_max = std::max(cfg.grid_k_max, 4);
  tc.degree_cap = cfg.d_max;
  tc.tolerance = cfg.tolerance;
  tc.threads = cfg.threads;
  const TheoremReport rep = theorem_check(w, cfg.n, tc);
  if (cfg.format == "csv") {
    std::ostringstream s;
    CsvWriter csv(s, {"profile", "parameter", "value"});
    auto put = [&](const char* name, const std::vector<ProfilePoint>& profile) {
      for (const auto& p : profile) csv.row({name, format_number(p.parameter), format_number(p.value)});
    };
    put("functional", rep.functional_profile);
    put("majorant", rep.majorant_profile);
    put("lower_bound", rep.lower_profile);
    put("cesaro", rep.cesaro_profile);
    write_output(cfg, s.str());
  } else {
    Json j = to_json(rep);
    validate_report(j);
    write_output(cfg, dump(j));
  }
  for (const auto& f : rep.failures) std::cerr << "warning: " << f << '\n';
  return rep.conclusion == Conclusion::inconclusive ? kInconclusive : kOk;
}

int run_hl_check(const RunConfig& cfg) {
  constexpr int kTerms = 20;
  constexpr double kSuiteConstant = 2.0;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> g;
  Table t;
  t.columns = {"trial", "p1_coefficient_sum", "p1_norm", "p1_pass", "q4_norm", "q4_coefficient_sum", "q4_pass",
               "parseval_gap"};
  bool all_pass = true;
  double worst_parseval = 0.0;
  for (int trial = 0; trial < cfg.trials; ++trial) {
    std::vector<Complex> c(kTerms);
    for (auto& v : c) v = {g(rng), g(rng)};
    const auto low = hardy_littlewood_check(c, 1.0);
    const auto high = hardy_littlewood_converse(c, 4.0);
    const auto two = hardy_littlewood_converse(c, 2.0);
    const bool p1 = low.coefficient_sum <= kSuiteConstant * low.norm_power;
    const bool q4 = high.norm_power <= kSuiteConstant * high.coefficient_sum;
    const double gap = std::abs(two.norm_power - two.coefficient_sum) / two.coefficient_sum;
    all_pass = all_pass && p1 && q4;
    worst_parseval = std::max(worst_parseval, gap);
    t.add({trial, json_number(low.coefficient_sum), json_number(low.norm_power), p1, json_number(high.norm_power),
           json_number(high.coefficient_sum), q4, json_number(gap)});
  }
  t.summary["suite_constant"] = kSuiteConstant;
  t.summary["all_pass"] = all_pass;
  t.summary["worst_parseval_gap"] = json_number(worst_parseval);
  emit_table(cfg, t, {{"seed", cfg.seed}, {"terms", kTerms}});
  return kOk;
}

int run_pr_check(const RunConfig& cfg) {
  Workspace ws(require_weight(cfg), cfg.n, cfg.d_max);
  QuadSpec q;
  q.tolerance = cfg.tolerance;
  Table t;
  t.columns = {"s", "lhs", "rhs", "ratio"};
  double lo = INFINITY, hi = 0.0;
  for (double s : {0.5, 0.7, 0.9, 0.99}) {
    try {
      const RatioCheck c = pr_estimate_check(ws.coeffs, s, q, cfg.d_max);
      lo = std::min(lo, c.ratio);
      hi = std::max(hi, c.ratio);
      t.add({json_number(s), json_number(c.lhs), json_number(c.rhs), json_number(c.ratio)});
    } catch (const std::exception& e) {
      t.errors.push_back("s=" + format_number(s) + ": " + e.what());
      t.add({json_number(s), nullptr, nullptr, nullptr});
    }
  }
  t.summary["ratio_min"] = json_number(lo);
  t.summary["ratio_max"] = json_number(hi);
  t.summary["spread"] = json_number(hi / lo);
  emit_table(cfg, t, {{"weight_label", ws.weight.label()}, {"n", cfg.n}});
  return t.errors.empty() ? kOk : kError;
}

int dispatch(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.command == "diagnose") return run_diagnose(cfg);
  if (cfg.command == "kernel") return run_kernel(cfg);
  if (cfg.command == "project") return run_project(cfg);
  if (cfg.command == "theorem") return run_theorem(cfg);
  if (cfg.command == "hl-check") return run_hl_check(cfg);
  if (cfg.command == "pr-check") return run_pr_check(cfg);
  throw std::invalid_argument("unknown command " + cfg.command);
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  CLI::App app{"Weighted Bergman projection lab: kernels, projections and the boundedness diagnostics."};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all help");

  const std::vector<std::pair<const char*, const char*>> commands{
      {"diagnose", "class diagnostics of a weight (tail, moments, regularity)"},
      {"kernel", "kernel and radial-derivative values on a radial point grid"},
      {"project", "projection of a symbol and its Bloch-density profile"},
      {"theorem", "full boundedness report"},
      {"hl-check", "Hardy-Littlewood coefficient inequalities on random polynomials"},
      {"pr-check", "disk-kernel integral against the tail-integral estimate"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--weight", cfg.weight_path, "weight descriptor file");
    sub->add_option("--n", cfg.n, "complex dimension")->capture_default_str();
    sub->add_option("--tol", cfg.tolerance, "tolerance")->capture_default_str();
    sub->add_option("--kmax", cfg.grid_k_max, "radial grid 1 - 2^-k, k <= kmax")->capture_default_str();
    sub->add_option("--dmax", cfg.d_max, "kernel degree cap")->capture_default_str();
    sub->add_option("--out", cfg.output_path, "output file (default stdout)");
    sub->add_option("--format", cfg.format, "json or csv")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
    sub->add_option("--seed", cfg.seed, "seed for randomized trials")->capture_default_str();
    sub->add_option("--threads", cfg.threads, "worker cap (0 = all cores)")->capture_default_str();
    if (std::string(name) == "project") sub->add_option("--symbol", cfg.symbol_path, "symbol descriptor file");
    if (std::string(name) == "hl-check") sub->add_option("--trials", cfg.trials, "number of polynomials")->capture_default_str();
    sub->callback([&cfg, sub] { cfg.command = sub->get_name(); });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kError;
  }

  try {
    return dispatch(cfg);
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return kError;
}
