// choreeq: solve / verify / generate / bench front end for the chore
// division equilibrium library. Result JSON goes to stdout (or --out);
// logs go to stderr, controlled by CHOREEQ_LOG.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "choreeq/equilibrium.hpp"
#include "choreeq/errors.hpp"
#include "choreeq/extensions.hpp"
#include "choreeq/generate.hpp"
#include "choreeq/instance.hpp"
#include "choreeq/jsonio.hpp"
#include "choreeq/logging.hpp"
#include "choreeq/solver.hpp"

namespace {

using namespace choreeq;
namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitSolver = 3;
constexpr int kExitVerify = 4;

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty() || out_path == "-") {
    std::cout << content;
    std::cout.flush();
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw ParseError("cannot open output file: " + out_path);
  out << content;
  if (!out) throw ParseError("failed writing output file: " + out_path);
}

// Shortest round-trip decimal representation (used for CSV cells).
std::string shortest(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

int classify_error(const Error& e) {
  if (dynamic_cast<const ParseError*>(&e) != nullptr ||
      dynamic_cast<const ValidationError*>(&e) != nullptr ||
      dynamic_cast<const DimensionMismatch*>(&e) != nullptr ||
      dynamic_cast<const NegativeInput*>(&e) != nullptr ||
      dynamic_cast<const NonpositiveEntry*>(&e) != nullptr) {
    return kExitInput;
  }
  return kExitSolver;
}

Vec parse_weights_file(const std::string& path, int n) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("invalid weights JSON: " + std::string(e.what()));
  }
  if (!doc.is_array()) throw ParseError("weights file must hold a JSON array");
  if (static_cast<int>(doc.size()) != n) {
    throw DimensionMismatch("weights length must equal the agent count");
  }
  Vec w(n);
  for (int i = 0; i < n; ++i) {
    if (!doc[i].is_number()) throw ParseError("weights must be numbers");
    w[i] = doc[i].get<double>();
  }
  return w;
}

Instance load_instance(const std::string& path, const std::string& mode_override) {
  std::string text = read_text_file(path);
  if (!mode_override.empty()) {
    // Mode must be fixed before validation and preprocessing, so patch the
    // document rather than the parsed instance.
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("invalid JSON: " + std::string(e.what()));
    }
    if (!doc.is_object()) throw ParseError("instance must be a JSON object");
    doc["mode"] = mode_override;
    text = doc.dump();
  }
  return parse_instance(text);
}

std::string verify_json(const VerifyReport& rep, double epsilon) {
  ordered_json doc;
  doc["pass"] = rep.pass;
  doc["epsilon"] = epsilon;
  doc["cond_income"] = rep.cond_income;
  doc["cond_bundle"] = rep.cond_bundle;
  doc["cond_feasible"] = rep.cond_feasible;
  ordered_json res;
  res["income_ratio_worst"] = rep.residuals.income_ratio_worst;
  res["optimal_bundle_worst"] = rep.residuals.optimal_bundle_worst;
  res["feasibility_worst"] = rep.residuals.feasibility_worst;
  doc["residuals"] = res;
  doc["earnings"] = std::vector<double>(rep.earnings.data(), rep.earnings.data() + rep.earnings.size());
  return doc.dump(2) + "\n";
}

struct SolveConfig {
  std::string instance_path;
  std::string mode_override;
  std::string weights_path;
  std::string trace_path;
  std::string out_path = "-";
  double eps = 0.05;
  double eps1 = 0.0;
  double eps2 = 0.0;
  double eps3 = 0.0;
  long max_iters = 100000;
  unsigned long seed = 0;
  bool verify_only = false;
};

// Verification level for a finished solve: the certificate's own epsilon
// with a small floor so exactly-symmetric instances (gamma == 1) are not
// failed on QP-tolerance noise.
double self_verify_eps(double cert_eps) { return std::max(cert_eps, 1e-7); }

int run_solve(const SolveConfig& cfg) {
  if (!(cfg.eps > 0.0 && cfg.eps < 1.0)) {
    throw ValidationError("--eps must lie in (0, 1)");
  }
  Instance inst = load_instance(cfg.instance_path, cfg.mode_override);

  SolverParams sp;
  sp.epsilon = cfg.eps;
  sp.eps1 = cfg.eps1;
  sp.eps2 = cfg.eps2;
  sp.eps3 = cfg.eps3;
  sp.max_iters = cfg.max_iters;

  std::optional<Vec> eta;
  if (!cfg.weights_path.empty()) {
    eta = parse_weights_file(cfg.weights_path, inst.n);
  } else if (inst.weights) {
    eta = inst.weights;
  }

  std::string payload;
  bool pass = true;

  try {
    if (inst.mode == Mode::kMixedManna) {
      if (eta) throw ValidationError("weights are not supported in mixed mode");
      MixedSolution sol = solve_mixed(inst, cfg.eps, &sp);
      std::optional<VerifyReport> ver;
      double ver_eps = 0.0;
      if (sol.category == MixedCategory::kNegative) {
        ver_eps = self_verify_eps(sol.eq->epsilon);
        ver = verify_ceei(inst, sol.x, sol.p, ver_eps);
        pass = ver->pass;
      }
      if (!cfg.trace_path.empty()) {
        emit(cfg.trace_path, trace_to_csv(sol.kkt ? sol.kkt->trace : std::vector<TraceRow>{}));
      }
      if (cfg.verify_only) {
        if (ver) {
          payload = verify_json(*ver, ver_eps);
        } else {
          ordered_json doc;
          doc["pass"] = true;
          doc["category"] = sol.category == MixedCategory::kPositive ? "positive" : "null";
          payload = doc.dump(2) + "\n";
        }
      } else {
        payload = mixed_result_json(sol, ver ? &*ver : nullptr, cfg.trace_path);
      }
    } else {
      EquilibriumCertificate eq;
      KktCertificate cert;
      if (eta) {
        eq = solve_weighted(inst, *eta, cfg.eps, &sp, &cert);
      } else if (inst.all_linear()) {
        cert = solve_kkt_linear(inst, sp);
        eq = from_kkt_linear(inst, cert);
      } else {
        ProfileMap pm = make_profile_map(inst);
        cert = solve_kkt_general(pm, sp);
        eq = from_kkt_general(pm, cert);
      }
      double ver_eps = self_verify_eps(eq.epsilon);
      VerifyReport ver = verify_ceei(inst, eq.x, eq.p, ver_eps, eq.weights);
      pass = ver.pass;
      if (!cfg.trace_path.empty()) emit(cfg.trace_path, trace_to_csv(cert.trace));
      if (cfg.verify_only) {
        payload = verify_json(ver, ver_eps);
      } else {
        EquilibriumCertificate out = eq;
        out.x = reinsert_allocation(inst, eq.x);
        out.p = reinsert_prices(inst, eq.p);
        payload = result_json(out, &cert, &ver, "", cfg.trace_path);
      }
    }
  } catch (const IterationCapExceeded& e) {
    if (!cfg.trace_path.empty()) emit(cfg.trace_path, e.partial_trace);
    log::error(e.what());
    return kExitSolver;
  }

  emit(cfg.out_path, payload);
  return pass ? kExitOk : kExitVerify;
}

struct VerifyConfig {
  std::string instance_path;
  std::string result_path;
  std::string weights_path;
  std::string out_path = "-";
  double eps = 0.0;
  bool eps_given = false;
};

int run_verify(const VerifyConfig& cfg) {
  Instance reduced = load_instance(cfg.instance_path, "");
  Instance inst = restore_original(reduced);

  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(cfg.result_path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("invalid result JSON: " + std::string(e.what()));
  }
  if (!doc.is_object() || !doc.contains("allocation") || !doc.contains("prices")) {
    throw ParseError("result JSON requires fields allocation and prices");
  }

  double eps = cfg.eps;
  if (!cfg.eps_given) {
    if (!doc.contains("epsilon") || !doc["epsilon"].is_number()) {
      throw ParseError("result JSON has no epsilon; pass --eps");
    }
    eps = doc["epsilon"].get<double>();
  }

  const auto& xa = doc["allocation"];
  if (!xa.is_array() || static_cast<int>(xa.size()) != inst.n) {
    throw DimensionMismatch("allocation must have one row per agent");
  }
  Mat x(inst.n, inst.m);
  for (int i = 0; i < inst.n; ++i) {
    if (!xa[i].is_array() || static_cast<int>(xa[i].size()) != inst.m) {
      throw DimensionMismatch("allocation row length must equal the chore count");
    }
    for (int j = 0; j < inst.m; ++j) x(i, j) = xa[i][j].get<double>();
  }
  const auto& pa = doc["prices"];
  if (!pa.is_array() || static_cast<int>(pa.size()) != inst.m) {
    throw DimensionMismatch("prices length must equal the chore count");
  }
  Vec p(inst.m);
  for (int j = 0; j < inst.m; ++j) p[j] = pa[j].get<double>();

  std::optional<Vec> eta;
  if (!cfg.weights_path.empty()) {
    eta = parse_weights_file(cfg.weights_path, inst.n);
    eta = Vec(*eta / eta->maxCoeff());
  } else if (doc.contains("weights") && doc["weights"].is_array()) {
    Vec w(inst.n);
    for (int i = 0; i < inst.n; ++i) w[i] = doc["weights"][i].get<double>();
    eta = w;
  }

  VerifyReport rep = verify_ceei(inst, x, p, eps, eta);
  emit(cfg.out_path, verify_json(rep, eps));
  return rep.pass ? kExitOk : kExitVerify;
}

struct GenerateConfig {
  std::string out_path = "-";
  std::string kind = "linear";
  int n = 2;
  int m = 2;
  double lo = 1.0;
  double hi = 10.0;
  double rho = 0.0;
  bool rho_given = false;
  unsigned long seed = 0;
};

int run_generate(const GenerateConfig& cfg) {
  GenOptions opts;
  opts.n = cfg.n;
  opts.m = cfg.m;
  opts.kind = parse_gen_kind(cfg.kind);
  opts.coeff_lo = cfg.lo;
  opts.coeff_hi = cfg.hi;
  opts.seed = cfg.seed;
  if (cfg.rho_given) opts.rho = cfg.rho;
  Instance inst = generate_instance(opts);
  emit(cfg.out_path, serialize_instance(inst) + "\n");
  return kExitOk;
}

struct BenchConfig {
  std::string suite_dir;
  std::string out_path = "-";
  std::vector<double> eps_list{0.1, 0.01};
  long max_iters = 1000000;
};

int run_bench(const BenchConfig& cfg) {
  if (!fs::is_directory(cfg.suite_dir)) {
    throw ParseError("suite is not a directory: " + cfg.suite_dir);
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(cfg.suite_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());

  std::ostringstream csv;
  csv << "instance,n,m,eps,iters,bound,wall_ms,pass\n";
  bool bound_violation = false;
  bool verify_failure = false;

  for (const auto& file : files) {
    Instance inst = parse_instance(read_text_file(file.string()));
    if (inst.mode != Mode::kChoresOnly) {
      throw ValidationError("bench supports chores instances: " + file.string());
    }
    for (double eps : cfg.eps_list) {
      SolverParams sp;
      sp.epsilon = eps;
      sp.max_iters = cfg.max_iters;

      auto t0 = std::chrono::steady_clock::now();
      KktCertificate cert;
      EquilibriumCertificate eq;
      if (inst.all_linear()) {
        cert = solve_kkt_linear(inst, sp);
        eq = from_kkt_linear(inst, cert);
      } else {
        ProfileMap pm = make_profile_map(inst);
        cert = solve_kkt_general(pm, sp);
        eq = from_kkt_general(pm, cert);
      }
      auto t1 = std::chrono::steady_clock::now();
      long wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();

      std::string bound_cell;
      bool within_bound = true;
      if (inst.all_linear()) {
        Mat D = inst.linear_matrix();
        long bound =
            iteration_bound_linear(inst.n, inst.m, eps, D.minCoeff(), D.maxCoeff());
        bound_cell = std::to_string(bound);
        within_bound = cert.iterations <= bound;
        if (!within_bound) bound_violation = true;
      }
      VerifyReport ver = verify_ceei(inst, eq.x, eq.p, self_verify_eps(eq.epsilon));
      if (!ver.pass) verify_failure = true;
      bool pass = ver.pass && within_bound;

      csv << file.filename().string() << ',' << inst.n << ',' << inst.m << ','
          << shortest(eps) << ',' << cert.iterations << ',' << bound_cell << ','
          << wall_ms << ',' << (pass ? "true" : "false") << '\n';
    }
  }

  emit(cfg.out_path, csv.str());
  if (bound_violation) return kExitSolver;
  if (verify_failure) return kExitVerify;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Competitive equilibrium solver for divisible chore division"};
  app.require_subcommand(1);

  SolveConfig sc;
  CLI::App* solve = app.add_subcommand("solve", "Solve an instance and self-verify the result");
  solve->add_option("instance", sc.instance_path, "Instance JSON file")->required();
  solve->add_option("--eps", sc.eps, "Target epsilon in (0, 1)");
  solve->add_option("--eps1", sc.eps1, "Nearest-point tolerance override (general path)");
  solve->add_option("--eps2", sc.eps2, "Early-stop distance override (general path)");
  solve->add_option("--eps3", sc.eps3, "Log-distance stop override (general path)");
  solve->add_option("--max-iters", sc.max_iters, "Outer iteration cap");
  solve->add_option("--seed", sc.seed, "Accepted for config uniformity; solves are deterministic");
  solve->add_option("--trace", sc.trace_path, "Write the iteration trace CSV here");
  solve->add_option("--weights", sc.weights_path, "JSON array of per-agent income weights");
  solve->add_option("--mode", sc.mode_override, "Override the instance mode")
      ->check(CLI::IsMember({"chores", "mixed"}));
  solve->add_option("--out", sc.out_path, "Result path, - for stdout");
  solve->add_flag("--verify-only", sc.verify_only,
                  "Print only the verification verdict for the solved instance");

  VerifyConfig vc;
  CLI::App* verify = app.add_subcommand("verify", "Check a result file against an instance");
  verify->add_option("instance", vc.instance_path, "Instance JSON file")->required();
  verify->add_option("result", vc.result_path, "Result JSON with allocation and prices")->required();
  CLI::Option* veps = verify->add_option("--eps", vc.eps, "Epsilon to verify at (default: result's)");
  verify->add_option("--weights", vc.weights_path, "JSON array of per-agent income weights");
  verify->add_option("--out", vc.out_path, "Report path, - for stdout");

  GenerateConfig gc;
  CLI::App* gen = app.add_subcommand("generate", "Emit a seeded random instance");
  gen->add_option("--n", gc.n, "Agents");
  gen->add_option("--m", gc.m, "Chores");
  gen->add_option("--kind", gc.kind, "linear | ces | mixed");
  gen->add_option("--lo", gc.lo, "Coefficient range lower end");
  gen->add_option("--hi", gc.hi, "Coefficient range upper end");
  CLI::Option* grho = gen->add_option("--rho", gc.rho, "Fix the CES exponent");
  gen->add_option("--seed", gc.seed, "RNG seed");
  gen->add_option("--out", gc.out_path, "Instance path, - for stdout");

  BenchConfig bc;
  CLI::App* bench = app.add_subcommand("bench", "Run a suite directory, report iterations vs bound");
  bench->add_option("suite", bc.suite_dir, "Directory of chores instance JSON files")->required();
  bench->add_option("--eps", bc.eps_list, "Epsilon values to run")->delimiter(',');
  bench->add_option("--max-iters", bc.max_iters, "Outer iteration cap");
  bench->add_option("--out", bc.out_path, "CSV path, - for stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (solve->parsed()) return run_solve(sc);
    if (verify->parsed()) {
      vc.eps_given = veps->count() > 0;
      return run_verify(vc);
    }
    if (gen->parsed()) {
      gc.rho_given = grho->count() > 0;
      return run_generate(gc);
    }
    if (bench->parsed()) return run_bench(bc);
  } catch (const IterationCapExceeded& e) {
    log::error(e.what());
    return kExitSolver;
  } catch (const Error& e) {
    log::error(e.what());
    return classify_error(e);
  } catch (const std::exception& e) {
    log::error(e.what());
    return kExitSolver;
  }
  return kExitInput;
}
