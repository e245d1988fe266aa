#include "choreeq/jsonio.hpp"

#include <json.hpp>

namespace choreeq {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json vec_json(const Vec& v) {
  ordered_json arr = ordered_json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

ordered_json mat_json(const Mat& x) {
  ordered_json rows = ordered_json::array();
  for (int i = 0; i < x.rows(); ++i) rows.push_back(vec_json(x.row(i).transpose()));
  return rows;
}

ordered_json residuals_json(const EqResiduals& r) {
  ordered_json out;
  out["income_ratio_worst"] = r.income_ratio_worst;
  out["optimal_bundle_worst"] = r.optimal_bundle_worst;
  out["feasibility_worst"] = r.feasibility_worst;
  return out;
}

ordered_json verify_json(const VerifyReport& rep) {
  ordered_json out;
  out["pass"] = rep.pass;
  out["cond_income"] = rep.cond_income;
  out["cond_bundle"] = rep.cond_bundle;
  out["cond_feasible"] = rep.cond_feasible;
  out["residuals"] = residuals_json(rep.residuals);
  out["earnings"] = vec_json(rep.earnings);
  return out;
}

ordered_json certificate_json(const KktCertificate& kkt) {
  ordered_json out;
  out["gamma"] = kkt.gamma;
  out["lambda"] = kkt.lambda;
  out["delta"] = kkt.delta;
  out["delta_analytic"] = kkt.delta_analytic;
  out["b"] = kkt.b;
  out["iterations"] = kkt.iterations;
  out["stop_reason"] = kkt.stop_reason;
  out["epsilon_run"] = kkt.epsilon_run;
  out["a"] = vec_json(kkt.a);
  out["d"] = vec_json(kkt.d);
  return out;
}

}  // namespace

std::string result_json(const EquilibriumCertificate& eq, const KktCertificate* kkt,
                        const VerifyReport* verify, const std::string& category,
                        const std::string& trace_file) {
  ordered_json out;
  if (!category.empty()) out["category"] = category;
  out["epsilon"] = eq.epsilon;
  out["mode"] = eq.mode == EqMode::kLinearStrong ? "linear_strong" : "general";
  out["allocation"] = mat_json(eq.x);
  out["prices"] = vec_json(eq.p);
  out["earnings"] = vec_json(eq.earnings);
  out["weights"] = vec_json(eq.weights);
  out["residuals"] = residuals_json(eq.residuals);
  if (kkt) out["certificate"] = certificate_json(*kkt);
  if (verify) out["verify"] = verify_json(*verify);
  if (!trace_file.empty()) out["trace_file"] = trace_file;
  return out.dump(2) + "\n";
}

std::string mixed_result_json(const MixedSolution& sol, const VerifyReport* verify,
                              const std::string& trace_file) {
  const char* cat = sol.category == MixedCategory::kPositive ? "positive"
                    : sol.category == MixedCategory::kNull   ? "null"
                                                             : "negative";
  if (sol.eq) {
    ordered_json out = ordered_json::parse(
        result_json(*sol.eq, sol.kkt ? &*sol.kkt : nullptr, verify, cat, trace_file));
    out["utilities"] = vec_json(sol.utilities);
    return out.dump(2) + "\n";
  }
  ordered_json out;
  out["category"] = cat;
  out["allocation"] = mat_json(sol.x);
  out["prices"] = vec_json(sol.p);
  out["utilities"] = vec_json(sol.utilities);
  if (!trace_file.empty()) out["trace_file"] = trace_file;
  return out.dump(2) + "\n";
}

}  // namespace choreeq
