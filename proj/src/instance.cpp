#include "choreeq/instance.hpp"

#include <cmath>
#include <json.hpp>

#include "choreeq/errors.hpp"

namespace choreeq {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

DisutilitySpec DisutilitySpec::linear(Vec c) {
  DisutilitySpec s;
  s.kind = Kind::kLinear;
  s.coeffs = std::move(c);
  return s;
}

DisutilitySpec DisutilitySpec::ces(Vec c, double rho) {
  DisutilitySpec s;
  s.kind = Kind::kCes;
  s.coeffs = std::move(c);
  s.rho = rho;
  return s;
}

bool Instance::all_linear() const {
  for (const auto& d : disutilities) {
    if (!d.is_linear()) return false;
  }
  return true;
}

Mat Instance::linear_matrix() const {
  if (!all_linear()) throw ValidationError("linear_matrix requires all-linear disutilities");
  Mat D(n, m);
  for (int i = 0; i < n; ++i) D.row(i) = disutilities[i].coeffs.transpose();
  return D;
}

namespace {

void check_finite(const Vec& c, const std::string& where) {
  for (int j = 0; j < c.size(); ++j) {
    if (!std::isfinite(c[j])) {
      throw InfiniteDisutilityError("non-finite disutility coefficient in " + where);
    }
  }
}

void validate_core(const Instance& inst) {
  if (inst.n < 1) throw ValidationError("n must be >= 1");
  if (inst.m < 0) throw ValidationError("m must be >= 0");
  if (static_cast<int>(inst.disutilities.size()) != inst.n) {
    throw DimensionMismatch("disutilities array length must equal n");
  }
  for (int i = 0; i < inst.n; ++i) {
    const auto& d = inst.disutilities[i];
    if (d.coeffs.size() != inst.m) {
      throw DimensionMismatch("coefficient vector for agent " + std::to_string(i) +
                              " has wrong length");
    }
    check_finite(d.coeffs, "agent " + std::to_string(i));
    if (d.is_linear()) {
      if (inst.mode == Mode::kChoresOnly) {
        for (int j = 0; j < inst.m; ++j) {
          if (d.coeffs[j] < 0.0) {
            throw ValidationError("negative linear coefficient in chores mode");
          }
        }
      }
    } else {
      if (inst.mode == Mode::kMixedManna) {
        throw ValidationError("mixed mode supports linear disutilities only");
      }
      if (!std::isfinite(d.rho) || d.rho < 1.0) {
        throw ValidationError("CES rho must be finite and >= 1");
      }
      for (int j = 0; j < inst.m; ++j) {
        if (d.coeffs[j] <= 0.0) {
          throw ValidationError("CES coefficients must be strictly positive");
        }
      }
    }
  }
  if (inst.weights) {
    if (inst.weights->size() != inst.n) throw DimensionMismatch("weights length must equal n");
    for (int i = 0; i < inst.n; ++i) {
      double w = (*inst.weights)[i];
      if (!std::isfinite(w) || w <= 0.0) {
        throw ValidationError("weights must be finite and strictly positive");
      }
    }
  }
}

// Strips chores that some agent can absorb at zero disutility. Applies only
// to all-linear chores instances; CES coefficients are strictly positive and
// mixed-mode zeros are meaningful (indifference), so both pass through.
Instance strip_zero_chores(Instance inst) {
  if (inst.mode != Mode::kChoresOnly || !inst.all_linear()) return inst;

  std::vector<int> keep;
  for (int j = 0; j < inst.m; ++j) {
    int zero_agent = -1;
    for (int i = 0; i < inst.n; ++i) {
      if (inst.disutilities[i].coeffs[j] == 0.0) {
        zero_agent = i;
        break;
      }
    }
    if (zero_agent >= 0) {
      Vec col(inst.n);
      for (int i = 0; i < inst.n; ++i) col[i] = inst.disutilities[i].coeffs[j];
      inst.removed.push_back(RemovedChore{j, zero_agent, std::move(col)});
    } else {
      keep.push_back(j);
    }
  }
  if (static_cast<int>(keep.size()) == inst.m) return inst;

  for (auto& d : inst.disutilities) {
    Vec c(keep.size());
    for (size_t k = 0; k < keep.size(); ++k) c[k] = d.coeffs[keep[k]];
    d.coeffs = std::move(c);
  }
  inst.m = static_cast<int>(keep.size());
  return inst;
}

Vec parse_number_array(const json& arr, const std::string& where) {
  if (!arr.is_array()) throw ParseError(where + " must be an array");
  Vec v(arr.size());
  for (size_t k = 0; k < arr.size(); ++k) {
    if (!arr[k].is_number()) throw ParseError(where + " must contain numbers");
    v[k] = arr[k].get<double>();
  }
  return v;
}

}  // namespace

Instance validate_and_preprocess(Instance inst) {
  if (inst.removed.empty()) inst.original_m = inst.m;
  validate_core(inst);
  return strip_zero_chores(std::move(inst));
}

Instance parse_instance(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("instance must be a JSON object");

  Instance inst;
  try {
    if (!doc.contains("n") || !doc.contains("m") || !doc.contains("disutilities")) {
      throw ParseError("instance requires fields n, m, disutilities");
    }
    if (!doc["n"].is_number_integer() || !doc["m"].is_number_integer()) {
      throw ParseError("n and m must be integers");
    }
    inst.n = doc["n"].get<int>();
    inst.m = doc["m"].get<int>();
    if (doc.contains("mode")) {
      std::string mode = doc["mode"].get<std::string>();
      if (mode == "chores") {
        inst.mode = Mode::kChoresOnly;
      } else if (mode == "mixed") {
        inst.mode = Mode::kMixedManna;
      } else {
        throw ParseError("mode must be \"chores\" or \"mixed\"");
      }
    }
    const json& ds = doc["disutilities"];
    if (!ds.is_array()) throw ParseError("disutilities must be an array");
    for (const auto& entry : ds) {
      if (!entry.is_object()) throw ParseError("disutility entries must be objects");
      if (entry.contains("linear")) {
        inst.disutilities.push_back(
            DisutilitySpec::linear(parse_number_array(entry["linear"], "linear coefficients")));
      } else if (entry.contains("ces")) {
        const json& c = entry["ces"];
        if (!c.is_object() || !c.contains("c") || !c.contains("rho")) {
          throw ParseError("ces entry requires fields c and rho");
        }
        if (!c["rho"].is_number()) throw ParseError("rho must be a number");
        inst.disutilities.push_back(
            DisutilitySpec::ces(parse_number_array(c["c"], "ces coefficients"),
                                c["rho"].get<double>()));
      } else {
        throw ParseError("disutility entry must have \"linear\" or \"ces\"");
      }
    }
    if (doc.contains("weights")) {
      inst.weights = parse_number_array(doc["weights"], "weights");
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("schema error: ") + e.what());
  }
  return validate_and_preprocess(std::move(inst));
}

std::string serialize_instance(const Instance& inst) {
  ordered_json doc;
  doc["n"] = inst.n;
  doc["m"] = inst.m;
  doc["mode"] = inst.mode == Mode::kChoresOnly ? "chores" : "mixed";
  ordered_json ds = ordered_json::array();
  for (const auto& d : inst.disutilities) {
    ordered_json e;
    if (d.is_linear()) {
      e["linear"] = std::vector<double>(d.coeffs.data(), d.coeffs.data() + d.coeffs.size());
    } else {
      e["ces"] = {{"c", std::vector<double>(d.coeffs.data(), d.coeffs.data() + d.coeffs.size())},
                  {"rho", d.rho}};
    }
    ds.push_back(e);
  }
  doc["disutilities"] = ds;
  if (inst.weights) {
    doc["weights"] =
        std::vector<double>(inst.weights->data(), inst.weights->data() + inst.weights->size());
  }
  return doc.dump(2);
}

AllocationReport validate_allocation(const Instance& inst, const Allocation& x, double tol) {
  if (x.rows() != inst.n || x.cols() != inst.m) {
    throw DimensionMismatch("allocation shape does not match instance");
  }
  AllocationReport rep;
  bool nonneg = (x.array() >= -tol).all();
  double worst = 0.0;
  double worst_deficit = 0.0;
  for (int j = 0; j < inst.m; ++j) {
    double s = x.col(j).sum();
    worst = std::max(worst, std::abs(s - 1.0));
    worst_deficit = std::max(worst_deficit, 1.0 - s);
  }
  rep.max_column_residual = worst;
  rep.feasible_exact = nonneg && worst <= tol;
  rep.feasible_relaxed = nonneg && worst_deficit <= tol;
  return rep;
}

Allocation reinsert_allocation(const Instance& inst, const Allocation& x_core) {
  if (inst.removed.empty()) return x_core;
  if (x_core.cols() != inst.m) throw DimensionMismatch("core allocation has wrong column count");
  Allocation full = Mat::Zero(inst.n, inst.original_m);
  std::vector<bool> is_removed(inst.original_m, false);
  for (const auto& r : inst.removed) {
    is_removed[r.j] = true;
    full(r.agent, r.j) = 1.0;
  }
  int k = 0;
  for (int j = 0; j < inst.original_m; ++j) {
    if (is_removed[j]) continue;
    full.col(j) = x_core.col(k++);
  }
  return full;
}

Instance restore_original(const Instance& inst) {
  if (inst.removed.empty()) return inst;
  Instance full = inst;
  full.m = inst.original_m;
  full.removed.clear();
  std::vector<bool> is_removed(inst.original_m, false);
  for (const auto& r : inst.removed) is_removed[r.j] = true;
  for (int i = 0; i < inst.n; ++i) {
    Vec c(inst.original_m);
    int k = 0;
    for (int j = 0; j < inst.original_m; ++j) {
      c[j] = is_removed[j] ? 0.0 : inst.disutilities[i].coeffs[k++];
    }
    for (const auto& r : inst.removed) c[r.j] = r.coeffs[i];
    full.disutilities[i].coeffs = std::move(c);
  }
  return full;
}

Vec reinsert_prices(const Instance& inst, const Vec& p_core) {
  if (inst.removed.empty()) return p_core;
  if (p_core.size() != inst.m) throw DimensionMismatch("core price vector has wrong length");
  Vec full = Vec::Zero(inst.original_m);
  std::vector<bool> is_removed(inst.original_m, false);
  for (const auto& r : inst.removed) is_removed[r.j] = true;
  int k = 0;
  for (int j = 0; j < inst.original_m; ++j) {
    if (!is_removed[j]) full[j] = p_core[k++];
  }
  return full;
}

}  // namespace choreeq
