#include "cflow/methods.hpp"

#include "cflow/error.hpp"
#include "cflow/metrics.hpp"

namespace cflow {

std::string method_name(Method m) {
  switch (m) {
    case Method::cf: return "cf";
    case Method::cf_ft: return "cf_ft";
    case Method::nll_flow: return "nll_flow";
    case Method::flow_ratio: return "flow_ratio";
    case Method::mse: return "mse";
    case Method::mse_ratio: return "mse_ratio";
  }
  return "?";
}

Method parse_method(std::string_view s) {
  for (Method m : {Method::cf, Method::cf_ft, Method::nll_flow, Method::flow_ratio, Method::mse, Method::mse_ratio}) {
    if (s == method_name(m)) return m;
  }
  throw ConfigError("unknown method '" + std::string(s) + "'");
}

std::vector<Method> parse_method_list(std::string_view s) {
  std::vector<Method> out;
  while (!s.empty()) {
    const auto comma = s.find(',');
    out.push_back(parse_method(s.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  if (out.empty()) throw ConfigError("empty method list");
  return out;
}

bool method_needs_contrastive(Method m) { return m != Method::nll_flow && m != Method::mse; }

std::vector<double> FittedMethod::score(const Matrix& x) const {
  switch (method) {
    case Method::cf:
    case Method::cf_ft:
    case Method::nll_flow: return outlier_score(*flow, x);
    case Method::flow_ratio: return ratio_score(*flow, *flow_contr, x);
    case Method::mse: return mse_score(*mse, x);
    case Method::mse_ratio: return mse_ratio_score(*mse, x);
  }
  throw ConfigError("unhandled method");
}

FittedMethod fit_method(Method m, const Matrix& inliers, const Matrix& contrastive, const MethodConfig& cfg) {
  if (method_needs_contrastive(m) && contrastive.rows() == 0) {
    throw DegenerateInputError("method " + method_name(m) + " needs a contrastive set");
  }
  FittedMethod f;
  f.method = m;
  if (m == Method::mse || m == Method::mse_ratio) {
    f.mse = MseModel::fit(inliers, m == Method::mse_ratio ? contrastive : Matrix());
    return f;
  }
  FlowConfig fc = cfg.flow;
  fc.dim = inliers.cols();
  TrainConfig tc = cfg.train;
  const FlowModel init = FlowModel::init(fc, tc.seed);
  switch (m) {
    case Method::cf: tc.objective = Objective::contrastive; break;
    case Method::cf_ft: tc.objective = Objective::cf_ft; break;
    default: tc.objective = Objective::nll; break;
  }
  // Plain density estimators never see the contrastive data.
  const bool sees_contrastive = m == Method::cf || m == Method::cf_ft;
  auto res = train(init, inliers, sees_contrastive ? contrastive : Matrix(0, inliers.cols()), tc);
  f.flow = std::move(res.model);
  f.history = std::move(res.history);
  if (m == Method::flow_ratio) {
    tc.seed = cfg.train.seed + 1;
    const FlowModel init_c = FlowModel::init(fc, tc.seed);
    f.flow_contr = train(init_c, contrastive, Matrix(0, inliers.cols()), tc).model;
  }
  return f;
}

OneVsRestResult one_vs_rest(const std::vector<ClassData>& classes, const Matrix& contrastive, Method m,
                            const MethodConfig& cfg) {
  const std::size_t k = classes.size();
  if (k < 2) throw ConfigError("one_vs_rest needs at least two classes");
  OneVsRestResult out;
  out.auroc = Matrix(k, k - 1);
  out.row_mean.assign(k, 0.0);
  for (const auto& c : classes) out.names.push_back(c.name);
  for (std::size_t i = 0; i < k; ++i) {
    MethodConfig row = cfg;
    row.train.seed = cfg.train.seed + i;
    const FittedMethod f = fit_method(m, classes[i].train, contrastive, row);
    const auto s_in = f.score(classes[i].test);
    std::size_t col = 0;
    for (std::size_t j = 0; j < k; ++j) {
      if (j == i) continue;
      const double a = auroc(s_in, f.score(classes[j].test));
      out.auroc(i, col++) = a;
      out.row_mean[i] += a / static_cast<double>(k - 1);
    }
  }
  return out;
}

}  // namespace cflow
