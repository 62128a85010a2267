#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cflow/baselines.hpp"
#include "cflow/flow.hpp"
#include "cflow/training.hpp"

namespace cflow {

enum class Method { cf, cf_ft, nll_flow, flow_ratio, mse, mse_ratio };

std::string method_name(Method m);
Method parse_method(std::string_view s);
// Comma-separated list, e.g. "cf,nll_flow".
std::vector<Method> parse_method_list(std::string_view s);
bool method_needs_contrastive(Method m);

struct MethodConfig {
  FlowConfig flow;  // dim is taken from the data
  TrainConfig train;
};

// A fitted scorer; higher scores mean more anomalous.
struct FittedMethod {
  Method method = Method::cf;
  std::optional<FlowModel> flow;        // cf, cf_ft, nll_flow; inlier flow of flow_ratio
  std::optional<FlowModel> flow_contr;  // flow_ratio
  std::optional<MseModel> mse;
  TrainHistory history;                 // of `flow`

  std::vector<double> score(const Matrix& x) const;
};

// The ratio method's contrastive flow uses seed train.seed + 1.
FittedMethod fit_method(Method m, const Matrix& inliers, const Matrix& contrastive, const MethodConfig& cfg);

struct ClassData {
  std::string name;
  Matrix train;
  Matrix test;
};

struct OneVsRestResult {
  std::vector<std::string> names;
  // Row i holds AUROCs of class i as inliers against every other class in
  // index order (k x (k - 1)).
  Matrix auroc;
  std::vector<double> row_mean;
};

// Fits once per inlier class (seed train.seed + class index). The same
// contrastive set serves every row.
OneVsRestResult one_vs_rest(const std::vector<ClassData>& classes, const Matrix& contrastive, Method m,
                            const MethodConfig& cfg);

}  // namespace cflow
