#include "cflow/param_store.hpp"

#include <algorithm>

#include "cflow/error.hpp"

namespace cflow {

std::size_t ParamStore::add(std::string name, Matrix init) {
  if (index_.contains(name)) throw ConfigError("duplicate parameter name: " + name);
  const std::size_t idx = params_.size();
  Parameter p;
  p.name = name;
  p.grad = Matrix(init.rows(), init.cols());
  p.m = Matrix(init.rows(), init.cols());
  p.v = Matrix(init.rows(), init.cols());
  p.value = std::move(init);
  params_.push_back(std::move(p));
  index_.emplace(std::move(name), idx);
  return idx;
}

std::size_t ParamStore::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ConfigError("unknown parameter: " + std::string(name));
  return it->second;
}

bool ParamStore::contains(std::string_view name) const { return index_.contains(std::string(name)); }

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.grad.fill(0.0);
}

void ParamStore::reset_optimizer() {
  for (auto& p : params_) {
    p.m.fill(0.0);
    p.v.fill(0.0);
  }
  step_ = 0;
}

std::vector<double> ParamStore::flat_values() const {
  std::vector<double> out;
  out.reserve(scalar_count());
  for (const auto& p : params_) out.insert(out.end(), p.value.values().begin(), p.value.values().end());
  return out;
}

std::vector<double> ParamStore::flat_grads() const {
  std::vector<double> out;
  out.reserve(scalar_count());
  for (const auto& p : params_) out.insert(out.end(), p.grad.values().begin(), p.grad.values().end());
  return out;
}

void ParamStore::assign_flat_values(const std::vector<double>& flat) {
  if (flat.size() != scalar_count()) throw DimensionError("flat parameter vector has wrong length");
  std::size_t off = 0;
  for (auto& p : params_) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), p.value.size(), p.value.data());
    off += p.value.size();
  }
}

}  // namespace cflow
