#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cflow/matrix.hpp"

namespace cflow {

// One trainable array with its gradient and Adam moments (identical shapes).
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix m;
  Matrix v;
};

// Named parameter arrays in declaration order. Declaration order is the
// serialization order and the order used for flattening.
class ParamStore {
 public:
  std::size_t add(std::string name, Matrix init);

  std::size_t index_of(std::string_view name) const;
  bool contains(std::string_view name) const;

  Parameter& at(std::size_t i) { return params_.at(i); }
  const Parameter& at(std::size_t i) const { return params_.at(i); }
  Parameter& at(std::string_view name) { return params_[index_of(name)]; }
  const Parameter& at(std::string_view name) const { return params_[index_of(name)]; }

  const Matrix& value(std::size_t i) const { return params_[i].value; }
  Matrix& grad(std::size_t i) { return params_[i].grad; }

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  std::vector<Parameter>& entries() { return params_; }
  const std::vector<Parameter>& entries() const { return params_; }

  void zero_grad();
  // Clears Adam moments and the step counter.
  void reset_optimizer();

  std::uint64_t step() const { return step_; }
  void increment_step() { ++step_; }

  std::vector<double> flat_values() const;
  std::vector<double> flat_grads() const;
  void assign_flat_values(const std::vector<double>& flat);

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
  std::uint64_t step_ = 0;
};

}  // namespace cflow
