#include "inttower/params.hpp"

#include "inttower/errors.hpp"

namespace inttower {

void Parameter::touch_row(std::uint32_t row) {
  if (row_flags_.size() < value.rows()) row_flags_.resize(value.rows(), 0);
  if (row_flags_[row] == 0) {
    row_flags_[row] = 1;
    touched_rows.push_back(row);
  }
}

void Parameter::zero_grad() {
  if (grad.shape() != value.shape()) {
    grad = Tensor::zeros(value.shape());
  } else if (role == ParamRole::kEmbedding) {
    const std::size_t d = value.cols();
    for (std::uint32_t r : touched_rows) std::fill_n(grad.data() + r * d, d, 0.0);
  } else {
    grad.fill(0.0);
  }
  for (std::uint32_t r : touched_rows) row_flags_[r] = 0;
  touched_rows.clear();
}

Parameter& ParamStore::add(const std::string& name, ParamRole role, Tensor init) {
  if (contains(name)) throw ContractError("duplicate parameter " + name);
  index_.emplace(name, params_.size());
  Parameter& p = params_.emplace_back();
  p.name = name;
  p.role = role;
  p.grad = Tensor::zeros(init.shape());
  p.value = std::move(init);
  return p;
}

Parameter& ParamStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter " + name);
  return params_[it->second];
}

const Parameter& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter " + name);
  return params_[it->second];
}

void ParamStore::zero_grad() {
  for (Parameter& p : params_) p.zero_grad();
}

std::size_t ParamStore::num_scalars() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += p.value.size();
  return n;
}

std::size_t ParamStore::num_scalars_with_prefix(const std::string& prefix) const {
  std::size_t n = 0;
  for (const Parameter& p : params_)
    if (p.name.starts_with(prefix)) n += p.value.size();
  return n;
}

}  // namespace inttower
