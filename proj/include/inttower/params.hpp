#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "inttower/tensor.hpp"

namespace inttower {

enum class ParamRole : std::uint8_t {
  kEmbedding = 0,  // V x d table, sparse row gradients
  kWeight = 1,     // dense matrix, subject to L2 regularization
  kBias = 2,
};

struct Parameter {
  std::string name;
  ParamRole role = ParamRole::kWeight;
  Tensor value;
  Tensor grad;
  // Embedding rows that received gradient since the last zero_grad(), in
  // first-touch order.
  std::vector<std::uint32_t> touched_rows;

  void touch_row(std::uint32_t row);
  bool row_touched(std::uint32_t row) const { return row < row_flags_.size() && row_flags_[row] != 0; }
  void zero_grad();

 private:
  std::vector<std::uint8_t> row_flags_;
};

// Named parameter collection. Iteration order is insertion order, which
// fixes checkpoint layout and optimizer traversal. Element addresses are
// stable across add() calls.
class ParamStore {
 public:
  Parameter& add(const std::string& name, ParamRole role, Tensor init);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;

  std::deque<Parameter>& all() noexcept { return params_; }
  const std::deque<Parameter>& all() const noexcept { return params_; }
  std::size_t size() const noexcept { return params_.size(); }

  void zero_grad();
  std::size_t num_scalars() const;
  std::size_t num_scalars_with_prefix(const std::string& prefix) const;

 private:
  std::deque<Parameter> params_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace inttower
