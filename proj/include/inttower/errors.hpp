#pragma once

#include <stdexcept>
#include <string>

namespace inttower {

// Error categories double as CLI exit codes where one is assigned.
enum class ErrorKind {
  kShape = 1,
  kContract = 1,
  kConfig = 2,
  kData = 3,
  kDivergence = 4,
  kFormat = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& w) : Error(ErrorKind::kShape, "shape error: " + w) {}
};
struct ContractError : Error {
  explicit ContractError(const std::string& w) : Error(ErrorKind::kContract, "contract error: " + w) {}
};
struct IndexError : Error {
  explicit IndexError(const std::string& w) : Error(ErrorKind::kContract, "index error: " + w) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::kConfig, "config error: " + w) {}
};
struct DataError : Error {
  explicit DataError(const std::string& w) : Error(ErrorKind::kData, "data error: " + w) {}
};
struct MetricError : Error {
  explicit MetricError(const std::string& w) : Error(ErrorKind::kData, "metric error: " + w) {}
};
struct DivergenceError : Error {
  explicit DivergenceError(const std::string& w) : Error(ErrorKind::kDivergence, "divergence: " + w) {}
};
struct FormatError : Error {
  explicit FormatError(const std::string& w) : Error(ErrorKind::kFormat, "format error: " + w) {}
};

}  // namespace inttower
