#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <string_view>

namespace deplen {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

enum class CellType { kRnn, kGru, kLstm };

/// Number of stacked gate blocks in the weight matrices of a cell.
int gate_count(CellType cell);

std::string_view to_string(CellType cell);

/// Accepts "RNN", "GRU", "LSTM" (case-insensitive). Throws std::invalid_argument.
CellType parse_cell_type(std::string_view name);

struct Architecture {
  CellType cell = CellType::kRnn;
  int hidden = 8;
  int layers = 1;

  void validate() const;
  std::string label() const;  // e.g. "RNN/8/1"

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Index arithmetic for batched sequences.
///
/// Every batched sequence in this library (recurrent features, logits,
/// predictions, targets) is stored time-major: the value for batch element
/// `b` at time step `t` lives in column `t * batch + b`. The block of columns
/// for one time step is therefore contiguous, which is what the recurrence
/// consumes.
struct BatchLayout {
  int batch = 0;
  int steps = 0;

  std::ptrdiff_t columns() const {
    return static_cast<std::ptrdiff_t>(batch) * steps;
  }
  std::ptrdiff_t index(int b, int t) const {
    return static_cast<std::ptrdiff_t>(t) * batch + b;
  }
};

/// A batch of vector-valued sequences: `values` is features x (steps * batch)
/// in the time-major layout of BatchLayout.
template <typename T>
struct SequenceBatch {
  BatchLayout layout;
  Mat<T> values;

  int features() const { return static_cast<int>(values.rows()); }
  auto step(int t) { return values.middleCols(static_cast<std::ptrdiff_t>(t) * layout.batch, layout.batch); }
  auto step(int t) const {
    return values.middleCols(static_cast<std::ptrdiff_t>(t) * layout.batch, layout.batch);
  }
};

}  // namespace deplen
