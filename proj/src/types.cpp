#include "deplen/types.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace deplen {

int gate_count(CellType cell) {
  switch (cell) {
    case CellType::kRnn:
      return 1;
    case CellType::kGru:
      return 3;
    case CellType::kLstm:
      return 4;
  }
  throw std::logic_error("unknown cell type");
}

std::string_view to_string(CellType cell) {
  switch (cell) {
    case CellType::kRnn:
      return "RNN";
    case CellType::kGru:
      return "GRU";
    case CellType::kLstm:
      return "LSTM";
  }
  throw std::logic_error("unknown cell type");
}

CellType parse_cell_type(std::string_view name) {
  std::string upper(name);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (upper == "RNN") return CellType::kRnn;
  if (upper == "GRU") return CellType::kGru;
  if (upper == "LSTM") return CellType::kLstm;
  throw std::invalid_argument("unknown cell type '" + std::string(name) + "'");
}

void Architecture::validate() const {
  if (hidden < 1) throw std::invalid_argument("hidden size must be >= 1");
  if (layers < 1) throw std::invalid_argument("layer count must be >= 1");
}

std::string Architecture::label() const {
  return std::string(to_string(cell)) + "/" + std::to_string(hidden) + "/" + std::to_string(layers);
}

}  // namespace deplen
