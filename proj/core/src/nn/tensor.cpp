#include "pcdc/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pcdc/error.hpp"

namespace pcdc::nn {

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    fail(ErrorCode::kShapeMismatch, "tensor data size " + std::to_string(data_.size()) +
                                        " != " + std::to_string(rows_) + "x" +
                                        std::to_string(cols_));
  }
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor slice_rows(const Tensor& t, std::size_t begin, std::size_t count) {
  Tensor out(count, t.cols());
  std::copy_n(t.flat().begin() + static_cast<std::ptrdiff_t>(begin * t.cols()),
              count * t.cols(), out.flat().begin());
  return out;
}

}  // namespace pcdc::nn
