#include "tcm/metrics.hpp"

#include <string>

#include "tcm/errors.hpp"

namespace tcm {

namespace {

std::size_t check_confusion(const Confusion& confusion) {
  const std::size_t n = confusion.size();
  if (n == 0) throw InputError("empty confusion matrix");
  std::size_t total = 0;
  for (const auto& row : confusion) {
    if (row.size() != n) {
      throw DimensionError("confusion matrix is not square: " + std::to_string(n) + " rows, " +
                           std::to_string(row.size()) + " columns");
    }
    for (std::size_t v : row) total += v;
  }
  if (total == 0) throw InputError("confusion matrix has no observations");
  return n;
}

}  // namespace

double macro_f1(const Confusion& confusion) {
  const std::size_t n = check_confusion(confusion);
  double sum = 0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t tp = confusion[c][c], actual = 0, predicted = 0;
    for (std::size_t j = 0; j < n; ++j) {
      actual += confusion[c][j];
      predicted += confusion[j][c];
    }
    // F1 = 2TP / (actual + predicted); 0 when the class never occurs.
    if (actual + predicted > 0) sum += 2.0 * double(tp) / double(actual + predicted);
  }
  return sum / double(n);
}

double micro_f1(const Confusion& confusion) {
  const std::size_t n = check_confusion(confusion);
  std::size_t tp = 0, total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += confusion[i][i];
    for (std::size_t j = 0; j < n; ++j) total += confusion[i][j];
  }
  return double(tp) / double(total);
}

double accuracy(const Confusion& confusion) { return micro_f1(confusion); }

}  // namespace tcm
