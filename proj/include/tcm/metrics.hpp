#pragma once

#include <cstddef>
#include <vector>

namespace tcm {

// Rows are actual classes, columns predicted.
using Confusion = std::vector<std::vector<std::size_t>>;

// Unweighted mean of per-class F1; a class with no actual and no predicted
// positives contributes 0.
double macro_f1(const Confusion& confusion);
// Pooled counts; for single-label classification this equals accuracy.
double micro_f1(const Confusion& confusion);
double accuracy(const Confusion& confusion);

}  // namespace tcm
