#pragma once

#include <vector>

namespace sgt::data {

// Exact Mann-Whitney statistic over all (positive, negative) pairs:
// P(score_pos > score_neg) + ½·P(tie). Throws NumericError unless both
// classes are present.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

}  // namespace sgt::data
