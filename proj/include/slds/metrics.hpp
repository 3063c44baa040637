/// @file metrics.hpp Agreement between label sequences.

#ifndef SLDS_METRICS_HPP
#define SLDS_METRICS_HPP

#include "slds/types.hpp"

namespace slds {

/// Counts |A_i and B_j|. Labels are mapped to dense indices in increasing label order.
Eigen::MatrixXi contingency(const std::vector<int>& a, const std::vector<int>& b);

/// 2 I(A; B) / (H(A) + H(B)) with natural logs. Two single-cluster partitions give 1, one
/// single-cluster partition against a non-trivial one gives 0. Throws InputError on a length
/// mismatch or empty input.
double nmi(const std::vector<int>& a, const std::vector<int>& b);

/// Number of t with seq[t] != seq[t-1].
int switch_count(const std::vector<int>& seq);

}  // namespace slds

#endif  // SLDS_METRICS_HPP
