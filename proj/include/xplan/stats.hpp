#pragma once

#include <cstddef>
#include <vector>

namespace xplan::stats {

double mean(const std::vector<double>& xs);  // throws on empty input

// Two-sided paired t-test on equal-length samples (n ≥ 2). A zero-variance
// difference yields p = 1 when the means agree and p = 0 otherwise.
double paired_t_pvalue(const std::vector<double>& a, const std::vector<double>& b);

// Goodness-of-fit p-value of observed counts against the uniform distribution
// over the same cells (χ², k−1 degrees of freedom).
double chi_square_uniform_pvalue(const std::vector<std::size_t>& counts);

}  // namespace xplan::stats
