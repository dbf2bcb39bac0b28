#include "xplan/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace xplan::stats {

double mean(const std::vector<double>& xs) {
    if (xs.empty()) throw std::invalid_argument("mean of an empty sample");
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double paired_t_pvalue(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("paired samples differ in length");
    if (a.size() < 2) throw std::invalid_argument("paired t-test needs at least two pairs");
    const auto n = static_cast<double>(a.size());
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    const double m = mean(d);
    double ss = 0.0;
    for (double x : d) ss += (x - m) * (x - m);
    const double sd = std::sqrt(ss / (n - 1.0));
    if (sd == 0.0) return m == 0.0 ? 1.0 : 0.0;
    const double t = m / (sd / std::sqrt(n));
    boost::math::students_t dist(n - 1.0);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
}

double chi_square_uniform_pvalue(const std::vector<std::size_t>& counts) {
    if (counts.size() < 2) throw std::invalid_argument("chi-square needs at least two cells");
    std::size_t total = 0;
    for (auto c : counts) total += c;
    if (total == 0) throw std::invalid_argument("chi-square needs observations");
    const double expected = static_cast<double>(total) / static_cast<double>(counts.size());
    double stat = 0.0;
    for (auto c : counts) {
        const double diff = static_cast<double>(c) - expected;
        stat += diff * diff / expected;
    }
    boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
    return boost::math::cdf(boost::math::complement(dist, stat));
}

}  // namespace xplan::stats
