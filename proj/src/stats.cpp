#include "evosim/stats.hpp"

#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace evosim {

SampleSummary summarize(std::span<const double> xs) {
    SampleSummary s;
    s.n = xs.size();
    if (s.n == 0) return s;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(s.n);
    if (s.n > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - s.mean) * (x - s.mean);
        s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
        s.se = s.sd / std::sqrt(static_cast<double>(s.n));
    }
    return s;
}

Interval t_interval(std::span<const double> xs, double level) {
    if (xs.size() < 2) throw std::invalid_argument("t_interval: need at least two samples");
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("t_interval: level must lie in (0, 1)");
    const SampleSummary s = summarize(xs);
    boost::math::students_t dist(static_cast<double>(s.n - 1));
    const double q = boost::math::quantile(dist, 0.5 + level / 2.0);
    return {s.mean - q * s.se, s.mean + q * s.se};
}

double t_test_p(std::span<const double> xs, double mu0, Tail tail) {
    if (xs.size() < 2) throw std::invalid_argument("t_test_p: need at least two samples");
    const SampleSummary s = summarize(xs);
    if (s.se == 0.0) {
        const bool hit = tail == Tail::greater ? s.mean > mu0 : s.mean < mu0;
        return hit ? 0.0 : 1.0;
    }
    const double t = (s.mean - mu0) / s.se;
    boost::math::students_t dist(static_cast<double>(s.n - 1));
    return tail == Tail::greater ? boost::math::cdf(boost::math::complement(dist, t)) : boost::math::cdf(dist, t);
}

double sign_test_p(std::size_t successes, std::size_t n) {
    if (successes > n) throw std::invalid_argument("sign_test_p: successes exceed trials");
    if (n == 0) return 1.0;
    if (successes == 0) return 1.0;
    boost::math::binomial dist(static_cast<double>(n), 0.5);
    return boost::math::cdf(boost::math::complement(dist, static_cast<double>(successes) - 1.0));
}

}  // namespace evosim
