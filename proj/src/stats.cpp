#include "mempath/stats.hpp"

#include "mempath/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mempath::stats {
namespace {

std::vector<double> ranks(std::span<const double> v) {
    const int n = static_cast<int>(v.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    int i = 0;
    while (i < n) {
        int j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = 0.5 * (i + j) + 1.0; // 1-based average rank of the tie run
        for (int k = i; k <= j; ++k) r[order[k]] = avg;
        i = j + 1;
    }
    return r;
}

double pearson(std::span<const double> a, std::span<const double> b) {
    const int n = static_cast<int>(a.size());
    const double ma = mean(a);
    const double mb = mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (int i = 0; i < n; ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0)
        fail(ErrorKind::InsufficientData, "correlation of a constant sequence");
    return sab / std::sqrt(saa * sbb);
}

} // namespace

double mean(std::span<const double> v) {
    if (v.empty()) fail(ErrorKind::InsufficientData, "mean of an empty sample");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double stdev(std::span<const double> v) {
    if (v.size() < 2) fail(ErrorKind::InsufficientData, "stdev needs at least two points");
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        fail(ErrorKind::InsufficientData, "spearman inputs differ in length");
    if (a.size() < 3) fail(ErrorKind::InsufficientData, "spearman needs at least three points");
    const std::vector<double> ra = ranks(a);
    const std::vector<double> rb = ranks(b);
    return pearson(ra, rb);
}

LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        fail(ErrorKind::InsufficientData, "least squares needs two equal-length points");
    const double mx = mean(x);
    const double my = mean(y);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) fail(ErrorKind::InsufficientData, "least squares on a constant abscissa");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    return fit;
}

Histogram histogram(std::span<const double> values, double lo, double hi, int bins) {
    if (bins < 1 || !(hi > lo)) fail(ErrorKind::ConfigInvalid, "histogram needs hi > lo, bins >= 1");
    Histogram h;
    h.lo = lo;
    h.hi = hi;
    h.counts.assign(bins, 0);
    const double width = (hi - lo) / bins;
    for (double v : values) {
        if (v < lo) {
            ++h.underflow;
        } else if (v >= hi) {
            ++h.overflow;
        } else {
            int b = static_cast<int>((v - lo) / width);
            if (b >= bins) b = bins - 1; // rounding right at the edge
            ++h.counts[b];
        }
    }
    return h;
}

} // namespace mempath::stats
