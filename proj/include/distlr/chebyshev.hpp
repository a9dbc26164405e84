#pragma once
//
// Chebyshev interpolant of exp(-x) on [0, L].
//

#include <distlr/errors.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace distlr {

struct ChebModel {
    int                 degree          = 0;
    double              interval_length = 0.0;
    std::vector<double> coefficients; // in T_j(2x/L - 1), j = 0..degree

    // map x in [0, L] to [-1, 1]
    double to_reference(double x) const { return interval_length > 0.0 ? 2.0 * x / interval_length - 1.0 : 0.0; }

    // Clenshaw evaluation at reference coordinate y in [-1, 1].
    double eval_reference(double y) const {
        double b1 = 0.0, b2 = 0.0;
        for (int j = degree; j >= 1; --j) {
            const double b0 = coefficients[static_cast<std::size_t>(j)] + 2.0 * y * b1 - b2;
            b2              = b1;
            b1              = b0;
        }
        return coefficients[0] + y * b1 - b2;
    }

    double operator()(double x) const { return eval_reference(to_reference(x)); }
};

namespace detail {

inline ChebModel interpolate_exp(double length, int degree) {
    ChebModel m;
    m.degree          = degree;
    m.interval_length = length;
    const int n       = degree + 1;
    std::vector<double> values(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        const double theta = std::numbers::pi * (j + 0.5) / n;
        const double x     = 0.5 * length * (1.0 + std::cos(theta));
        values[static_cast<std::size_t>(j)] = std::exp(-x);
    }
    m.coefficients.assign(static_cast<std::size_t>(n), 0.0);
    for (int k = 0; k < n; ++k) {
        double s = 0.0;
        for (int j = 0; j < n; ++j)
            s += values[static_cast<std::size_t>(j)] * std::cos(std::numbers::pi * k * (j + 0.5) / n);
        m.coefficients[static_cast<std::size_t>(k)] = (k == 0 ? 1.0 : 2.0) * s / n;
    }
    return m;
}

} // namespace detail

// sup |exp(-x) - h(x)| over 10 (d + 1) equispaced points of [0, L].
inline double dense_sup_error(const ChebModel &model) {
    const int    samples = 10 * (model.degree + 1);
    const double length  = model.interval_length;
    double       err     = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double x = samples == 1 ? 0.0 : length * i / (samples - 1);
        err            = std::max(err, std::abs(std::exp(-x) - model(x)));
    }
    return err;
}

inline double cheb_degree_cap(double length, double eps) { return 16.0 * (std::log1p(length) + std::log(1.0 / eps)); }

// Smallest degree whose interpolant meets eps on the dense sample. The
// degree is found by doubling and then bisecting.
inline ChebModel cheb_exp(double length, double eps) {
    if (!(length >= 0.0) || !std::isfinite(length))
        throw domain_error("interval length must be positive and finite");
    if (!(eps > 0.0 && eps < 1.0))
        throw domain_error("eps must lie in (0, 1)");

    const int cap  = static_cast<int>(std::floor(cheb_degree_cap(length, eps)));
    auto      good = [&](int d) { return dense_sup_error(detail::interpolate_exp(length, d)) <= eps; };

    if (good(0))
        return detail::interpolate_exp(length, 0);
    int hi = 1;
    while (!good(hi)) {
        if (hi > cap) {
            std::ostringstream msg;
            msg << "Chebyshev degree cap " << cap << " exceeded for L = " << length << ", eps = " << eps;
            throw builder_error(msg.str());
        }
        hi *= 2;
    }
    int lo = hi / 2; // lo fails (or is 0, which failed above)
    while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        if (good(mid))
            hi = mid;
        else
            lo = mid;
    }
    if (hi > cap)
        throw builder_error("Chebyshev degree cap " + std::to_string(cap) + " exceeded for L = " + std::to_string(length) +
                            ", eps = " + std::to_string(eps));
    return detail::interpolate_exp(length, hi);
}

} // namespace distlr
