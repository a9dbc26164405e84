#pragma once

#include <stdexcept>
#include <string>

namespace distlr {

// Base class for all library failures.
class error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Input outside the mathematical domain of a function (infinite divergence,
// out-of-domain point, out-of-range index, singular Stirling row).
class domain_error : public error {
  public:
    using error::error;
};

// Bracketed root finder could not reach the requested tolerance.
class solver_error : public error {
  public:
    solver_error(const std::string &what, double lo, double hi)
        : error(what + " (bracket [" + std::to_string(lo) + ", " + std::to_string(hi) + "])"), lo_(lo), hi_(hi) {}

    double bracket_lo() const noexcept { return lo_; }
    double bracket_hi() const noexcept { return hi_; }

  private:
    double lo_;
    double hi_;
};

// A low-rank builder failed (e.g. Chebyshev degree cap exceeded).
class builder_error : public error {
  public:
    using error::error;
};

} // namespace distlr
