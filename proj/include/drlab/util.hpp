#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace dr {

// Raised on bad user input (invalid model, malformed config, broken precondition).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a run exceeds its configured resource cap (support size, vertex count).
class BudgetError : public std::runtime_error {
public:
    explicit BudgetError(const std::string& what) : std::runtime_error(what) {}
};

// Compensated summation; supports grow into the thousands and means must be
// stable to ~1 ulp for the certified bounds to mean anything.
class KahanSum {
public:
    void add(double x) {
        double y = x - c_;
        double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }

private:
    double s_ = 0.0;
    double c_ = 0.0;
};

inline double kahan_total(std::span<const double> xs) {
    KahanSum k;
    for (double x : xs) k.add(x);
    return k.value();
}

// x / m^n without overflowing the intermediate power.
inline double div_pow(double x, double m, int n) {
    if (x == 0.0) return 0.0;
    double p = std::pow(m, n);
    if (std::isfinite(p) && p > 0.0) return x / p;
    double r = std::log(std::fabs(x)) - static_cast<double>(n) * std::log(m);
    double v = std::exp(r);
    return x < 0.0 ? -v : v;
}

// Ordered parallel map: out[i] = fn(i). Work is chunked by index, results land
// in a preallocated vector, so the output does not depend on thread count.
// The first worker exception is rethrown on the calling thread.
template <typename T>
std::vector<T> parallel_map(std::size_t count, unsigned threads, const std::function<T(std::size_t)>& fn) {
    std::vector<T> out(count);
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) out[i] = fn(i);
        return out;
    }
    std::vector<std::thread> pool;
    std::size_t nw = std::min<std::size_t>(threads, count);
    std::vector<std::exception_ptr> errors(nw);
    for (std::size_t w = 0; w < nw; ++w) {
        pool.emplace_back([&, w]() {
            try {
                for (std::size_t i = w; i < count; i += nw) out[i] = fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

}  // namespace dr
