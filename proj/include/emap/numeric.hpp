#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace emap {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

namespace detail {

/// Unevaluated sum hi + lo with |lo| <= ulp(hi)/2.
struct DoubleDouble {
    double hi = 0.0;
    double lo = 0.0;
};

inline DoubleDouble two_sum(double a, double b) {
    const double s = a + b;
    const double bb = s - a;
    const double err = (a - (s - bb)) + (b - bb);
    return {s, err};
}

inline DoubleDouble add(DoubleDouble a, DoubleDouble b) {
    DoubleDouble s = two_sum(a.hi, b.hi);
    s.lo += a.lo + b.lo;
    return two_sum(s.hi, s.lo);
}

template <class Get>
DoubleDouble pairwise_dd(const Get& get, std::size_t begin, std::size_t end) {
    constexpr std::size_t kLeaf = 8;
    if (end - begin <= kLeaf) {
        DoubleDouble acc;
        for (std::size_t k = begin; k < end; ++k) acc = add(acc, {get(k), 0.0});
        return acc;
    }
    const std::size_t mid = begin + (end - begin) / 2;
    return add(pairwise_dd(get, begin, mid), pairwise_dd(get, mid, end));
}

}  // namespace detail

/// Pairwise (tree) sum over get(0..count-1) in index order, accumulated in
/// double-double precision. The tree shape depends only on `count`.
template <class Get>
double pairwise_sum(const Get& get, std::size_t count) {
    if (count == 0) return 0.0;
    const auto s = detail::pairwise_dd(get, 0, count);
    return s.hi + s.lo;
}

/// Mean with the same summation tree; the final division is corrected with the
/// low-order part so the result is (nearly always) the correctly rounded mean.
template <class Get>
double pairwise_mean(const Get& get, std::size_t count) {
    if (count == 0) return 0.0;
    const auto s = detail::pairwise_dd(get, 0, count);
    const double n = static_cast<double>(count);
    const double q = s.hi / n;
    const double rem = std::fma(-q, n, s.hi) + s.lo;
    return q + rem / n;
}

inline double pairwise_sum(const std::vector<double>& xs) {
    return pairwise_sum([&](std::size_t k) { return xs[k]; }, xs.size());
}

inline double pairwise_mean(const std::vector<double>& xs) {
    return pairwise_mean([&](std::size_t k) { return xs[k]; }, xs.size());
}

/// Worker count from EMAP_THREADS, else 1.
inline unsigned default_threads() {
    if (const char* env = std::getenv("EMAP_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return 1;
}

/// Runs fn(k) for k in [0, count) on up to `threads` workers using static
/// contiguous chunks. Each index is processed exactly once; callers write only
/// to slots owned by k, so results do not depend on the worker count.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
    const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), count);
    if (workers <= 1) {
        for (std::size_t k = 0; k < count; ++k) fn(k);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (count + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                const std::size_t lo = w * chunk;
                const std::size_t hi = std::min(count, lo + chunk);
                for (std::size_t k = lo; k < hi; ++k) fn(k);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace emap
