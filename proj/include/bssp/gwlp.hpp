#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "bssp/design.hpp"
#include "bssp/error.hpp"

namespace bssp {

constexpr double kGwlpZeroTol = 1e-9;

// Generalized word-length pattern (A_1..A_d) and the derived resolution:
// smallest j with A_j above tolerance, or d+1 when the whole pattern vanishes.
struct Gwlp {
    std::vector<double> values;
    std::size_t resolution = 0;

    double at(std::size_t j) const { return values.at(j - 1); }  // 1-based
};

// Krawtchouk polynomial P_j(x; d, q) in exact integer arithmetic.
inline std::int64_t krawtchouk(std::size_t j, std::size_t x, std::size_t d, std::size_t q = 2) {
    if (j > d || x > d) throw validation_error("krawtchouk requires 0 <= j,x <= d");
    auto binom = [](std::int64_t a, std::int64_t b) -> std::int64_t {
        if (b < 0 || b > a) return 0;
        b = std::min(b, a - b);
        std::int64_t r = 1;
        for (std::int64_t i = 1; i <= b; ++i) r = r * (a - b + i) / i;
        return r;
    };
    std::int64_t sum = 0;
    for (std::size_t w = 0; w <= j; ++w) {
        std::int64_t qpow = 1;
        for (std::size_t p = 0; p < j - w; ++p) qpow *= static_cast<std::int64_t>(q - 1);
        const std::int64_t term = qpow * binom(static_cast<std::int64_t>(x), static_cast<std::int64_t>(w)) *
                                  binom(static_cast<std::int64_t>(d - x), static_cast<std::int64_t>(j - w));
        sum += (w % 2 == 0) ? term : -term;
    }
    return sum;
}

// Distance distribution (B_0..B_d): B_j = (ordered row pairs at Hamming
// distance j) / m. Depends only on entry equality, so it is identical for
// the {-1,+1} and {0,1} encodings of the same matrix.
inline std::vector<double> distance_distribution(const Design& design) {
    const std::size_t m = design.runs();
    const std::size_t d = design.factors();
    std::vector<std::uint64_t> counts(d + 1, 0);
    if (d <= 64) {
        std::vector<std::uint64_t> packed(m);
        for (std::size_t r = 0; r < m; ++r) packed[r] = design.packed_row(r);
        for (std::size_t i = 0; i < m; ++i) {
            ++counts[0];  // self pair
            for (std::size_t k = i + 1; k < m; ++k)
                counts[std::popcount(packed[i] ^ packed[k])] += 2;
        }
    } else {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t k = 0; k < m; ++k) {
                std::size_t h = 0;
                for (std::size_t c = 0; c < d; ++c) h += design(i, c) != design(k, c);
                ++counts[h];
            }
    }
    std::vector<double> out(d + 1);
    for (std::size_t j = 0; j <= d; ++j) out[j] = static_cast<double>(counts[j]) / static_cast<double>(m);
    return out;
}

namespace detail {

inline std::size_t resolution_from_values(const std::vector<double>& values) {
    for (std::size_t j = 0; j < values.size(); ++j)
        if (values[j] > kGwlpZeroTol) return j + 1;
    return values.size() + 1;
}

}  // namespace detail

// MacWilliams route: A_j = (1/(m(q-1))) * sum_k P_j(k; d, q) B_k, q = 2.
inline Gwlp gwlp(const Design& design) {
    const std::size_t m = design.runs();
    const std::size_t d = design.factors();
    const std::vector<double> b = distance_distribution(design);
    Gwlp out;
    out.values.resize(d);
    for (std::size_t j = 1; j <= d; ++j) {
        double a = 0.0;
        for (std::size_t k = 0; k <= d; ++k)
            a += static_cast<double>(krawtchouk(j, k, d)) * b[k];
        a /= static_cast<double>(m);
        out.values[j - 1] = (std::abs(a) <= kGwlpZeroTol) ? 0.0 : a;
    }
    out.resolution = detail::resolution_from_values(out.values);
    return out;
}

// Independent route for q = 2: enumerate every column subset I and accumulate
// A_|I| += (J_I / m)^2 with J_I the absolute column-product sum. Exponential
// in d; serves as the testing oracle for gwlp().
inline Gwlp gwlp_oracle(const Design& design) {
    const std::size_t d = design.factors();
    if (d > 14) throw capacity_error("gwlp_oracle enumerates 2^d subsets; d = " + std::to_string(d) + " exceeds 14");
    const std::size_t m = design.runs();
    std::vector<std::uint64_t> packed(m);
    for (std::size_t r = 0; r < m; ++r) packed[r] = design.packed_row(r);
    Gwlp out;
    out.values.assign(d, 0.0);
    for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << d); ++mask) {
        std::int64_t sum = 0;
        for (std::size_t r = 0; r < m; ++r) {
            // product over I is -1 iff the row holds an odd number of -1s there
            sum += (std::popcount(mask & ~packed[r]) % 2 == 0) ? 1 : -1;
        }
        const double ratio = static_cast<double>(sum) / static_cast<double>(m);
        out.values[static_cast<std::size_t>(std::popcount(mask)) - 1] += ratio * ratio;
    }
    for (double& a : out.values)
        if (std::abs(a) <= kGwlpZeroTol) a = 0.0;
    out.resolution = detail::resolution_from_values(out.values);
    return out;
}

inline std::size_t resolution(const Design& design) { return gwlp(design).resolution; }

// Largest t such that every t-subset of columns shows each of the 2^t sign
// patterns exactly m/2^t times. Exhaustive over subsets, growing t until a
// subset fails.
inline std::size_t orthogonal_strength(const Design& design) {
    const std::size_t m = design.runs();
    const std::size_t d = design.factors();
    std::vector<std::uint64_t> packed(m);
    for (std::size_t r = 0; r < m; ++r) packed[r] = design.packed_row(r);

    for (std::size_t t = 1; t <= d; ++t) {
        if (t >= 64 || m % (std::size_t{1} << t) != 0) return t - 1;
        const std::size_t expected = m >> t;
        std::vector<std::size_t> cols(t);
        for (std::size_t i = 0; i < t; ++i) cols[i] = i;
        std::vector<std::uint32_t> tally(std::size_t{1} << t);
        while (true) {
            std::fill(tally.begin(), tally.end(), 0);
            for (std::size_t r = 0; r < m; ++r) {
                std::size_t pattern = 0;
                for (std::size_t i = 0; i < t; ++i)
                    pattern |= static_cast<std::size_t>((packed[r] >> cols[i]) & 1) << i;
                ++tally[pattern];
            }
            for (std::uint32_t count : tally)
                if (count != expected) return t - 1;
            // next combination in lexicographic order
            std::size_t i = t;
            while (i > 0 && cols[i - 1] == d - t + i - 1) --i;
            if (i == 0) break;
            ++cols[i - 1];
            for (std::size_t k = i; k < t; ++k) cols[k] = cols[k - 1] + 1;
        }
    }
    return d;
}

}  // namespace bssp
