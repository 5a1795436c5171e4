#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "bssp/balancing.hpp"
#include "bssp/design.hpp"
#include "bssp/error.hpp"
#include "bssp/gwlp.hpp"
#include "bssp/matrix.hpp"
#include "bssp/rng.hpp"

namespace bssp {

enum class SearchStrategy { exhaustive_lexicographic, random_shuffle };

struct SearchConfig {
    SearchStrategy strategy = SearchStrategy::random_shuffle;
    std::size_t budget = 10000;
    std::uint64_t seed = 0;
    double early_stop_psi = 0.0;

    void validate() const {
        if (budget < 1) throw validation_error("search budget must be >= 1");
    }
};

struct SubsampleResult {
    std::vector<std::size_t> selected_indices;  // rows of the source data, design-row order
    Design matched_design;                      // column-permuted template actually matched
    double psi = kPsiEmpty;
    std::size_t matched_count = 0;
    std::vector<std::size_t> permutation;  // template column c came from permutation[c]
};

namespace detail {

// permutation -> factorial-base rank; injective for d <= 20, used to dedup
inline std::uint64_t lehmer_rank(const std::vector<std::size_t>& perm) {
    const std::size_t d = perm.size();
    std::uint64_t rank = 0;
    for (std::size_t i = 0; i < d; ++i) {
        std::uint64_t smaller = 0;
        for (std::size_t j = i + 1; j < d; ++j)
            if (perm[j] < perm[i]) ++smaller;
        rank = rank * (d - i) + smaller;
    }
    return rank;
}

inline std::uint64_t factorial_capped(std::size_t d, std::uint64_t cap) {
    std::uint64_t f = 1;
    for (std::size_t i = 2; i <= d; ++i) {
        if (f > cap / i) return cap;
        f *= i;
    }
    return std::min(f, cap);
}

}  // namespace detail

// Deterministic sequence of column permutations. Exhaustive mode walks all d!
// permutations in lexicographic order; random mode emits a seeded stream of
// distinct uniform permutations, at most `budget` of them.
class PermutationStream {
public:
    PermutationStream(std::size_t d, const SearchConfig& config)
        : d_(d), config_(config), rng_(config.seed), current_(d) {
        if (d < 1) throw validation_error("permutation stream needs d >= 1");
        config.validate();
        std::iota(current_.begin(), current_.end(), std::size_t{0});
        distinct_limit_ = detail::factorial_capped(d, std::numeric_limits<std::uint64_t>::max());
    }

    // fills `perm` and returns true, or returns false when the stream is done
    bool next(std::vector<std::size_t>& perm) {
        if (config_.strategy == SearchStrategy::exhaustive_lexicographic) {
            if (exhausted_) return false;
            perm = current_;
            exhausted_ = !std::next_permutation(current_.begin(), current_.end());
            ++emitted_;
            return true;
        }
        if (emitted_ >= config_.budget || emitted_ >= distinct_limit_) return false;
        while (true) {
            for (std::size_t i = d_; i > 1; --i) std::swap(current_[i - 1], current_[rng_.below(i)]);
            if (seen_.insert(detail::lehmer_rank(current_)).second) break;
        }
        perm = current_;
        ++emitted_;
        return true;
    }

private:
    std::size_t d_;
    SearchConfig config_;
    Rng rng_;
    std::vector<std::size_t> current_;
    bool exhausted_ = false;
    std::uint64_t emitted_ = 0;
    std::uint64_t distinct_limit_ = 0;
    std::unordered_set<std::uint64_t> seen_;
};

inline std::vector<std::vector<std::size_t>> permutation_stream(std::size_t d, const SearchConfig& config) {
    PermutationStream stream(d, config);
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> perm;
    while (out.size() < config.budget && stream.next(perm)) out.push_back(perm);
    return out;
}

namespace detail {

// pattern -> ascending source-row indices
struct PatternIndex {
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> rows;

    explicit PatternIndex(const BinaryMatrix& x) {
        check_pattern_width(x.cols());
        for (std::size_t i = 0; i < x.rows(); ++i) rows[x.packed_row(i)].push_back(static_cast<std::uint32_t>(i));
    }
};

// One pass of the matching rule: for each design row take the lowest-index
// unused sample with the identical bit pattern.
inline std::vector<std::size_t> match_patterns(const PatternIndex& index, const std::vector<std::uint64_t>& design_rows) {
    std::vector<std::size_t> selected;
    selected.reserve(design_rows.size());
    std::unordered_map<std::uint64_t, std::size_t> used;
    for (std::uint64_t pattern : design_rows) {
        auto it = index.rows.find(pattern);
        if (it == index.rows.end()) continue;
        std::size_t& cursor = used[pattern];
        if (cursor < it->second.size()) selected.push_back(it->second[cursor++]);
    }
    return selected;
}

inline double psi_of_rows(const BinaryMatrix& x, const std::vector<std::size_t>& rows, std::size_t resolution,
                          const BalanceConfig& cfg) {
    return confounding_measure(x.select_rows(rows), resolution, cfg);
}

}  // namespace detail

// Greedy per-row matching of data rows onto a design (identity column order).
// Outcomes ride along through the returned indices.
inline SubsampleResult match_samples(const BinaryMatrix& x, const Design& design, std::size_t template_resolution = 0,
                                     const BalanceConfig& cfg = {}) {
    if (x.rows() > 0 && x.cols() != design.factors())
        throw validation_error("data has " + std::to_string(x.cols()) + " columns, design has " +
                               std::to_string(design.factors()));
    check_pattern_width(design.factors());
    if (template_resolution == 0) template_resolution = gwlp(design).resolution;

    SubsampleResult out;
    out.matched_design = design;
    out.permutation.resize(design.factors());
    std::iota(out.permutation.begin(), out.permutation.end(), std::size_t{0});
    if (x.rows() == 0) return out;

    detail::PatternIndex index(x);
    std::vector<std::uint64_t> design_rows(design.runs());
    for (std::size_t r = 0; r < design.runs(); ++r) design_rows[r] = design.packed_row(r);
    out.selected_indices = detail::match_patterns(index, design_rows);
    out.matched_count = out.selected_indices.size();
    out.psi = detail::psi_of_rows(x, out.selected_indices, template_resolution, cfg);
    return out;
}

// Column-permutation search over the template (Sample_Matching inside): every
// candidate is matched and scored by psi; strictly smaller psi wins, ties keep
// the earlier candidate; stops early once psi reaches early_stop_psi.
inline SubsampleResult ffd_subsample(const BinaryMatrix& x, const Design& tmpl, const SearchConfig& search = {},
                                     const BalanceConfig& cfg = {}) {
    search.validate();
    if (x.rows() > 0 && x.cols() != tmpl.factors())
        throw validation_error("data has " + std::to_string(x.cols()) + " columns, template has " +
                               std::to_string(tmpl.factors()));
    check_pattern_width(tmpl.factors());
    const std::size_t d = tmpl.factors();
    const std::size_t template_resolution = gwlp(tmpl).resolution;

    std::optional<detail::PatternIndex> index;
    if (x.rows() > 0) index.emplace(x);

    SubsampleResult best;
    bool have_candidate = false;
    PermutationStream stream(d, search);
    std::vector<std::size_t> perm;
    std::vector<std::uint64_t> design_rows(tmpl.runs());
    std::size_t evaluated = 0;
    while (evaluated < search.budget && stream.next(perm)) {
        ++evaluated;
        // permuted design row: bit c comes from template column perm[c]
        for (std::size_t r = 0; r < tmpl.runs(); ++r) {
            std::uint64_t p = 0;
            for (std::size_t c = 0; c < d; ++c)
                if (tmpl(r, perm[c]) > 0) p |= (std::uint64_t{1} << c);
            design_rows[r] = p;
        }
        std::vector<std::size_t> selected =
            index ? detail::match_patterns(*index, design_rows) : std::vector<std::size_t>{};
        const double psi = index ? detail::psi_of_rows(x, selected, template_resolution, cfg) : kPsiEmpty;
        if (!have_candidate || psi < best.psi) {
            best.selected_indices = std::move(selected);
            best.matched_count = best.selected_indices.size();
            best.psi = psi;
            best.permutation = perm;
            have_candidate = true;
        }
        if (have_candidate && best.psi <= search.early_stop_psi) break;
    }

    if (!have_candidate || best.matched_count == 0)
        throw error("no-match", "no design row could be matched within the budget of " +
                                    std::to_string(search.budget) + " permutations");
    best.matched_design = tmpl.permute_columns(best.permutation);
    return best;
}

}  // namespace bssp
