#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

namespace dpre {

// Probabilists' Hermite polynomial H_m, three-term recurrence
// H_{m+1}(x) = x H_m(x) - m H_{m-1}(x).
inline double hermite(int m, double x) {
    if (m < 0) throw std::invalid_argument("hermite: m must be >= 0");
    if (m == 0) return 1.0;
    double hm1 = 1.0, h = x;
    for (int k = 1; k < m; ++k) {
        const double next = x * h - static_cast<double>(k) * hm1;
        hm1 = h;
        h = next;
    }
    return h;
}

// Centered jointly-Gaussian family: covariance matrix Q and, optionally, one
// realization. v1 is mean-zero only, which is all the moment formulas use.
struct GaussianFamily {
    int dim = 0;
    std::vector<double> q;      // dim x dim, row-major, symmetric
    std::vector<double> sample; // optional realization, size dim

    double cov(int i, int j) const { return q[static_cast<std::size_t>(i) * dim + j]; }
    double x(int i) const { return sample[static_cast<std::size_t>(i)]; }
    bool has_sample() const { return static_cast<int>(sample.size()) == dim; }
};

// A multiset of indices into the family; repeated entries mean repeated
// factors of the same variable.
using IndexMultiset = std::vector<int>;

namespace wick_detail {

// Enumerates all partitions of `items`, calling block_value on each block;
// a zero block value prunes the branch. acc accumulates the product, fn
// receives (product, number_of_blocks) per complete partition.
inline void for_each_partition(std::vector<int>& items,
                               const std::function<double(const std::vector<int>&)>& block_value,
                               double acc, int blocks,
                               const std::function<void(double, int)>& fn) {
    if (items.empty()) {
        fn(acc, blocks);
        return;
    }
    const int first = items.front();
    std::vector<int> rest(items.begin() + 1, items.end());
    const std::size_t n = rest.size();
    // choose the block containing `first` as {first} union (subset of rest)
    const std::uint64_t subsets = 1ull << n;
    for (std::uint64_t mask = 0; mask < subsets; ++mask) {
        std::vector<int> block{first};
        std::vector<int> remain;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (1ull << i))
                block.push_back(rest[i]);
            else
                remain.push_back(rest[i]);
        }
        const double v = block_value(block);
        if (v == 0.0) continue;
        for_each_partition(remain, block_value, acc * v, blocks + 1, fn);
    }
}

inline double gaussian_cumulant(const GaussianFamily& fam, const std::vector<int>& block) {
    // centered Gaussian: only pair cumulants survive
    if (block.size() != 2) return 0.0;
    return fam.cov(block[0], block[1]);
}

// sum over pair partitions of products of covariances, smallest index first
inline double pairing_sum(const GaussianFamily& fam, std::vector<int>& idx) {
    if (idx.empty()) return 1.0;
    if (idx.size() % 2 != 0) return 0.0;
    const int a = idx.front();
    double total = 0.0;
    for (std::size_t j = 1; j < idx.size(); ++j) {
        std::vector<int> rest;
        rest.reserve(idx.size() - 2);
        for (std::size_t t = 1; t < idx.size(); ++t)
            if (t != j) rest.push_back(idx[t]);
        total += fam.cov(a, idx[j]) * pairing_sum(fam, rest);
    }
    return total;
}

} // namespace wick_detail

// E[X_A] for the centered Gaussian family: 0 for odd |A|, otherwise the
// Wick-theorem sum over all pair partitions.
inline double gaussian_moment(const GaussianFamily& fam, const IndexMultiset& a) {
    if (a.size() > 12) throw std::invalid_argument("gaussian_moment: |A| > 12");
    std::vector<int> idx(a.begin(), a.end());
    return wick_detail::pairing_sum(fam, idx);
}

// :X_A: at the realization, by the subset/partition expansion with signed
// cumulant products. General cumulant machinery with pruning; for centered
// Gaussian families only pair blocks contribute.
inline double wick_value_expansion(const GaussianFamily& fam, const IndexMultiset& a) {
    if (!fam.has_sample()) throw std::invalid_argument("wick_value: family has no realization");
    if (a.size() > 12) throw std::invalid_argument("wick_value: |A| > 12");
    double total = 0.0;
    const std::size_t n = a.size();
    const std::uint64_t subsets = 1ull << n;
    auto block_value = [&fam](const std::vector<int>& b) {
        return wick_detail::gaussian_cumulant(fam, b);
    };
    for (std::uint64_t mask = 0; mask < subsets; ++mask) {
        double xb = 1.0;
        std::vector<int> complement;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (1ull << i))
                xb *= fam.x(a[i]);
            else
                complement.push_back(a[i]);
        }
        double part = 0.0;
        wick_detail::for_each_partition(
            complement, block_value, 1.0, 0,
            [&part](double prod, int blocks) {
                part += (blocks % 2 == 0 ? prod : -prod);
            });
        total += xb * part;
    }
    return total;
}

// Same value through the centered-Gaussian recursion
// :X_A: = X_a :X_{A\a}: - sum_{b in A\a} Q_ab :X_{A\{a,b}}:,
// kept as an independent evaluation path.
inline double wick_value_recursive(const GaussianFamily& fam, const IndexMultiset& a) {
    if (!fam.has_sample()) throw std::invalid_argument("wick_value: family has no realization");
    if (a.size() > 12) throw std::invalid_argument("wick_value: |A| > 12");
    if (a.empty()) return 1.0;
    const int head = a.front();
    IndexMultiset rest(a.begin() + 1, a.end());
    double v = fam.x(head) * wick_value_recursive(fam, rest);
    for (std::size_t j = 0; j < rest.size(); ++j) {
        IndexMultiset smaller;
        smaller.reserve(rest.size() - 1);
        for (std::size_t t = 0; t < rest.size(); ++t)
            if (t != j) smaller.push_back(rest[t]);
        v -= fam.cov(head, rest[j]) * wick_value_recursive(fam, smaller);
    }
    return v;
}

inline double wick_value(const GaussianFamily& fam, const IndexMultiset& a) {
    return wick_value_recursive(fam, a);
}

// E[:X_A: :X_B:] = 0 unless |A| = |B|, otherwise the permanent-like sum over
// bijections pairing A with B.
inline double wick_pair_expectation(const GaussianFamily& fam, const IndexMultiset& a,
                                    const IndexMultiset& b) {
    if (a.size() + b.size() > 16)
        throw std::invalid_argument("wick_pair_expectation: |A| + |B| > 16");
    if (a.size() != b.size()) return 0.0;
    if (a.empty()) return 1.0;
    const std::size_t n = a.size();
    std::vector<bool> used(n, false);
    std::function<double(std::size_t)> rec = [&](std::size_t i) -> double {
        if (i == n) return 1.0;
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (used[j]) continue;
            used[j] = true;
            s += fam.cov(a[i], b[j]) * rec(i + 1);
            used[j] = false;
        }
        return s;
    };
    return rec(0);
}

// Joint empirical cumulant of {X_i, i in A} from a matrix of realizations
// (rows are samples), by the Moebius sum over partitions of A with empirical
// mixed moments per block.
inline double empirical_cumulant(const std::vector<std::vector<double>>& samples,
                                 const IndexMultiset& a) {
    if (a.size() > 4) throw std::invalid_argument("empirical_cumulant: |A| > 4");
    if (samples.size() < 1000)
        throw std::invalid_argument("empirical_cumulant: needs >= 1000 samples");
    auto moment = [&samples](const std::vector<int>& block) {
        double s = 0.0;
        for (const auto& row : samples) {
            double p = 1.0;
            for (int i : block) p *= row[static_cast<std::size_t>(i)];
            s += p;
        }
        return s / static_cast<double>(samples.size());
    };
    static const double factorial[5] = {1, 1, 2, 6, 24};
    double total = 0.0;
    std::vector<int> items(a.begin(), a.end());
    wick_detail::for_each_partition(
        items, moment, 1.0, 0, [&total](double prod, int blocks) {
            const double sign = (blocks - 1) % 2 == 0 ? 1.0 : -1.0;
            total += sign * factorial[blocks - 1] * prod;
        });
    return total;
}

} // namespace dpre
