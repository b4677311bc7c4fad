#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "entrank/statistics.hpp"

namespace entrank {

/// Per-attribute success probabilities of a product (independence)
/// distribution. Values of exactly 0 or 1 are legal.
struct IndependenceParams {
  std::vector<double> probs;

  int n_attributes() const { return static_cast<int>(probs.size()); }
};

/// Exact distribution of a statistic: probs[k] = P(S(A) = k), k = 0..K.
struct StatDistribution {
  std::vector<double> probs;
};

namespace detail {

inline void check_probs(const IndependenceParams& params) {
  for (double p : params.probs)
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("independence parameter outside [0,1]");
}

}  // namespace detail

/// Distribution of the (optionally cut) ones count under the product
/// distribution. probs[k] = P(min(ones, cap) = k); the top bucket absorbs
/// P(ones >= cap). Runs one pass per attribute, folding each attribute in as
///   P(ones = k) <- p * P_prev(ones = k-1) + (1-p) * P_prev(ones = k).
/// O(cap * N) time, O(cap) memory.
inline StatDistribution row_margin_dist(const IndependenceParams& params, int cap) {
  const int n = params.n_attributes();
  if (cap < 0 || cap > n) throw std::invalid_argument("row_margin_dist: cap outside [0, N]");
  detail::check_probs(params);

  std::vector<double> dp(static_cast<std::size_t>(cap) + 1, 0.0);
  dp[0] = 1.0;
  for (double p : params.probs) {
    if (cap > 0) dp[static_cast<std::size_t>(cap)] += p * dp[static_cast<std::size_t>(cap) - 1];
    for (int k = cap - 1; k >= 1; --k)
      dp[static_cast<std::size_t>(k)] =
          (1.0 - p) * dp[static_cast<std::size_t>(k)] + p * dp[static_cast<std::size_t>(k) - 1];
    if (cap > 0) dp[0] *= (1.0 - p);
  }
  return {std::move(dp)};
}

/// Single forward step of the ones-count recurrence: extends a distribution
/// over k attributes to k+1 by folding in one attribute with success
/// probability p.
inline StatDistribution row_margin_add(const StatDistribution& dist, double p) {
  std::vector<double> out(dist.probs.size() + 1, 0.0);
  for (std::size_t k = 0; k < dist.probs.size(); ++k) {
    out[k] += (1.0 - p) * dist.probs[k];
    out[k + 1] += p * dist.probs[k];
  }
  return {std::move(out)};
}

/// Inverse of row_margin_add: removes attribute `index` from an exact
/// untruncated ones-count distribution, in O(N) time. The defining identity
///   P(ones = k) = p * R(k-1) + (1 - p) * R(k)
/// can be unwound from either end:
///   R(0) = P(0) / (1 - p),  R(k) = (P(k) - p * R(k-1)) / (1 - p)     (up)
///   R(n-1) = P(n) / p,      R(k) = (P(k+1) - (1 - p) * R(k+1)) / p   (down)
/// Rounding grows by p/(1-p) per upward step and (1-p)/p per downward step,
/// so the pass runs in whichever direction contracts: upward for p <= 1/2,
/// downward otherwise. Callers that feed the result onward should still
/// recompute from scratch when p is within 1e-6 of 1 or when a noticeably
/// negative entry appears.
inline StatDistribution row_margin_remove(const StatDistribution& dist,
                                          const IndependenceParams& params, int index) {
  const int n = params.n_attributes();
  if (index < 0 || index >= n) throw std::invalid_argument("row_margin_remove: bad index");
  if (dist.probs.size() != static_cast<std::size_t>(n) + 1)
    throw std::invalid_argument("row_margin_remove: distribution is not untruncated");
  const long double p = params.probs[static_cast<std::size_t>(index)];
  const long double q = 1.0L - p;
  if (q <= 0.0L)
    throw std::domain_error("row_margin_remove: attribute probability is 1");

  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  if (p <= 0.5L) {
    long double prev = dist.probs[0] / q;
    out[0] = static_cast<double>(prev);
    for (int k = 1; k < n; ++k) {
      prev = (dist.probs[static_cast<std::size_t>(k)] - p * prev) / q;
      out[static_cast<std::size_t>(k)] = static_cast<double>(prev);
    }
  } else {
    long double next = dist.probs[static_cast<std::size_t>(n)] / p;
    out[static_cast<std::size_t>(n) - 1] = static_cast<double>(next);
    for (int k = n - 2; k >= 0; --k) {
      next = (dist.probs[static_cast<std::size_t>(k) + 1] - q * next) / p;
      out[static_cast<std::size_t>(k)] = static_cast<double>(next);
    }
  }
  return {std::move(out)};
}

/// Distribution of the lazarus count under the product distribution.
///
/// One column at a time, the pass carries
///   diag[k]    = P(laz(A_i) = k, last(A_i) = i)
///   carry[k]   = sum over previous columns j of P(laz(A_{i-1}) = k', last = j)
///                that a one at column i would turn into lazarus count k
///                (k' plus the zeros between j and i); maintained as
///                carry_i[k] = diag_{i-1}[k] + (1 - p_{i-1}) * carry_{i-1}[k-1]
///   none       = P(no ones among the first i columns)
///   marginal[k]= P(laz(A_i) = k), updated as (1-p_i)*marginal[k] + diag[k].
/// Keeping the carry sums incrementally makes every update O(1) for any
/// parameter values, including zeros. O(N) memory, O(N^2) time.
inline StatDistribution lazarus_dist(const IndependenceParams& params) {
  const int n = params.n_attributes();
  if (n < 1) throw std::invalid_argument("lazarus_dist: need at least one attribute");
  detail::check_probs(params);
  const std::size_t n_buckets = static_cast<std::size_t>(n >= 2 ? n - 2 : 0) + 1;

  std::vector<double> diag(n_buckets, 0.0), carry(n_buckets, 0.0), marginal(n_buckets, 0.0);
  double none = 1.0;       // P(all-zero prefix)
  double p_prev = 0.0;
  marginal[0] = 1.0;       // empty prefix has lazarus count 0

  for (int i = 1; i <= n; ++i) {
    const double p = params.probs[static_cast<std::size_t>(i - 1)];

    // carry over: highest k first so carry[k-1] is still the previous column's value
    const int k_hi = std::min<int>(i - 2, static_cast<int>(n_buckets) - 1);
    for (int k = k_hi; k >= 1; --k)
      carry[static_cast<std::size_t>(k)] =
          diag[static_cast<std::size_t>(k)] + (1.0 - p_prev) * carry[static_cast<std::size_t>(k) - 1];
    carry[0] = diag[0];

    diag[0] = p * (diag[0] + none);
    for (int k = 1; k <= k_hi; ++k) diag[static_cast<std::size_t>(k)] = p * carry[static_cast<std::size_t>(k)];

    none *= (1.0 - p);
    for (std::size_t k = 0; k < n_buckets; ++k)
      marginal[k] = (1.0 - p) * marginal[k] + diag[k];
    p_prev = p;
  }
  return {std::move(marginal)};
}

/// Joint distribution of the first/last one positions under the product
/// distribution, indexed by joint_encode(first, last, N). Attainable cells:
///   P(0,0)            = prod (1 - p_k)
///   P(i,i)            = p_i * prod_{k != i} (1 - p_k)
///   P(i,j), 0 < i < j = prod_{k<i} (1-p_k) * p_i * p_j * prod_{k>j} (1-p_k)
/// computed from running prefix/suffix products of (1 - p). All other codes
/// are zero. O(N^2) time and output size.
inline StatDistribution bounds_joint_dist(const IndependenceParams& params) {
  const int n = params.n_attributes();
  if (n < 1) throw std::invalid_argument("bounds_joint_dist: need at least one attribute");
  detail::check_probs(params);

  std::vector<double> prefix(static_cast<std::size_t>(n) + 1, 1.0);  // prefix[i] = prod_{k<=i} (1-p_k)
  std::vector<double> suffix(static_cast<std::size_t>(n) + 2, 1.0);  // suffix[j] = prod_{k>=j} (1-p_k)
  for (int i = 1; i <= n; ++i)
    prefix[static_cast<std::size_t>(i)] =
        prefix[static_cast<std::size_t>(i) - 1] * (1.0 - params.probs[static_cast<std::size_t>(i - 1)]);
  for (int j = n; j >= 1; --j)
    suffix[static_cast<std::size_t>(j)] =
        suffix[static_cast<std::size_t>(j) + 1] * (1.0 - params.probs[static_cast<std::size_t>(j - 1)]);

  std::vector<double> out(static_cast<std::size_t>(n + 1) * static_cast<std::size_t>(n + 1), 0.0);
  const auto at = [n](int first, int last) -> std::size_t {
    return static_cast<std::size_t>(first) + static_cast<std::size_t>(n + 1) * static_cast<std::size_t>(last);
  };
  out[at(0, 0)] = prefix[static_cast<std::size_t>(n)];
  for (int i = 1; i <= n; ++i) {
    const double p_i = params.probs[static_cast<std::size_t>(i - 1)];
    out[at(i, i)] = prefix[static_cast<std::size_t>(i) - 1] * p_i * suffix[static_cast<std::size_t>(i) + 1];
    for (int j = i + 1; j <= n; ++j) {
      const double p_j = params.probs[static_cast<std::size_t>(j - 1)];
      out[at(i, j)] =
          prefix[static_cast<std::size_t>(i) - 1] * p_i * p_j * suffix[static_cast<std::size_t>(j) + 1];
    }
  }
  return {std::move(out)};
}

/// Exact distribution of any statistic by enumerating all 2^N transactions,
/// accumulating in extended precision. The reference engine for everything
/// else; restricted to N <= 24.
inline StatDistribution brute_force_dist(const IndependenceParams& params, const Statistic& stat) {
  const int n = params.n_attributes();
  if (n > 24) throw std::invalid_argument("brute_force_dist: too many attributes (max 24)");
  if (stat.n_attributes() != n)
    throw std::invalid_argument("brute_force_dist: statistic attribute count mismatch");
  detail::check_probs(params);

  std::vector<long double> acc(static_cast<std::size_t>(stat.k_max()) + 1, 0.0L);
  // Depth-first over attributes with the partial product carried down; zero
  // branches are skipped outright.
  const auto walk = [&](const auto& self, int idx, std::uint32_t mask, long double weight) -> void {
    if (idx == n) {
      acc[static_cast<std::size_t>(stat.evaluate_mask(mask))] += weight;
      return;
    }
    const double p = params.probs[static_cast<std::size_t>(idx)];
    if (p > 0.0) self(self, idx + 1, mask | (std::uint32_t{1} << idx), weight * p);
    if (p < 1.0) self(self, idx + 1, mask, weight * (1.0 - p));
  };
  walk(walk, 0, 0, 1.0L);

  StatDistribution out;
  out.probs.assign(acc.begin(), acc.end());
  return out;
}

/// Dispatches to the exact engine for a statistic. Joint statistics have no
/// dedicated recurrence and fall back to enumeration, which caps them at
/// N <= 24.
inline StatDistribution stat_dist(const IndependenceParams& params, const Statistic& stat) {
  if (stat.n_attributes() != params.n_attributes())
    throw std::invalid_argument("stat_dist: statistic attribute count mismatch");
  switch (stat.kind()) {
    case StatKind::constant:
      detail::check_probs(params);
      return {{1.0}};
    case StatKind::row_margins:
      return row_margin_dist(params, stat.k_max());
    case StatKind::lazarus:
      return lazarus_dist(params);
    case StatKind::bounds_joint:
      return bounds_joint_dist(params);
    case StatKind::joint:
      return brute_force_dist(params, stat);
  }
  throw std::logic_error("stat_dist: unreachable");
}

/// Distribution of S conditioned on every attribute of `itemset` being 1:
/// the clamped-parameter call with p_j = 1 for members of the itemset.
inline StatDistribution conditional_dist(const IndependenceParams& params, const Statistic& stat,
                                         const std::vector<int>& itemset) {
  IndependenceParams clamped = params;
  for (int j : itemset) {
    if (j < 0 || j >= params.n_attributes())
      throw std::invalid_argument("conditional_dist: attribute index out of range");
    clamped.probs[static_cast<std::size_t>(j)] = 1.0;
  }
  return stat_dist(clamped, stat);
}

}  // namespace entrank
