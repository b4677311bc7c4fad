#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "entrank/dataset.hpp"
#include "entrank/maxent.hpp"

#include <json.hpp>

namespace entrank {

/// A transaction that the model assigns probability zero appeared in the
/// evaluation data.
class ZeroProbabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BicReport {
  double neg_log_likelihood = 0.0;  // nats
  double penalty = 0.0;             // free_params / 2 * ln |D|
  int free_params = 0;
  double total = 0.0;               // neg_log_likelihood + penalty
};

struct MinedItemset {
  std::vector<int> items;  // attribute indexes, ascending
  std::size_t support = 0;
  double frequency = 0.0;
};

struct ItemsetScore {
  std::vector<int> items;
  double observed_freq = 0.0;
  double expected_freq = 0.0;  // clamped into [delta, 1-delta]
  double abs_error = 0.0;
  double rel_error = 0.0;
  double ll_improvement = 0.0;  // vs. the independence model, in nats
};

enum class RankKey { abs_error, rel_error, ll_improvement };

/// Sum of ln p(t) over the dataset. Throws ZeroProbabilityError if any
/// transaction falls in a zero-mass bucket or contradicts a pinned
/// attribute.
inline double dataset_log_likelihood(const MaxEntModel& m, const Dataset& d) {
  if (d.n_attributes != m.n_attributes())
    throw std::invalid_argument("dataset_log_likelihood: attribute count mismatch");
  const int n = m.n_attributes();
  const auto& targets = m.constraints.stat_targets;

  std::vector<double> log_bucket(targets.size(), 0.0);
  std::vector<char> dead_bucket(targets.size(), 0);
  for (std::size_t k = 0; k < targets.size(); ++k) {
    if (targets[k] > 0.0)
      log_bucket[k] = std::log(m.bucket_weight[k]) - std::log(m.bucket_norm);
    else
      dead_bucket[k] = 1;
  }
  std::vector<double> log_one(static_cast<std::size_t>(n)), log_zero(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double q = m.indep.probs[static_cast<std::size_t>(i)];
    log_one[static_cast<std::size_t>(i)] = std::log(q);
    log_zero[static_cast<std::size_t>(i)] = std::log1p(-q);
  }

  long double total = 0.0L;
  for (const auto& t : d.transactions) {
    const int k = m.constraints.stat.evaluate(t);
    if (dead_bucket[static_cast<std::size_t>(k)])
      throw ZeroProbabilityError("transaction hits a zero-probability bucket of the model");
    double sum = log_bucket[static_cast<std::size_t>(k)];
    for (int i = 0; i < n; ++i)
      sum += t[static_cast<std::size_t>(i)] ? log_one[static_cast<std::size_t>(i)]
                                            : log_zero[static_cast<std::size_t>(i)];
    if (std::isinf(sum))
      throw ZeroProbabilityError("transaction contradicts a pinned attribute of the model");
    total += sum;
  }
  return static_cast<double>(total);
}

/// Free parameters: N column margins plus one fewer than the number of
/// buckets with positive target mass (the targets sum to one).
inline int free_parameter_count(const MaxEntModel& m) {
  int nonzero = 0;
  for (double t : m.constraints.stat_targets)
    if (t > 0.0) ++nonzero;
  return m.n_attributes() + (nonzero - 1);
}

inline BicReport bic(const MaxEntModel& m, const Dataset& d) {
  BicReport r;
  r.neg_log_likelihood = -dataset_log_likelihood(m, d);
  r.free_params = free_parameter_count(m);
  r.penalty = 0.5 * static_cast<double>(r.free_params) * std::log(static_cast<double>(d.size()));
  r.total = r.neg_log_likelihood + r.penalty;
  return r;
}

namespace detail {

/// Lexicographic order on itemsets viewed as ascending index sequences,
/// operating directly on bit masks. At the lowest differing bit, the owner
/// holds the smaller element there; the other mask wins only if it has
/// already ended (a proper prefix sorts first).
inline bool mask_lex_less(std::uint32_t a, std::uint32_t b) {
  if (a == b) return false;
  const int i = std::countr_zero(a ^ b);
  if (b & (std::uint32_t{1} << i)) return (a >> i) == 0;
  return (b >> i) != 0;
}

inline std::vector<int> mask_to_items(std::uint32_t mask) {
  std::vector<int> items;
  while (mask) {
    items.push_back(std::countr_zero(mask));
    mask &= mask - 1;
  }
  return items;
}

inline bool items_lex_less(const std::vector<int>& a, const std::vector<int>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

/// Exhaustive path for small attribute counts: per-subset supports via a
/// superset-sum transform over the full lattice, then a closure scan.
inline std::vector<MinedItemset> mine_closed_dense(const Dataset& d, std::size_t top_k) {
  const int n = d.n_attributes;
  const std::size_t lattice = std::size_t{1} << n;
  std::vector<std::uint32_t> count(lattice, 0);
  for (const auto& t : d.transactions) {
    std::uint32_t mask = 0;
    for (int i = 0; i < n; ++i)
      if (t[static_cast<std::size_t>(i)]) mask |= std::uint32_t{1} << i;
    ++count[mask];
  }
  for (int i = 0; i < n; ++i) {
    const std::uint32_t bit = std::uint32_t{1} << i;
    for (std::uint32_t mask = 0; mask < lattice; ++mask)
      if (!(mask & bit)) count[mask] += count[mask | bit];
  }

  struct Entry {
    std::uint32_t mask;
    std::uint32_t support;
  };
  std::vector<Entry> closed;
  for (std::uint32_t mask = 1; mask < lattice; ++mask) {
    const std::uint32_t c = count[mask];
    if (c == 0) continue;
    bool is_closed = true;
    for (int i = 0; i < n && is_closed; ++i) {
      const std::uint32_t bit = std::uint32_t{1} << i;
      if (!(mask & bit) && count[mask | bit] == c) is_closed = false;
    }
    if (is_closed) closed.push_back({mask, c});
  }

  std::sort(closed.begin(), closed.end(), [](const Entry& a, const Entry& b) {
    if (a.support != b.support) return a.support > b.support;
    return mask_lex_less(a.mask, b.mask);
  });
  if (closed.size() > top_k) closed.resize(top_k);

  std::vector<MinedItemset> out;
  out.reserve(closed.size());
  for (const Entry& e : closed)
    out.push_back({mask_to_items(e.mask), e.support,
                   static_cast<double>(e.support) / static_cast<double>(d.size())});
  return out;
}

struct TidSet {
  std::vector<std::uint64_t> words;

  std::size_t count() const {
    std::size_t c = 0;
    for (std::uint64_t w : words) c += static_cast<std::size_t>(std::popcount(w));
    return c;
  }
};

inline TidSet tidset_and(const TidSet& a, const TidSet& b) {
  TidSet out;
  out.words.resize(a.words.size());
  for (std::size_t w = 0; w < a.words.size(); ++w) out.words[w] = a.words[w] & b.words[w];
  return out;
}

/// True when every transaction in `cover` also contains item i, i.e. cover
/// is a subset of tid(i).
inline bool covers_item(const TidSet& cover, const TidSet& item_tids) {
  for (std::size_t w = 0; w < cover.words.size(); ++w)
    if (cover.words[w] & ~item_tids.words[w]) return false;
  return true;
}

/// Closed-set enumeration by prefix-preserving closure extension; collects
/// every nonempty closed itemset with support >= min_support.
inline void enumerate_closed(const std::vector<TidSet>& item_tids, int n,
                             const std::vector<int>& base, const TidSet& cover,
                             std::size_t min_support, int core,
                             std::vector<MinedItemset>& out, std::size_t n_transactions) {
  for (int i = core + 1; i < n; ++i) {
    if (std::binary_search(base.begin(), base.end(), i)) continue;
    TidSet next = tidset_and(cover, item_tids[static_cast<std::size_t>(i)]);
    const std::size_t support = next.count();
    if (support < min_support) continue;

    std::vector<int> closure;
    bool canonical = true;
    for (int j = 0; j < n; ++j) {
      if (std::binary_search(base.begin(), base.end(), j) || j == i) {
        closure.push_back(j);
        continue;
      }
      if (covers_item(next, item_tids[static_cast<std::size_t>(j)])) {
        if (j < i) { canonical = false; break; }  // closure reaches below the extension
        closure.push_back(j);
      }
    }
    if (!canonical) continue;

    out.push_back({closure, support,
                   static_cast<double>(support) / static_cast<double>(n_transactions)});
    enumerate_closed(item_tids, n, closure, next, min_support, i, out, n_transactions);
  }
}

/// General path: LCM-style depth-first search with a support threshold that
/// halves until at least top_k closed sets are found (or the threshold
/// bottoms out at one occurrence, which enumerates everything).
inline std::vector<MinedItemset> mine_closed_dfs(const Dataset& d, std::size_t top_k) {
  const int n = d.n_attributes;
  const std::size_t n_rows = d.size();
  const std::size_t n_words = (n_rows + 63) / 64;

  std::vector<TidSet> item_tids(static_cast<std::size_t>(n));
  for (auto& ts : item_tids) ts.words.assign(n_words, 0);
  for (std::size_t r = 0; r < n_rows; ++r)
    for (int i = 0; i < n; ++i)
      if (d.transactions[r][static_cast<std::size_t>(i)])
        item_tids[static_cast<std::size_t>(i)].words[r >> 6] |= std::uint64_t{1} << (r & 63);

  TidSet all;
  all.words.assign(n_words, ~std::uint64_t{0});
  if (n_rows % 64 != 0) all.words.back() = (std::uint64_t{1} << (n_rows % 64)) - 1;

  // Items present in every transaction close the empty prefix; they form the
  // unique maximal closed set of full support.
  std::vector<int> root_closure;
  for (int i = 0; i < n; ++i)
    if (covers_item(all, item_tids[static_cast<std::size_t>(i)])) root_closure.push_back(i);

  std::size_t min_support = std::max<std::size_t>(n_rows / 2, 1);
  std::vector<MinedItemset> found;
  while (true) {
    found.clear();
    if (!root_closure.empty())
      found.push_back({root_closure, n_rows, 1.0});
    enumerate_closed(item_tids, n, root_closure, all, min_support, -1, found, n_rows);
    if (found.size() >= top_k || min_support == 1) break;
    min_support = std::max<std::size_t>(min_support / 2, 1);
  }

  std::sort(found.begin(), found.end(), [](const MinedItemset& a, const MinedItemset& b) {
    if (a.support != b.support) return a.support > b.support;
    return items_lex_less(a.items, b.items);
  });
  if (found.size() > top_k) found.resize(top_k);
  return found;
}

}  // namespace detail

/// The top_k most frequent nonempty closed itemsets (every closed itemset if
/// fewer exist), ordered by descending frequency with ties broken by
/// lexicographic attribute order. An itemset is closed when no strict
/// superset has the same frequency. Meant for desk-scale data; the dense
/// path covers N <= 22 and the search path everything beyond.
inline std::vector<MinedItemset> mine_closed_frequent(const Dataset& d, std::size_t top_k) {
  if (d.size() == 0) throw DataError("mine_closed_frequent: empty dataset");
  if (top_k == 0) return {};
  return d.n_attributes <= 22 ? detail::mine_closed_dense(d, top_k)
                              : detail::mine_closed_dfs(d, top_k);
}

/// Per-itemset comparison of observed test frequency against the model
/// estimate, plus the itemset log-likelihood gain over the independence
/// model:
///   |D| [ (f ln p + (1-f) ln(1-p)) - (f ln p_ind + (1-f) ln(1-p_ind)) ].
/// Estimates are clamped into [delta, 1-delta], delta = 1/(2 |D_test|),
/// before the logs. Queries are pure, so the work splits across n_threads.
inline std::vector<ItemsetScore> score_itemsets(const MaxEntModel& model,
                                                const MaxEntModel& independence_model,
                                                const std::vector<MinedItemset>& itemsets,
                                                const Dataset& test, int n_threads = 1) {
  if (itemsets.empty()) throw std::invalid_argument("score_itemsets: empty itemset list");
  if (n_threads < 1) n_threads = 1;
  const double n_test = static_cast<double>(test.size());
  const double delta = 0.5 / n_test;

  std::vector<ItemsetScore> scores(itemsets.size());
  const auto worker = [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      const MinedItemset& mined = itemsets[j];
      const double f = mined.frequency;
      const double p = std::clamp(query_itemset(model, mined.items), delta, 1.0 - delta);
      const double p_ind =
          std::clamp(query_itemset(independence_model, mined.items), delta, 1.0 - delta);
      const double ll = n_test * (f * std::log(p) + (1.0 - f) * std::log1p(-p));
      const double ll_ind = n_test * (f * std::log(p_ind) + (1.0 - f) * std::log1p(-p_ind));
      ItemsetScore& s = scores[j];
      s.items = mined.items;
      s.observed_freq = f;
      s.expected_freq = p;
      s.abs_error = std::abs(f - p);
      s.rel_error = s.abs_error / f;
      s.ll_improvement = ll - ll_ind;
    }
  };

  if (n_threads == 1 || itemsets.size() < 64) {
    worker(0, itemsets.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (itemsets.size() + static_cast<std::size_t>(n_threads) - 1) /
                              static_cast<std::size_t>(n_threads);
    for (std::size_t begin = 0; begin < itemsets.size(); begin += chunk)
      pool.emplace_back(worker, begin, std::min(begin + chunk, itemsets.size()));
    for (auto& th : pool) th.join();
  }
  return scores;
}

/// Stable descending sort by the chosen key.
inline std::vector<ItemsetScore> rank(std::vector<ItemsetScore> scores, RankKey by) {
  const auto key = [by](const ItemsetScore& s) {
    switch (by) {
      case RankKey::abs_error: return s.abs_error;
      case RankKey::rel_error: return s.rel_error;
      case RankKey::ll_improvement: return s.ll_improvement;
    }
    return s.abs_error;
  };
  std::stable_sort(scores.begin(), scores.end(),
                   [&key](const ItemsetScore& a, const ItemsetScore& b) { return key(a) > key(b); });
  return scores;
}

inline RankKey rank_key_from_token(std::string_view token) {
  if (token == "abs_error") return RankKey::abs_error;
  if (token == "rel_error") return RankKey::rel_error;
  if (token == "ll_improvement") return RankKey::ll_improvement;
  throw std::invalid_argument("unknown rank key: " + std::string(token));
}

namespace detail {

inline std::string itemset_labels(const std::vector<int>& items, const std::vector<long>& labels) {
  std::string out;
  for (std::size_t j = 0; j < items.size(); ++j) {
    if (j) out += ' ';
    out += std::to_string(labels[static_cast<std::size_t>(items[j])]);
  }
  return out;
}

}  // namespace detail

inline void write_scores_csv(std::ostream& out, const std::vector<ItemsetScore>& scores,
                             const std::vector<long>& labels) {
  out << "itemset;observed;expected;abs_err;rel_err;ll_improvement\n";
  out << std::setprecision(10);
  for (const auto& s : scores)
    out << detail::itemset_labels(s.items, labels) << ';' << s.observed_freq << ';'
        << s.expected_freq << ';' << s.abs_error << ';' << s.rel_error << ';' << s.ll_improvement
        << '\n';
}

inline void write_scores_json(std::ostream& out, const std::vector<ItemsetScore>& scores,
                              const std::vector<long>& labels) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : scores) {
    arr.push_back({{"itemset", detail::itemset_labels(s.items, labels)},
                   {"observed", s.observed_freq},
                   {"expected", s.expected_freq},
                   {"abs_err", s.abs_error},
                   {"rel_err", s.rel_error},
                   {"ll_improvement", s.ll_improvement}});
  }
  out << arr.dump(2) << '\n';
}

inline void write_bic_csv(std::ostream& out,
                          const std::vector<std::pair<std::string, BicReport>>& rows) {
  out << "model;neg_log_likelihood;penalty;free_params;total\n";
  out << std::setprecision(10);
  for (const auto& [name, r] : rows)
    out << name << ';' << r.neg_log_likelihood << ';' << r.penalty << ';' << r.free_params << ';'
        << r.total << '\n';
}

inline void write_bic_json(std::ostream& out,
                           const std::vector<std::pair<std::string, BicReport>>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [name, r] : rows)
    arr.push_back({{"model", name},
                   {"neg_log_likelihood", r.neg_log_likelihood},
                   {"penalty", r.penalty},
                   {"free_params", r.free_params},
                   {"total", r.total}});
  out << arr.dump(2) << '\n';
}

}  // namespace entrank
