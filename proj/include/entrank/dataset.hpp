#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace entrank {

/// One row of a binary dataset; element i is 0 or 1.
using Transaction = std::vector<std::uint8_t>;

/// Unreadable or malformed input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary transaction collection with a fixed attribute order.
///
/// attribute_labels[i] is the original item id of attribute i. The order is
/// frozen when the dataset is loaded or generated and is shared by every
/// transaction. Instances are treated as immutable once built and can be
/// shared read-only across threads.
struct Dataset {
  int n_attributes = 0;
  std::vector<Transaction> transactions;
  std::vector<long> attribute_labels;

  std::size_t size() const { return transactions.size(); }
};

/// Train/test partition of one dataset. Both sides keep the full attribute
/// order of the parent, even for items that end up in only one side.
struct SplitPair {
  Dataset train;
  Dataset test;
  std::uint64_t seed = 0;
};

namespace detail {

/// Uniform double in [0,1). Derived from the top 53 bits of the generator so
/// the stream does not depend on the standard library's distribution
/// implementation.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Index in [0, n). Modulo bias is irrelevant next to determinism here.
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % n);
}

inline bool parse_item_id(std::string_view token, long& out) {
  if (token.empty() || token.front() == '-' || token.front() == '+') return false;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last;
}

}  // namespace detail

/// Parses a FIMI-style transaction file: one transaction per line, items as
/// whitespace-separated non-negative integer ids. Attribute order is the
/// order of first appearance in the file. Duplicate ids within a line
/// collapse to a single occurrence. Blank lines are legal and produce
/// all-zero transactions.
inline Dataset load_fimi(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);

  std::vector<std::vector<int>> item_rows;
  std::unordered_map<long, int> index_of;
  std::vector<long> labels;
  std::string line;
  std::size_t line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    item_rows.emplace_back();
    auto& row = item_rows.back();
    std::string_view rest(line);
    while (!rest.empty()) {
      const std::size_t start = rest.find_first_not_of(" \t\r");
      if (start == std::string_view::npos) break;
      rest.remove_prefix(start);
      std::size_t end = rest.find_first_of(" \t\r");
      if (end == std::string_view::npos) end = rest.size();
      const std::string_view token = rest.substr(0, end);
      rest.remove_prefix(end);

      long id = 0;
      if (!detail::parse_item_id(token, id)) {
        throw DataError("non-integer token '" + std::string(token) + "' on line " +
                        std::to_string(line_no) + " of " + path);
      }
      auto [it, inserted] = index_of.try_emplace(id, static_cast<int>(labels.size()));
      if (inserted) labels.push_back(id);
      row.push_back(it->second);
    }
  }

  if (line_no == 0) throw DataError("empty input: " + path);
  if (labels.empty()) throw DataError("no items found in " + path);

  Dataset d;
  d.n_attributes = static_cast<int>(labels.size());
  d.attribute_labels = std::move(labels);
  d.transactions.reserve(item_rows.size());
  for (const auto& row : item_rows) {
    Transaction t(d.n_attributes, 0);
    for (int idx : row) t[static_cast<std::size_t>(idx)] = 1;  // duplicates collapse
    d.transactions.push_back(std::move(t));
  }
  return d;
}

/// Writes the mirror of load_fimi: each transaction becomes the ids of its
/// set attributes in attribute order; an all-zero transaction becomes a
/// blank line.
inline void save_fimi(const Dataset& d, std::ostream& out) {
  for (const auto& t : d.transactions) {
    bool first = true;
    for (int i = 0; i < d.n_attributes; ++i) {
      if (!t[static_cast<std::size_t>(i)]) continue;
      if (!first) out << ' ';
      out << d.attribute_labels[static_cast<std::size_t>(i)];
      first = false;
    }
    out << '\n';
  }
}

inline void save_fimi(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open file for writing: " + path);
  save_fimi(d, out);
  if (!out) throw DataError("write failed: " + path);
}

enum class GeneratorKind { independent, clusters, markov };

inline GeneratorKind generator_kind_from_token(std::string_view token) {
  if (token == "independent") return GeneratorKind::independent;
  if (token == "clusters") return GeneratorKind::clusters;
  if (token == "markov") return GeneratorKind::markov;
  throw DataError("unknown generator kind: " + std::string(token));
}

inline std::string to_token(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::independent: return "independent";
    case GeneratorKind::clusters: return "clusters";
    case GeneratorKind::markov: return "markov";
  }
  return "?";
}

/// Synthetic benchmark data. Three families:
///  - independent: each attribute i is Bernoulli(f_i) with f_i drawn once
///    per run uniformly from [0,1];
///  - clusters: two equal-size clusters; within a cluster all attributes are
///    independent, at 25% in one cluster and 75% in the other;
///  - markov: the first attribute is Bernoulli(0.5) and each later attribute
///    copies its predecessor, inverted with probability 25%.
/// Bit-identical output for identical (kind, n_attributes, n_transactions,
/// seed).
inline Dataset generate_synthetic(GeneratorKind kind, int n_attributes, int n_transactions,
                                  std::uint64_t seed) {
  if (n_attributes < 1) throw DataError("generate_synthetic: n_attributes must be >= 1");
  if (n_transactions < 1) throw DataError("generate_synthetic: n_transactions must be >= 1");

  std::mt19937_64 rng(seed);
  Dataset d;
  d.n_attributes = n_attributes;
  d.attribute_labels.resize(static_cast<std::size_t>(n_attributes));
  std::iota(d.attribute_labels.begin(), d.attribute_labels.end(), 1L);
  d.transactions.assign(static_cast<std::size_t>(n_transactions),
                        Transaction(static_cast<std::size_t>(n_attributes), 0));

  switch (kind) {
    case GeneratorKind::independent: {
      std::vector<double> freq(static_cast<std::size_t>(n_attributes));
      for (auto& f : freq) f = detail::uniform01(rng);
      for (auto& t : d.transactions)
        for (int i = 0; i < n_attributes; ++i)
          t[static_cast<std::size_t>(i)] = detail::uniform01(rng) < freq[static_cast<std::size_t>(i)];
      break;
    }
    case GeneratorKind::clusters: {
      const int low_cluster_rows = (n_transactions + 1) / 2;
      for (int r = 0; r < n_transactions; ++r) {
        const double f = r < low_cluster_rows ? 0.25 : 0.75;
        auto& t = d.transactions[static_cast<std::size_t>(r)];
        for (int i = 0; i < n_attributes; ++i) t[static_cast<std::size_t>(i)] = detail::uniform01(rng) < f;
      }
      break;
    }
    case GeneratorKind::markov: {
      for (auto& t : d.transactions) {
        t[0] = detail::uniform01(rng) < 0.5;
        for (int i = 1; i < n_attributes; ++i) {
          const bool invert = detail::uniform01(rng) < 0.25;
          t[static_cast<std::size_t>(i)] =
              static_cast<std::uint8_t>(invert ? !t[static_cast<std::size_t>(i - 1)]
                                               : t[static_cast<std::size_t>(i - 1)]);
        }
      }
      break;
    }
  }
  return d;
}

/// Uniform random partition without replacement. The train side gets
/// floor(fraction * |D|) rows; both sides keep the original row order.
inline SplitPair split(const Dataset& d, double fraction, std::uint64_t seed) {
  if (d.size() < 2) throw DataError("split requires at least 2 transactions");
  if (!(fraction > 0.0 && fraction < 1.0)) throw DataError("split fraction must be in (0,1)");
  const std::size_t n = d.size();
  const std::size_t n_train = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train == n) throw DataError("split fraction yields an empty side");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = detail::uniform_index(rng, i + 1);
    std::swap(order[i], order[j]);
  }

  std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test_idx(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  SplitPair pair;
  pair.seed = seed;
  for (Dataset* side : {&pair.train, &pair.test}) {
    side->n_attributes = d.n_attributes;
    side->attribute_labels = d.attribute_labels;
  }
  pair.train.transactions.reserve(train_idx.size());
  pair.test.transactions.reserve(test_idx.size());
  for (std::size_t i : train_idx) pair.train.transactions.push_back(d.transactions[i]);
  for (std::size_t i : test_idx) pair.test.transactions.push_back(d.transactions[i]);
  return pair;
}

/// Empirical frequency of each attribute: m_i = |{t : t_i = 1}| / |D|.
inline std::vector<double> column_margins(const Dataset& d) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(d.n_attributes), 0);
  for (const auto& t : d.transactions)
    for (int i = 0; i < d.n_attributes; ++i)
      if (t[static_cast<std::size_t>(i)]) ++counts[static_cast<std::size_t>(i)];
  std::vector<double> margins(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i)
    margins[i] = static_cast<double>(counts[i]) / static_cast<double>(d.size());
  return margins;
}

/// Drops every attribute whose margin is below min_freq. Survivor order is
/// unchanged; transactions are re-projected onto the surviving attributes.
inline Dataset prune_rare_items(const Dataset& d, double min_freq) {
  const auto margins = column_margins(d);
  std::vector<int> keep;
  for (int i = 0; i < d.n_attributes; ++i)
    if (margins[static_cast<std::size_t>(i)] >= min_freq) keep.push_back(i);
  if (keep.empty()) throw DataError("pruning removed every item");

  Dataset out;
  out.n_attributes = static_cast<int>(keep.size());
  for (int i : keep) out.attribute_labels.push_back(d.attribute_labels[static_cast<std::size_t>(i)]);
  out.transactions.reserve(d.size());
  for (const auto& t : d.transactions) {
    Transaction row(keep.size());
    for (std::size_t j = 0; j < keep.size(); ++j) row[j] = t[static_cast<std::size_t>(keep[j])];
    out.transactions.push_back(std::move(row));
  }
  return out;
}

/// Removes all-zero transactions. Fails if nothing remains.
inline Dataset drop_empty_transactions(const Dataset& d) {
  Dataset out;
  out.n_attributes = d.n_attributes;
  out.attribute_labels = d.attribute_labels;
  for (const auto& t : d.transactions)
    if (std::any_of(t.begin(), t.end(), [](std::uint8_t b) { return b != 0; }))
      out.transactions.push_back(t);
  if (out.transactions.empty()) throw DataError("all transactions are empty");
  return out;
}

/// Average number of ones per transaction.
inline double mean_row_margin(const Dataset& d) {
  std::size_t total = 0;
  for (const auto& t : d.transactions)
    total += static_cast<std::size_t>(std::count(t.begin(), t.end(), std::uint8_t{1}));
  return static_cast<double>(total) / static_cast<double>(d.size());
}

}  // namespace entrank
