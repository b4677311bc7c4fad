#pragma once

#include <bit>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "entrank/dataset.hpp"

namespace entrank {

/// Number of ones in a transaction.
inline int ones_count(const Transaction& t) {
  int n = 0;
  for (std::uint8_t b : t) n += b;
  return n;
}

/// min(ones_count(t), cap).
inline int ones_count_cut(const Transaction& t, int cap) {
  if (cap < 0) throw std::invalid_argument("ones_count_cut: cap must be non-negative");
  const int n = ones_count(t);
  return n < cap ? n : cap;
}

/// 1-based positions of the first and last one; (0,0) for an all-zero
/// transaction.
inline std::pair<int, int> transaction_bounds(const Transaction& t) {
  int first = 0;
  int last = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!t[i]) continue;
    if (first == 0) first = static_cast<int>(i) + 1;
    last = static_cast<int>(i) + 1;
  }
  return {first, last};
}

/// Number of zeros strictly between the first and last one; 0 when the
/// transaction has fewer than two ones. A count of 0 is the consecutive-ones
/// property.
inline int lazarus_count(const Transaction& t) {
  const auto [first, last] = transaction_bounds(t);
  if (first == 0) return 0;
  int ones = 0;
  for (int i = first - 1; i < last; ++i) ones += t[static_cast<std::size_t>(i)];
  return (last - first + 1) - ones;
}

/// Packs two statistic values into one: s1 + (k1_max + 1) * s2. Injective on
/// [0, k1_max] x [0, s2_max].
inline long joint_encode(long s1, long s2, long k1_max) {
  if (s1 < 0 || s1 > k1_max) throw std::out_of_range("joint_encode: s1 outside [0, k1_max]");
  if (s2 < 0) throw std::out_of_range("joint_encode: s2 must be non-negative");
  return s1 + (k1_max + 1) * s2;
}

inline std::pair<long, long> joint_decode(long code, long k1_max) {
  if (code < 0) throw std::out_of_range("joint_decode: negative code");
  return {code % (k1_max + 1), code / (k1_max + 1)};
}

enum class StatKind { constant, row_margins, lazarus, bounds_joint, joint };

/// An integer-valued function of a transaction with a known value range
/// [0, k_max]. Instances are immutable and cheap to copy.
///
/// Kinds:
///  - constant:     every transaction maps to 0 (k_max = 0);
///  - row_margins:  number of ones, optionally cut at a truncation cap;
///  - lazarus:      zeros strictly inside the span of ones, range 0..N-2;
///  - bounds_joint: (first, last) positions packed as first + (N+1)*last.
///    Only (0,0) and 0 < first <= last are attainable; the remaining codes
///    of the (N+1)^2 space permanently carry zero mass;
///  - joint:        two sub-statistics packed with joint_encode.
class Statistic {
 public:
  Statistic() : Statistic(StatKind::constant, 0, -1, nullptr, nullptr) {}

  static Statistic constant(int n_attributes) {
    return Statistic(StatKind::constant, n_attributes, -1, nullptr, nullptr);
  }
  /// truncation < 0 means untruncated (k_max = N).
  static Statistic row_margins(int n_attributes, int truncation = -1) {
    if (truncation > n_attributes)
      throw std::invalid_argument("row_margins: truncation exceeds attribute count");
    return Statistic(StatKind::row_margins, n_attributes, truncation, nullptr, nullptr);
  }
  static Statistic lazarus(int n_attributes) {
    return Statistic(StatKind::lazarus, n_attributes, -1, nullptr, nullptr);
  }
  static Statistic bounds_joint(int n_attributes) {
    return Statistic(StatKind::bounds_joint, n_attributes, -1, nullptr, nullptr);
  }
  static Statistic joint(const Statistic& s1, const Statistic& s2) {
    if (s1.n_attributes() != s2.n_attributes())
      throw std::invalid_argument("joint: component attribute counts differ");
    return Statistic(StatKind::joint, s1.n_attributes(), -1,
                     std::make_shared<Statistic>(s1), std::make_shared<Statistic>(s2));
  }

  StatKind kind() const { return kind_; }
  int n_attributes() const { return n_; }
  int truncation() const { return trunc_; }
  const Statistic& first_component() const { return *a_; }
  const Statistic& second_component() const { return *b_; }

  /// Largest attainable encoded value.
  int k_max() const {
    switch (kind_) {
      case StatKind::constant: return 0;
      case StatKind::row_margins: return trunc_ >= 0 ? trunc_ : n_;
      case StatKind::lazarus: return n_ >= 2 ? n_ - 2 : 0;
      case StatKind::bounds_joint: return n_ + (n_ + 1) * n_;
      case StatKind::joint:
        return static_cast<int>(
            joint_encode(a_->k_max(), b_->k_max(), a_->k_max()));
    }
    return 0;
  }

  int evaluate(const Transaction& t) const {
    switch (kind_) {
      case StatKind::constant: return 0;
      case StatKind::row_margins:
        return trunc_ >= 0 ? ones_count_cut(t, trunc_) : ones_count(t);
      case StatKind::lazarus: return lazarus_count(t);
      case StatKind::bounds_joint: {
        const auto [first, last] = transaction_bounds(t);
        return static_cast<int>(joint_encode(first, last, n_));
      }
      case StatKind::joint:
        return static_cast<int>(
            joint_encode(a_->evaluate(t), b_->evaluate(t), a_->k_max()));
    }
    return 0;
  }

  /// evaluate() on a transaction packed as a bit mask (attribute i = bit i).
  /// Valid for n_attributes <= 31.
  int evaluate_mask(std::uint32_t mask) const {
    switch (kind_) {
      case StatKind::constant: return 0;
      case StatKind::row_margins: {
        const int n = std::popcount(mask);
        return trunc_ >= 0 && n > trunc_ ? trunc_ : n;
      }
      case StatKind::lazarus: {
        if (mask == 0) return 0;
        const int first = std::countr_zero(mask) + 1;
        const int last = std::bit_width(mask);
        return (last - first + 1) - std::popcount(mask);
      }
      case StatKind::bounds_joint: {
        const int first = mask ? std::countr_zero(mask) + 1 : 0;
        const int last = mask ? static_cast<int>(std::bit_width(mask)) : 0;
        return static_cast<int>(joint_encode(first, last, n_));
      }
      case StatKind::joint:
        return static_cast<int>(
            joint_encode(a_->evaluate_mask(mask), b_->evaluate_mask(mask), a_->k_max()));
    }
    return 0;
  }

  /// Canonical text name, also used by the CLI and the model file format.
  std::string token() const {
    switch (kind_) {
      case StatKind::constant: return "independence";
      case StatKind::row_margins: return "margins";
      case StatKind::lazarus: return "lazarus";
      case StatKind::bounds_joint: return "bounds";
      case StatKind::joint: return "joint(" + a_->token() + "," + b_->token() + ")";
    }
    return "?";
  }

  /// Inverse of token(). k_max_hint, when >= 0, restores a row-margin
  /// truncation that the bare token cannot carry.
  static Statistic from_token(std::string_view token, int n_attributes, int k_max_hint = -1) {
    if (token == "independence" || token == "constant") return constant(n_attributes);
    if (token == "margins") {
      const int trunc = (k_max_hint >= 0 && k_max_hint < n_attributes) ? k_max_hint : -1;
      return row_margins(n_attributes, trunc);
    }
    if (token == "lazarus") return lazarus(n_attributes);
    if (token == "bounds") return bounds_joint(n_attributes);
    if (token.size() > 7 && token.substr(0, 6) == "joint(" && token.back() == ')') {
      const std::string_view inner = token.substr(6, token.size() - 7);
      int depth = 0;
      for (std::size_t i = 0; i < inner.size(); ++i) {
        if (inner[i] == '(') ++depth;
        else if (inner[i] == ')') --depth;
        else if (inner[i] == ',' && depth == 0)
          return joint(from_token(inner.substr(0, i), n_attributes),
                       from_token(inner.substr(i + 1), n_attributes));
      }
    }
    throw std::invalid_argument("unknown statistic token: " + std::string(token));
  }

  friend bool operator==(const Statistic& x, const Statistic& y) {
    if (x.kind_ != y.kind_ || x.n_ != y.n_ || x.trunc_ != y.trunc_) return false;
    if (x.kind_ != StatKind::joint) return true;
    return *x.a_ == *y.a_ && *x.b_ == *y.b_;
  }

 private:
  Statistic(StatKind kind, int n, int trunc, std::shared_ptr<const Statistic> a,
            std::shared_ptr<const Statistic> b)
      : kind_(kind), n_(n), trunc_(trunc), a_(std::move(a)), b_(std::move(b)) {
    if (n_ < 0) throw std::invalid_argument("Statistic: negative attribute count");
  }

  StatKind kind_;
  int n_;
  int trunc_;
  std::shared_ptr<const Statistic> a_, b_;
};

/// Empirical bucket frequencies n_k = |{t in D : S(t) = k}| / |D|.
struct StatHistogram {
  std::vector<double> counts;  // size k_max + 1, sums to 1
};

inline StatHistogram empirical_histogram(const Dataset& d, const Statistic& stat) {
  if (stat.n_attributes() != d.n_attributes)
    throw std::invalid_argument("empirical_histogram: attribute count mismatch");
  std::vector<std::size_t> counts(static_cast<std::size_t>(stat.k_max()) + 1, 0);
  for (const auto& t : d.transactions) ++counts[static_cast<std::size_t>(stat.evaluate(t))];
  StatHistogram h;
  h.counts.resize(counts.size());
  for (std::size_t k = 0; k < counts.size(); ++k)
    h.counts[k] = static_cast<double>(counts[k]) / static_cast<double>(d.size());
  return h;
}

}  // namespace entrank
