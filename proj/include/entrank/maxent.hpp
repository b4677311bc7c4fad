#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "entrank/dataset.hpp"
#include "entrank/indep_dp.hpp"
#include "entrank/statistics.hpp"

namespace entrank {

/// Fit targets: column margins m_i plus the bucket frequencies n_k of one
/// statistic. Feasibility is the caller's responsibility; targets taken from
/// a dataset via from_dataset are always feasible.
struct Constraints {
  std::vector<double> column_margins;
  Statistic stat;
  std::vector<double> stat_targets;   // size stat.k_max() + 1, sums to 1
  std::size_t n_observations = 0;     // |D| behind the targets; 0 = unknown

  static Constraints from_dataset(const Dataset& d, const Statistic& stat) {
    Constraints c;
    c.column_margins = ::entrank::column_margins(d);
    c.stat = stat;
    c.stat_targets = empirical_histogram(d, stat).counts;
    c.n_observations = d.size();
    return c;
  }
};

struct FitConfig {
  double tolerance = 1e-6;
  int max_sweeps = 1000;
  /// Margins are pulled into [delta, 1-delta] before fitting; 0 means derive
  /// delta = 1/(2 |D|) from the constraints (1e-9 when |D| is unknown).
  double margin_clamp = 0.0;
  /// Alternative handling of margins of exactly 0 or 1: pin q_i to the exact
  /// value and drop the attribute from the update loop instead of clamping.
  bool exclude_degenerate = false;
  /// Use the O(N)-per-attribute backward/forward ones-count updates when
  /// fitting the untruncated row-margin statistic.
  bool accelerate_row_margins = true;
};

struct FitDiagnostics {
  int sweeps = 0;
  double max_residual = std::numeric_limits<double>::infinity();
  bool converged = false;
};

/// A bucket demanded by the targets carries no mass under the current
/// independence component, so no scaling update can reach it.
class InfeasibleBucketError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Maximum-entropy model over transactions: an independence component q
/// reweighted per statistic bucket,
///   p(A = t) = bucket_weight[S(t)] / bucket_norm * q(A = t).
/// Buckets whose target frequency is zero keep weight zero; transactions in
/// them have probability zero. A fitted model is immutable and can be
/// queried from multiple threads.
struct MaxEntModel {
  IndependenceParams indep;            // q_i
  std::vector<double> bucket_weight;   // v_k, one per statistic bucket
  double bucket_norm = 1.0;            // z_r
  Constraints constraints;             // targets as used by the fit (post-clamp)
  FitDiagnostics diagnostics;
  StatDistribution indep_bucket;       // q(S(A) = k), cached for the fitted q

  int n_attributes() const { return indep.n_attributes(); }
  int n_buckets() const { return static_cast<int>(bucket_weight.size()); }
};

namespace detail {

inline double dot(const std::vector<double>& w, const std::vector<double>& d) {
  double s = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) s += w[k] * d[k];
  return s;
}

/// Rescales the odds of q so that an attribute currently at probability
/// `current` under the model lands on `target`:
///   c = target (1-current) / ((1-target) current),  q' / (1-q') = c q / (1-q).
inline double rescale_success_prob(double q, double target, double current) {
  constexpr double kLo = 1e-12;
  constexpr double kHi = 1.0 - 1e-12;
  current = std::clamp(current, 1e-15, 1.0 - 1e-15);
  const double c = target * (1.0 - current) / ((1.0 - target) * current);
  const double out = q * c / (1.0 - (1.0 - c) * q);
  return std::clamp(out, kLo, kHi);
}

inline void validate_constraints(const Constraints& cons) {
  const int n = cons.stat.n_attributes();
  if (static_cast<int>(cons.column_margins.size()) != n)
    throw std::invalid_argument("fit: margin count does not match the statistic");
  if (cons.stat_targets.size() != static_cast<std::size_t>(cons.stat.k_max()) + 1)
    throw std::invalid_argument("fit: target count does not match the statistic range");
  double sum = 0.0;
  for (double t : cons.stat_targets) {
    if (!(t >= 0.0)) throw std::invalid_argument("fit: negative bucket target");
    sum += t;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw std::invalid_argument("fit: bucket targets do not sum to 1");
  for (double m : cons.column_margins)
    if (!(m >= 0.0 && m <= 1.0)) throw std::invalid_argument("fit: margin outside [0,1]");
}

}  // namespace detail

/// Expected frequency of an itemset under the model:
///   p(X = 1) = sum_k v_k / z_r * q(X = 1) * q(S(A) = k | X = 1),
/// with the conditional computed by clamping the members of X to 1. The
/// empty itemset has frequency 1.
inline double query_itemset(const MaxEntModel& m, std::vector<int> itemset) {
  for (int j : itemset)
    if (j < 0 || j >= m.n_attributes())
      throw std::invalid_argument("query_itemset: unknown attribute index");
  std::sort(itemset.begin(), itemset.end());
  itemset.erase(std::unique(itemset.begin(), itemset.end()), itemset.end());
  if (itemset.empty()) return 1.0;

  double y = 1.0;
  for (int j : itemset) y *= m.indep.probs[static_cast<std::size_t>(j)];
  if (y == 0.0) return 0.0;
  const StatDistribution cond = conditional_dist(m.indep, m.constraints.stat, itemset);
  return y * detail::dot(m.bucket_weight, cond.probs) / m.bucket_norm;
}

/// The fitted bucket distribution r(k) = v_k q(S = k) / z_r.
inline StatDistribution model_bucket_probs(const MaxEntModel& m) {
  StatDistribution r;
  r.probs.resize(m.bucket_weight.size());
  for (std::size_t k = 0; k < r.probs.size(); ++k)
    r.probs[k] = m.bucket_weight[k] * m.indep_bucket.probs[k] / m.bucket_norm;
  return r;
}

/// Probability of one full transaction, r(S(t)) * q(t) / q(S(A) = S(t)).
/// Exactly zero whenever the transaction's bucket has zero target mass.
inline double transaction_prob(const MaxEntModel& m, const Transaction& t) {
  if (static_cast<int>(t.size()) != m.n_attributes())
    throw std::invalid_argument("transaction_prob: wrong transaction length");
  const int k = m.constraints.stat.evaluate(t);
  if (m.constraints.stat_targets[static_cast<std::size_t>(k)] == 0.0) return 0.0;
  double q_t = 1.0;
  for (std::size_t i = 0; i < t.size(); ++i)
    q_t *= t[i] ? m.indep.probs[i] : 1.0 - m.indep.probs[i];
  return m.bucket_weight[static_cast<std::size_t>(k)] / m.bucket_norm * q_t;
}

/// Iterative scaling. Each sweep first rescales every q_i so the model
/// margin matches its target exactly given the other parameters, then
/// rescales the bucket weights onto the target bucket distribution, then
/// checks the worst constraint residual. Either update is an exact
/// single-constraint projection, so the training likelihood never decreases
/// across sweeps. Returns the model with diagnostics; a fit that exhausts
/// max_sweeps is returned with converged = false rather than thrown.
inline MaxEntModel fit(const Constraints& raw, const FitConfig& config = {}) {
  detail::validate_constraints(raw);
  if (!(config.tolerance > 0.0)) throw std::invalid_argument("fit: tolerance must be positive");
  if (config.max_sweeps < 1) throw std::invalid_argument("fit: max_sweeps must be >= 1");

  const int n = raw.stat.n_attributes();
  const Statistic& stat = raw.stat;
  const std::size_t n_buckets = raw.stat_targets.size();

  double delta = config.margin_clamp;
  if (delta <= 0.0)
    delta = raw.n_observations > 0
                ? std::min(0.5 / static_cast<double>(raw.n_observations), 0.25)
                : 1e-9;
  if (!(delta > 0.0 && delta < 0.5)) throw std::invalid_argument("fit: margin clamp outside (0, 0.5)");

  MaxEntModel model;
  model.constraints = raw;
  auto& margins = model.constraints.column_margins;
  std::vector<char> active(static_cast<std::size_t>(n), 1);
  model.indep.probs.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const std::size_t ii = static_cast<std::size_t>(i);
    if (config.exclude_degenerate && (margins[ii] <= 0.0 || margins[ii] >= 1.0)) {
      active[ii] = 0;
      model.indep.probs[ii] = margins[ii] >= 1.0 ? 1.0 : 0.0;
    } else {
      margins[ii] = std::clamp(margins[ii], delta, 1.0 - delta);
      model.indep.probs[ii] = margins[ii];
    }
  }
  const auto& targets = model.constraints.stat_targets;
  model.bucket_weight.assign(n_buckets, 0.0);
  for (std::size_t k = 0; k < n_buckets; ++k) model.bucket_weight[k] = targets[k] > 0.0 ? 1.0 : 0.0;

  auto& q = model.indep;
  auto& v = model.bucket_weight;
  StatDistribution q_dist = stat_dist(q, stat);
  double z = detail::dot(v, q_dist.probs);

  const bool margins_fast = config.accelerate_row_margins &&
                            stat.kind() == StatKind::row_margins && stat.k_max() == n;

  for (int sweep = 1; sweep <= config.max_sweeps; ++sweep) {
    for (int i = 0; i < n; ++i) {
      const std::size_t ii = static_cast<std::size_t>(i);
      if (!active[ii]) continue;

      if (margins_fast) {
        // Backward step, falling back to a from-scratch pass when the
        // subtraction in the backward recurrence is cancellation-prone.
        StatDistribution removed;
        bool unstable = q.probs[ii] > 1.0 - 1e-6;
        if (!unstable) {
          removed = row_margin_remove(q_dist, q, i);
          for (double x : removed.probs)
            if (x < -1e-9) { unstable = true; break; }
        }
        if (unstable) {
          IndependenceParams rest;
          rest.probs.reserve(static_cast<std::size_t>(n) - 1);
          for (int j = 0; j < n; ++j)
            if (j != i) rest.probs.push_back(q.probs[static_cast<std::size_t>(j)]);
          removed = row_margin_dist(rest, n - 1);
        }
        for (double& x : removed.probs) x = std::max(x, 0.0);

        // q(ones = k | a_i = 1) is the removed distribution shifted up by one
        double weighted = 0.0;
        for (std::size_t k = 0; k + 1 < v.size(); ++k) weighted += v[k + 1] * removed.probs[k];
        const double d = q.probs[ii] * weighted / z;
        q.probs[ii] = detail::rescale_success_prob(q.probs[ii], margins[ii], d);
        q_dist = row_margin_add(removed, q.probs[ii]);
      } else {
        const StatDistribution cond = conditional_dist(q, stat, {i});
        const double d = q.probs[ii] * detail::dot(v, cond.probs) / z;
        q.probs[ii] = detail::rescale_success_prob(q.probs[ii], margins[ii], d);
        q_dist = stat_dist(q, stat);
      }
      z = detail::dot(v, q_dist.probs);
    }

    if (margins_fast) q_dist = stat_dist(q, stat);  // shed incremental drift

    // Bucket step: v_k <- n_k / q(S = k) lands r on the targets exactly.
    for (std::size_t k = 0; k < n_buckets; ++k) {
      if (targets[k] <= 0.0) continue;
      if (q_dist.probs[k] <= 0.0)
        throw InfeasibleBucketError("fit: bucket " + std::to_string(k) +
                                    " has target mass but zero model probability");
      v[k] = targets[k] / q_dist.probs[k];
    }
    z = detail::dot(v, q_dist.probs);

    double residual = 0.0;
    for (std::size_t k = 0; k < n_buckets; ++k)
      residual = std::max(residual, std::abs(v[k] * q_dist.probs[k] / z - targets[k]));
    for (int i = 0; i < n; ++i) {
      const std::size_t ii = static_cast<std::size_t>(i);
      if (!active[ii]) continue;
      const StatDistribution cond = conditional_dist(q, stat, {i});
      const double margin = q.probs[ii] * detail::dot(v, cond.probs) / z;
      residual = std::max(residual, std::abs(margin - margins[ii]));
    }

    model.diagnostics.sweeps = sweep;
    model.diagnostics.max_residual = residual;
    if (residual <= config.tolerance) {
      model.diagnostics.converged = true;
      break;
    }
  }

  model.indep_bucket = stat_dist(q, stat);
  model.bucket_norm = detail::dot(v, model.indep_bucket.probs);
  return model;
}

/// Versioned text form:
///   maxent-v1 <N> <K> <statistic>
///   q_i            (N lines)
///   v_k            (K+1 lines)
///   z_r
///   m_i            (N lines)
///   n_k            (K+1 lines)
///   diag <sweeps> <max_residual> <converged> <n_observations>
/// All reals carry 17 significant digits, enough to round-trip doubles
/// exactly.
inline void serialize(const MaxEntModel& m, std::ostream& out) {
  out << std::setprecision(17);
  const int n = m.n_attributes();
  const int k_max = m.n_buckets() - 1;
  out << "maxent-v1 " << n << ' ' << k_max << ' ' << m.constraints.stat.token() << '\n';
  for (double x : m.indep.probs) out << x << '\n';
  for (double x : m.bucket_weight) out << x << '\n';
  out << m.bucket_norm << '\n';
  for (double x : m.constraints.column_margins) out << x << '\n';
  for (double x : m.constraints.stat_targets) out << x << '\n';
  out << "diag " << m.diagnostics.sweeps << ' ' << m.diagnostics.max_residual << ' '
      << (m.diagnostics.converged ? 1 : 0) << ' ' << m.constraints.n_observations << '\n';
}

inline std::string serialize(const MaxEntModel& m) {
  std::ostringstream out;
  serialize(m, out);
  return out.str();
}

inline MaxEntModel deserialize(std::istream& in) {
  std::string magic;
  if (!(in >> magic)) throw DataError("model file: empty input");
  if (magic != "maxent-v1")
    throw DataError("model file: version mismatch (expected maxent-v1, got '" + magic + "')");
  int n = 0, k_max = 0;
  std::string stat_token;
  if (!(in >> n >> k_max >> stat_token) || n < 0 || k_max < 0)
    throw DataError("model file: malformed header");

  MaxEntModel m;
  try {
    m.constraints.stat = Statistic::from_token(stat_token, n, k_max);
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
  if (m.constraints.stat.k_max() != k_max)
    throw DataError("model file: bucket count does not match the statistic");

  const auto read_reals = [&in](std::size_t count, std::vector<double>& dst, const char* what) {
    dst.resize(count);
    for (std::size_t i = 0; i < count; ++i)
      if (!(in >> dst[i])) throw DataError(std::string("model file: truncated ") + what);
  };
  read_reals(static_cast<std::size_t>(n), m.indep.probs, "parameters");
  read_reals(static_cast<std::size_t>(k_max) + 1, m.bucket_weight, "bucket weights");
  if (!(in >> m.bucket_norm)) throw DataError("model file: truncated normalizer");
  read_reals(static_cast<std::size_t>(n), m.constraints.column_margins, "margins");
  read_reals(static_cast<std::size_t>(k_max) + 1, m.constraints.stat_targets, "targets");

  std::string tag;
  if (!(in >> tag) || tag != "diag") throw DataError("model file: missing diagnostics record");
  int converged = 0;
  if (!(in >> m.diagnostics.sweeps >> m.diagnostics.max_residual >> converged >>
        m.constraints.n_observations))
    throw DataError("model file: truncated diagnostics record");
  m.diagnostics.converged = converged != 0;

  m.indep_bucket = stat_dist(m.indep, m.constraints.stat);
  return m;
}

inline MaxEntModel deserialize(const std::string& text) {
  std::istringstream in(text);
  return deserialize(in);
}

}  // namespace entrank
