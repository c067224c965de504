#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "superinfo/joint.hpp"
#include "superinfo/rng.hpp"

namespace superinfo {
namespace detail {

/// Neumaier compensated accumulator; the information identities below are
/// contracted to 1e-10..1e-12 residuals, which plain summation only meets on
/// friendly inputs.
struct Accum {
  double sum = 0.0;
  double comp = 0.0;
  void add(double x) {
    const double t = sum + x;
    comp += (std::abs(sum) >= std::abs(x)) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

inline double xlogx(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

/// Resolves a set of variable names to indices; rejects empty sets and
/// duplicates within the set.
inline std::vector<size_t> resolve_set(const JointDistribution& j,
                                       const std::vector<std::string>& names) {
  if (names.empty()) throw DomainError("variable set must be non-empty");
  std::vector<size_t> idx;
  idx.reserve(names.size());
  for (const auto& n : names) {
    size_t i = j.var_index(n);
    for (size_t prev : idx)
      if (prev == i) throw DomainError("variable '" + n + "' repeated within a set");
    idx.push_back(i);
  }
  return idx;
}

inline void require_disjoint(const std::vector<std::vector<size_t>>& sets,
                             const char* what) {
  for (size_t a = 0; a < sets.size(); ++a)
    for (size_t b = a + 1; b < sets.size(); ++b)
      for (size_t i : sets[a])
        for (size_t k : sets[b])
          if (i == k) throw DomainError(std::string(what) + ": variable sets overlap");
}

inline double entropy_of_marginal(const std::vector<double>& m) {
  Accum acc;
  for (double p : m) acc.add(-xlogx(p));
  return acc.value();
}

inline std::vector<size_t> concat_sets(const std::vector<size_t>& a,
                                       const std::vector<size_t>& b) {
  std::vector<size_t> out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

inline double entropy_idx(const JointDistribution& j, const std::vector<size_t>& idx) {
  return entropy_of_marginal(j.marginal(idx));
}

/// I(A;B) as a direct sum of p(ab)·ln(p(ab)/(p(a)p(b))). Raw: may come out a
/// hair negative from rounding; callers clamp at the public boundary.
inline double mutual_info_raw_idx(const JointDistribution& j, const std::vector<size_t>& a,
                                  const std::vector<size_t>& b) {
  const std::vector<double> pa = j.marginal(a);
  const std::vector<double> pb = j.marginal(b);
  const std::vector<double> pab = j.marginal(concat_sets(a, b));
  const size_t nb = pb.size();
  Accum acc;
  for (size_t ia = 0; ia < pa.size(); ++ia) {
    for (size_t ib = 0; ib < nb; ++ib) {
      const double p = pab[ia * nb + ib];
      if (p > 0.0) acc.add(p * std::log(p / (pa[ia] * pb[ib])));
    }
  }
  return acc.value();
}

/// I(A;B|C) as a direct sum of p(abc)·ln(p(abc)p(c)/(p(ac)p(bc))).
inline double conditional_mi_raw_idx(const JointDistribution& j, const std::vector<size_t>& a,
                                     const std::vector<size_t>& b,
                                     const std::vector<size_t>& c) {
  const std::vector<double> pc = j.marginal(c);
  const std::vector<double> pac = j.marginal(concat_sets(a, c));
  const std::vector<double> pbc = j.marginal(concat_sets(b, c));
  const std::vector<double> pabc = j.marginal(concat_sets(concat_sets(a, b), c));
  size_t na = 1, nb = 1, nc = 1;
  for (size_t i : a) na *= j.variables()[i].cardinality;
  for (size_t i : b) nb *= j.variables()[i].cardinality;
  for (size_t i : c) nc *= j.variables()[i].cardinality;
  Accum acc;
  for (size_t ia = 0; ia < na; ++ia) {
    for (size_t ib = 0; ib < nb; ++ib) {
      for (size_t ic = 0; ic < nc; ++ic) {
        const double p = pabc[(ia * nb + ib) * nc + ic];
        if (p > 0.0) {
          acc.add(p * std::log(p * pc[ic] / (pac[ia * nc + ic] * pbc[ib * nc + ic])));
        }
      }
    }
  }
  return acc.value();
}

constexpr double kMiNegativeTol = 1e-12;

inline double clamp_mi(double raw, const char* what) {
  if (raw < -kMiNegativeTol) {
    throw NumericError(std::string(what) + " came out " + std::to_string(raw) +
                       "; exceeds the -1e-12 rounding allowance");
  }
  return raw < 0.0 ? 0.0 : raw;
}

}  // namespace detail

/// H over the marginal of the named variables, in nats; 0·log 0 ≡ 0.
inline double entropy(const JointDistribution& j, const std::vector<std::string>& vars) {
  return detail::entropy_idx(j, detail::resolve_set(j, vars));
}

/// Exact I(A;B) in nats; tiny negative rounding is clamped to 0.
inline double mutual_info(const JointDistribution& j, const std::vector<std::string>& a,
                          const std::vector<std::string>& b) {
  auto ia = detail::resolve_set(j, a);
  auto ib = detail::resolve_set(j, b);
  detail::require_disjoint({ia, ib}, "mutual_info");
  return detail::clamp_mi(detail::mutual_info_raw_idx(j, ia, ib), "mutual_info");
}

/// Exact I(A;B|C) in nats; tiny negative rounding is clamped to 0.
inline double conditional_mi(const JointDistribution& j, const std::vector<std::string>& a,
                             const std::vector<std::string>& b,
                             const std::vector<std::string>& c) {
  auto ia = detail::resolve_set(j, a);
  auto ib = detail::resolve_set(j, b);
  auto ic = detail::resolve_set(j, c);
  detail::require_disjoint({ia, ib, ic}, "conditional_mi");
  return detail::clamp_mi(detail::conditional_mi_raw_idx(j, ia, ib, ic), "conditional_mi");
}

/// Three-way interaction information I(A;B;C) = I(B;C) − I(B;C|A), computed
/// through the order-symmetric entropy expansion
///   H(A)+H(B)+H(C) − H(AB) − H(AC) − H(BC) + H(ABC)
/// so that every argument ordering yields the same value. May be negative
/// (synergy, e.g. XOR) or positive (redundancy).
inline double interaction_info(const JointDistribution& j, const std::vector<std::string>& a,
                               const std::vector<std::string>& b,
                               const std::vector<std::string>& c) {
  auto ia = detail::resolve_set(j, a);
  auto ib = detail::resolve_set(j, b);
  auto ic = detail::resolve_set(j, c);
  detail::require_disjoint({ia, ib, ic}, "interaction_info");
  using detail::concat_sets;
  using detail::entropy_idx;
  return entropy_idx(j, ia) + entropy_idx(j, ib) + entropy_idx(j, ic) -
         entropy_idx(j, concat_sets(ia, ib)) - entropy_idx(j, concat_sets(ia, ic)) -
         entropy_idx(j, concat_sets(ib, ic)) +
         entropy_idx(j, concat_sets(concat_sets(ia, ib), ic));
}

/// Split of I(input; repr) into a predictive part I(other; repr) and a
/// superfluous part I(input; repr | other). The split is exact (residual at
/// rounding level) whenever repr is generated conditionally on input alone;
/// a violated assumption shows up as a large residual, never as an error.
struct DecompositionReport {
  double total;        // I(input; repr)
  double predictive;   // I(other; repr)
  double superfluous;  // I(input; repr | other)
  double residual;     // |total − predictive − superfluous|
};

inline DecompositionReport decompose_predictive_superfluous(
    const JointDistribution& j, const std::vector<std::string>& input,
    const std::vector<std::string>& other, const std::vector<std::string>& repr) {
  auto ii = detail::resolve_set(j, input);
  auto io = detail::resolve_set(j, other);
  auto ir = detail::resolve_set(j, repr);
  detail::require_disjoint({ii, io, ir}, "decompose_predictive_superfluous");
  DecompositionReport rep{};
  rep.total = detail::mutual_info_raw_idx(j, ii, ir);
  rep.predictive = detail::mutual_info_raw_idx(j, io, ir);
  rep.superfluous = detail::conditional_mi_raw_idx(j, ii, ir, io);
  rep.residual = std::abs(rep.total - rep.predictive - rep.superfluous);
  return rep;
}

/// Checks whether z1 keeps all of v1's information about v2:
/// gap = I(v1;v2) − I(z1;v2). For any z1 generated from v1 the data
/// processing inequality keeps the gap non-negative up to rounding.
struct SufficiencyReport {
  bool is_sufficient;
  double gap;  // nats
};

inline SufficiencyReport sufficiency_check(const JointDistribution& j,
                                           const std::vector<std::string>& v1,
                                           const std::vector<std::string>& v2,
                                           const std::vector<std::string>& z1, double tol) {
  auto i1 = detail::resolve_set(j, v1);
  auto i2 = detail::resolve_set(j, v2);
  auto iz = detail::resolve_set(j, z1);
  detail::require_disjoint({i1, i2, iz}, "sufficiency_check");
  const double gap =
      detail::mutual_info_raw_idx(j, i1, i2) - detail::mutual_info_raw_idx(j, iz, i2);
  return SufficiencyReport{gap <= tol, gap};
}

/// Bayes-error upper bounds on predicting label T from a representation.
/// All three bounds pass through Γ(x) = min{max{x, 0}, 1 − 1/|T|}.
struct BayesBoundReport {
  double entropy_T;         // nats
  double general_bound;     // any representation of v1
  double sufficient_bound;  // representation keeping all of v1's view information
  double minimal_bound;     // minimal sufficient representation
  uint64_t cardinality_T;
};

inline double bayes_gamma(double x, uint64_t card_T) {
  const double hi = 1.0 - 1.0 / static_cast<double>(card_T);
  return std::min(std::max(x, 0.0), hi);
}

inline BayesBoundReport bayes_bounds(const JointDistribution& j,
                                     const std::vector<std::string>& v1,
                                     const std::vector<std::string>& v2,
                                     const std::vector<std::string>& z1,
                                     const std::vector<std::string>& T) {
  auto i1 = detail::resolve_set(j, v1);
  auto i2 = detail::resolve_set(j, v2);
  auto iz = detail::resolve_set(j, z1);
  auto it = detail::resolve_set(j, T);
  detail::require_disjoint({i1, i2, iz, it}, "bayes_bounds");
  uint64_t card = 1;
  for (size_t i : it) card *= j.variables()[i].cardinality;
  if (card < 2) throw DomainError("bayes_bounds: label T needs at least 2 outcomes");

  const double h_t = detail::entropy_idx(j, it);
  const double i_z1T_given_v2 = detail::conditional_mi_raw_idx(j, iz, it, i2);
  const double i_z1v2T = interaction_info(j, z1, v2, T);
  const double i_v1v2T = interaction_info(j, v1, v2, T);

  BayesBoundReport rep{};
  rep.entropy_T = h_t;
  rep.cardinality_T = card;
  rep.general_bound = bayes_gamma(1.0 - std::exp(-(h_t - i_z1T_given_v2 - i_z1v2T)), card);
  rep.sufficient_bound = bayes_gamma(1.0 - std::exp(-(h_t - i_z1T_given_v2 - i_v1v2T)), card);
  rep.minimal_bound = bayes_gamma(1.0 - std::exp(-(h_t - i_v1v2T)), card);
  return rep;
}

/// Exact I(v;z) for the linear-Gaussian channel z = w·v + ε with
/// v ~ N(0,1), ε ~ N(0, s²): ½·ln(1 + w²/s²). Analytic oracle for the
/// Gaussian KL upper bound.
inline double gaussian_linear_mi(double w, double s) {
  if (!(s > 0.0)) throw DomainError("gaussian_linear_mi: noise std must be positive");
  return 0.5 * std::log1p((w * w) / (s * s));
}

// -- joint constructors for check suites --------------------------------------

/// Flat-random joint (normalized exponential draws) over the given variables.
inline JointDistribution random_joint(Rng& rng,
                                      std::vector<JointDistribution::Variable> vars) {
  size_t cells = 1;
  for (const auto& v : vars) cells *= v.cardinality;
  std::vector<double> table(cells);
  double sum = 0.0;
  for (auto& p : table) {
    p = -std::log(1.0 - rng.next_double());
    sum += p;
  }
  for (auto& p : table) p /= sum;
  // Exact-sum cleanup: fold any rounding slack into the largest cell so the
  // constructor's 1e-12 contract holds structurally.
  double s2 = 0.0;
  for (double p : table) s2 += p;
  size_t biggest = 0;
  for (size_t i = 1; i < table.size(); ++i)
    if (table[i] > table[biggest]) biggest = i;
  table[biggest] += 1.0 - s2;
  return JointDistribution(std::move(vars), std::move(table));
}

/// Extends a joint with a new variable drawn through the conditional
/// p(new | source): exactly the "representation generated conditionally on
/// its input alone" setting. `channel` is row-major
/// [source outcome][new outcome] with rows summing to 1.
inline JointDistribution attach_conditional(const JointDistribution& j,
                                            const std::string& source,
                                            const std::string& new_name, uint32_t new_card,
                                            const std::vector<double>& channel) {
  const size_t src = j.var_index(source);
  const uint32_t src_card = j.variables()[src].cardinality;
  if (channel.size() != static_cast<size_t>(src_card) * new_card) {
    throw ValidationError("attach_conditional: channel must be source_card x new_card");
  }
  for (uint32_t s = 0; s < src_card; ++s) {
    double row = 0.0;
    for (uint32_t z = 0; z < new_card; ++z) {
      const double p = channel[size_t(s) * new_card + z];
      if (!(p >= 0.0) || !std::isfinite(p)) {
        throw ValidationError("attach_conditional: channel entries must be probabilities");
      }
      row += p;
    }
    if (std::abs(row - 1.0) > 1e-9) {
      throw ValidationError("attach_conditional: channel row " + std::to_string(s) +
                            " sums to " + std::to_string(row) + ", expected 1");
    }
  }
  std::vector<JointDistribution::Variable> vars = j.variables();
  vars.push_back({new_name, new_card});
  std::vector<double> table(j.n_outcomes() * new_card);
  for (size_t o = 0; o < j.n_outcomes(); ++o) {
    const uint32_t s = j.digit(o, src);
    for (uint32_t z = 0; z < new_card; ++z) {
      table[o * new_card + z] = j.table()[o] * channel[size_t(s) * new_card + z];
    }
  }
  // Same exact-sum cleanup as random_joint.
  double sum = 0.0;
  for (double p : table) sum += p;
  size_t biggest = 0;
  for (size_t i = 1; i < table.size(); ++i)
    if (table[i] > table[biggest]) biggest = i;
  table[biggest] += 1.0 - sum;
  return JointDistribution(std::move(vars), std::move(table));
}

/// Random channel matrix (rows sum to 1) for attach_conditional.
inline std::vector<double> random_channel(Rng& rng, uint32_t src_card, uint32_t new_card) {
  std::vector<double> ch(size_t(src_card) * new_card);
  for (uint32_t s = 0; s < src_card; ++s) {
    double sum = 0.0;
    for (uint32_t z = 0; z < new_card; ++z) {
      ch[size_t(s) * new_card + z] = -std::log(1.0 - rng.next_double());
      sum += ch[size_t(s) * new_card + z];
    }
    for (uint32_t z = 0; z < new_card; ++z) ch[size_t(s) * new_card + z] /= sum;
  }
  return ch;
}

/// Deterministic copy channel (identity matrix rows).
inline std::vector<double> copy_channel(uint32_t card) {
  std::vector<double> ch(size_t(card) * card, 0.0);
  for (uint32_t s = 0; s < card; ++s) ch[size_t(s) * card + s] = 1.0;
  return ch;
}

}  // namespace superinfo
