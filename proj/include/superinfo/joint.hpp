#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "superinfo/errors.hpp"

namespace superinfo {

/// Exact joint probability table over a small set of named discrete
/// variables. Outcomes are indexed mixed-radix with the LAST variable
/// fastest-moving; probabilities are f64 and must sum to 1.
class JointDistribution {
 public:
  struct Variable {
    std::string name;
    uint32_t cardinality;
  };

  static constexpr size_t kMaxVariables = 6;
  static constexpr uint32_t kMaxCardinality = 16;
  static constexpr double kSumTolExact = 1e-12;   // constructor
  static constexpr double kSumTolCsv = 1e-9;      // renormalization window

  JointDistribution(std::vector<Variable> vars, std::vector<double> table)
      : vars_(std::move(vars)), table_(std::move(table)) {
    validate_vars(vars_);
    if (table_.size() != outcome_count(vars_)) {
      throw ValidationError("joint table has " + std::to_string(table_.size()) +
                            " entries, expected " + std::to_string(outcome_count(vars_)));
    }
    double sum = 0.0;
    for (double p : table_) {
      if (!(p >= 0.0)) throw ValidationError("joint table entries must be non-negative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kSumTolExact) {
      throw ValidationError("joint table sums to " + std::to_string(sum) + ", expected 1");
    }
  }

  size_t n_vars() const { return vars_.size(); }
  const std::vector<Variable>& variables() const { return vars_; }
  const std::vector<double>& table() const { return table_; }
  size_t n_outcomes() const { return table_.size(); }

  size_t var_index(std::string_view name) const {
    for (size_t i = 0; i < vars_.size(); ++i)
      if (vars_[i].name == name) return i;
    throw DomainError("unknown variable '" + std::string(name) + "'");
  }

  /// Mixed-radix stride of variable i (last variable has stride 1).
  size_t stride(size_t i) const {
    size_t s = 1;
    for (size_t j = vars_.size(); j-- > i + 1;) s *= vars_[j].cardinality;
    return s;
  }

  /// Decodes the outcome index of the full joint into the digit of variable i.
  uint32_t digit(size_t outcome, size_t i) const {
    return static_cast<uint32_t>(outcome / stride(i) % vars_[i].cardinality);
  }

  /// Marginal probability table over the given variable indices (in the
  /// given order, first index slowest-moving).
  std::vector<double> marginal(const std::vector<size_t>& idx) const {
    size_t cells = 1;
    for (size_t i : idx) cells *= vars_[i].cardinality;
    std::vector<double> out(cells, 0.0);
    for (size_t o = 0; o < table_.size(); ++o) {
      if (table_[o] == 0.0) continue;
      size_t cell = 0;
      for (size_t i : idx) cell = cell * vars_[i].cardinality + digit(o, i);
      out[cell] += table_[o];
    }
    return out;
  }

  // -- CSV interface ----------------------------------------------------------
  // Header: var:<name>:<cardinality>,...,p
  // Rows:   one outcome per row, outcome digits then the probability.
  // Missing outcomes are zero; duplicates are rejected. A total deviating
  // from 1 by at most 1e-9 is renormalized, anything worse is rejected.

  void save_csv(std::ostream& out) const {
    for (const auto& v : vars_) {
      out << "var:" << v.name << ":" << v.cardinality << ",";
    }
    out << "p\n";
    for (size_t o = 0; o < table_.size(); ++o) {
      for (size_t i = 0; i < vars_.size(); ++i) out << digit(o, i) << ",";
      char buf[32];
      auto res = std::to_chars(buf, buf + sizeof(buf), table_[o]);
      out.write(buf, res.ptr - buf);
      out << "\n";
    }
  }

  static JointDistribution load_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("joint CSV is empty");
    std::vector<std::string_view> cols = split(line);
    if (cols.size() < 2 || cols.back() != "p") {
      throw ValidationError("joint CSV header must end with 'p'");
    }
    std::vector<Variable> vars;
    for (size_t i = 0; i + 1 < cols.size(); ++i) {
      std::string_view c = cols[i];
      if (!c.starts_with("var:")) throw ValidationError("joint CSV header column must start 'var:'");
      c.remove_prefix(4);
      size_t colon = c.rfind(':');
      if (colon == std::string_view::npos || colon == 0) {
        throw ValidationError("joint CSV header column needs var:<name>:<cardinality>");
      }
      Variable v;
      v.name = std::string(c.substr(0, colon));
      v.cardinality = parse_u32(c.substr(colon + 1), "cardinality");
      vars.push_back(std::move(v));
    }
    validate_vars(vars);
    const size_t cells = outcome_count(vars);
    std::vector<double> table(cells, 0.0);
    std::vector<bool> seen(cells, false);
    size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::vector<std::string_view> f = split(line);
      if (f.size() != vars.size() + 1) {
        throw ValidationError("joint CSV line " + std::to_string(line_no) +
                              " has wrong column count");
      }
      size_t o = 0;
      for (size_t i = 0; i < vars.size(); ++i) {
        uint32_t d = parse_u32(f[i], "outcome digit");
        if (d >= vars[i].cardinality) {
          throw ValidationError("joint CSV line " + std::to_string(line_no) +
                                ": digit out of range for variable " + vars[i].name);
        }
        o = o * vars[i].cardinality + d;
      }
      if (seen[o]) {
        throw ValidationError("joint CSV line " + std::to_string(line_no) +
                              ": duplicate outcome");
      }
      seen[o] = true;
      table[o] = parse_f64(f.back(), line_no);
    }
    double sum = 0.0;
    for (double p : table) sum += p;
    if (std::abs(sum - 1.0) > kSumTolCsv) {
      throw ValidationError("joint CSV probabilities sum to " + std::to_string(sum) +
                            "; refusing to renormalize a deviation above 1e-9");
    }
    // Renormalize only outside the constructor's own tolerance; totals already
    // within 1e-12 pass through untouched so save/load round-trips are exact.
    if (std::abs(sum - 1.0) > kSumTolExact) {
      for (double& p : table) p /= sum;
    }
    return JointDistribution(std::move(vars), std::move(table));
  }

 private:
  std::vector<Variable> vars_;
  std::vector<double> table_;

  static size_t outcome_count(const std::vector<Variable>& vars) {
    size_t n = 1;
    for (const auto& v : vars) n *= v.cardinality;
    return n;
  }

  static void validate_vars(const std::vector<Variable>& vars) {
    if (vars.empty() || vars.size() > kMaxVariables) {
      throw ValidationError("joint needs 1.." + std::to_string(kMaxVariables) + " variables");
    }
    for (size_t i = 0; i < vars.size(); ++i) {
      const auto& v = vars[i];
      if (v.name.empty() || v.name.find(',') != std::string::npos ||
          v.name.find(':') != std::string::npos) {
        throw ValidationError("variable names must be non-empty and free of ',' and ':'");
      }
      if (v.cardinality == 0 || v.cardinality > kMaxCardinality) {
        throw ValidationError("variable '" + v.name + "' cardinality must be 1.." +
                              std::to_string(kMaxCardinality));
      }
      for (size_t j = i + 1; j < vars.size(); ++j) {
        if (vars[j].name == v.name) throw ValidationError("duplicate variable '" + v.name + "'");
      }
    }
  }

  static std::vector<std::string_view> split(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::vector<std::string_view> out;
    size_t start = 0;
    while (true) {
      size_t comma = line.find(',', start);
      if (comma == std::string_view::npos) {
        out.push_back(line.substr(start));
        return out;
      }
      out.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
  }

  static uint32_t parse_u32(std::string_view s, const char* what) {
    uint32_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      throw ValidationError(std::string("joint CSV: bad ") + what + " '" + std::string(s) + "'");
    }
    return v;
  }

  static double parse_f64(std::string_view s, size_t line_no) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !(v >= 0.0) ||
        !std::isfinite(v)) {
      throw ValidationError("joint CSV line " + std::to_string(line_no) +
                            ": bad probability '" + std::string(s) + "'");
    }
    return v;
  }
};

}  // namespace superinfo
