#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qpfk/dynamics/phase.hpp"

namespace qpfk {

struct Convergent {
  std::uint64_t p = 0;
  std::uint64_t q = 1;
  friend bool operator==(const Convergent&, const Convergent&) = default;
};

/// An irrational in (0, 1) given by its continued fraction [a_1, a_2, ...]
/// with a_0 = 0. Holds a finite prefix of partial quotients; more can be
/// appended through the generator, if one was supplied.
///
/// Convergents p_n/q_n are cached eagerly (the object is immutable) up to
/// the last index whose numerator and denominator fit in 64 bits. Indexing
/// is 1-based: q_1 = a_1, seeded by q_0 = 1, q_{-1} = 0.
class Frequency {
 public:
  using Generator = std::function<std::uint64_t(std::size_t)>;

  explicit Frequency(std::vector<std::uint64_t> partial_quotients, Generator gen = {})
      : a_(std::move(partial_quotients)), gen_(std::move(gen)) {
    if (a_.empty()) throw std::invalid_argument("Frequency: need at least one partial quotient");
    for (auto ai : a_)
      if (ai == 0) throw std::invalid_argument("Frequency: partial quotients must be positive");
    build_cache();
  }

  /// First n quotients of gen(1), gen(2), ...
  static Frequency from_generator(Generator gen, std::size_t n) {
    std::vector<std::uint64_t> a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = gen(i + 1);
    return Frequency(std::move(a), std::move(gen));
  }

  /// (sqrt(5) - 1) / 2 = [1, 1, 1, ...].
  static Frequency golden(std::size_t n = 92) {
    return from_generator([](std::size_t) { return std::uint64_t{1}; }, n);
  }

  /// sqrt(2) - 1 = [2, 2, 2, ...].
  static Frequency sqrt2(std::size_t n = 52) {
    return from_generator([](std::size_t) { return std::uint64_t{2}; }, n);
  }

  /// pi - 3 truncated to its first n partial quotients (n <= 120).
  static Frequency pi_prefix(std::size_t n) {
    static constexpr std::uint64_t kPi[] = {
        7, 15, 1, 292, 1, 1, 1, 2, 1, 3, 1, 14, 2, 1, 1, 2, 2, 2, 2, 1, 84, 2, 1, 1,
        15, 3, 13, 1, 4, 2, 6, 6, 99, 1, 2, 2, 6, 3, 5, 1, 1, 6, 8, 1, 7, 1, 2, 3,
        7, 1, 2, 1, 1, 12, 1, 1, 1, 3, 1, 1, 8, 1, 1, 2, 1, 6, 1, 1, 5, 2, 2, 3,
        1, 2, 4, 4, 16, 1, 161, 45, 1, 22, 1, 2, 2, 1, 4, 1, 2, 24, 1, 2, 1, 3, 1, 2,
        1, 1, 10, 2, 5, 4, 1, 2, 2, 8, 1, 5, 2, 2, 26, 1, 4, 1, 1, 8, 2, 42, 2, 1};
    constexpr std::size_t kLen = std::size(kPi);
    if (n == 0 || n > kLen) throw std::invalid_argument("pi_prefix: N must be in [1, 120]");
    return Frequency(std::vector<std::uint64_t>(kPi, kPi + n));
  }

  /// Parses "golden", "sqrt2", "pi_prefix:N" or a comma-separated list.
  static Frequency parse(std::string_view s) {
    if (s == "golden") return golden();
    if (s == "sqrt2") return sqrt2();
    if (s.rfind("pi_prefix:", 0) == 0) return pi_prefix(std::stoul(std::string(s.substr(10))));
    std::vector<std::uint64_t> a;
    std::size_t pos = 0;
    while (pos <= s.size()) {
      const auto comma = s.find(',', pos);
      const auto tok = s.substr(pos, comma == std::string_view::npos ? s.size() - pos : comma - pos);
      if (tok.empty()) throw std::invalid_argument("Frequency::parse: empty partial quotient");
      a.push_back(std::stoull(std::string(tok)));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    return Frequency(std::move(a));
  }

  /// A new frequency with n quotients, drawing the extra ones from the generator.
  Frequency extended(std::size_t n) const {
    if (n <= a_.size()) return Frequency(std::vector<std::uint64_t>(a_.begin(), a_.begin() + static_cast<std::ptrdiff_t>(n)), gen_);
    if (!gen_) throw std::logic_error("Frequency::extended: no generator for further quotients");
    auto a = a_;
    for (std::size_t i = a.size(); i < n; ++i) a.push_back(gen_(i + 1));
    return Frequency(std::move(a), gen_);
  }

  std::span<const std::uint64_t> partial_quotients() const { return a_; }
  std::size_t size() const { return a_.size(); }

  /// Number of convergents representable in 64-bit integers.
  std::size_t representable() const { return conv_.size(); }

  /// p_n / q_n, 1 <= n <= size().
  Convergent convergent(std::size_t n) const {
    if (n == 0 || n > a_.size()) throw std::out_of_range("Frequency::convergent: index out of range");
    if (n > conv_.size())
      throw std::overflow_error("Frequency::convergent: q_" + std::to_string(n) + " exceeds 64 bits");
    return conv_[n - 1];
  }

  std::vector<Convergent> convergents(std::size_t n) const {
    if (n == 0) throw std::invalid_argument("Frequency::convergents: n must be >= 1");
    std::vector<Convergent> out;
    out.reserve(n);
    for (std::size_t i = 1; i <= n; ++i) out.push_back(convergent(i));
    return out;
  }

  /// The prefix value in fixed point, rounded from the deepest representable
  /// convergent (for long prefixes this is within 2^-64 of the irrational).
  Angle angle() const { return angle_; }
  double value() const { return to_turns(angle_); }

  /// log q_n for 1 <= n <= size(), valid beyond 64-bit range.
  double log_denominator(std::size_t n) const {
    if (n == 0 || n > a_.size()) throw std::out_of_range("Frequency::log_denominator: index out of range");
    return log_q_[n - 1];
  }

 private:
  void build_cache() {
    std::uint64_t p2 = 1, q2 = 0;  // p_{-1}, q_{-1}
    std::uint64_t p1 = 0, q1 = 1;  // p_0, q_0
    for (auto ai : a_) {
      std::uint64_t p, q, t;
      if (__builtin_mul_overflow(ai, p1, &t) || __builtin_add_overflow(t, p2, &p)) break;
      if (__builtin_mul_overflow(ai, q1, &t) || __builtin_add_overflow(t, q2, &q)) break;
      conv_.push_back({p, q});
      p2 = p1;
      q2 = q1;
      p1 = p;
      q1 = q;
    }
    const auto& last = conv_.empty() ? Convergent{0, 1} : conv_.back();
    using u128 = unsigned __int128;
    const u128 num = (static_cast<u128>(last.p) << 64) + last.q / 2;
    angle_ = static_cast<Angle>(num / last.q);

    // q_n / q_{n-1} = a_n + q_{n-2} / q_{n-1}
    double ratio = 0.0, acc = 0.0;
    for (std::size_t i = 0; i < a_.size(); ++i) {
      ratio = static_cast<double>(a_[i]) + (i == 0 ? 0.0 : 1.0 / ratio);
      acc += std::log(ratio);
      log_q_.push_back(acc);
    }
  }

  std::vector<std::uint64_t> a_;
  Generator gen_;
  std::vector<Convergent> conv_;
  std::vector<double> log_q_;
  Angle angle_ = 0;
};

/// Prefix-empirical classification of a frequency. These are tail
/// properties of the full expansion; nothing is claimed beyond the prefix.
struct FrequencyClass {
  enum class Kind { finite_type, gamma_diophantine, stretched, unclassified };
  Kind kind = Kind::unclassified;
  std::uint64_t max_quotient = 0;
  double gamma_hat = 0.0;  // max_n log q_{n+1} / log q_n - 1
  double b_hat = 0.0;      // max_n log log q_{n+2} / log q_n
  std::size_t n_terms = 0;
  bool prefix_empirical = true;
};

inline const char* to_string(FrequencyClass::Kind k) {
  switch (k) {
    case FrequencyClass::Kind::finite_type: return "finite_type";
    case FrequencyClass::Kind::gamma_diophantine: return "gamma_diophantine";
    case FrequencyClass::Kind::stretched: return "stretched";
    default: return "unclassified";
  }
}

/// Growth tests compare the second half of the prefix with the first:
/// bounded quotients -> finite type; otherwise a non-increasing ratio
/// log q_{n+1} / log q_n -> gamma-Diophantine; otherwise a non-increasing
/// log log q_{n+2} / log q_n -> stretched.
inline FrequencyClass classify_frequency(const Frequency& f, std::size_t n_terms) {
  if (n_terms < 3) throw std::invalid_argument("classify_frequency: need at least 3 terms");
  if (n_terms > f.size()) throw std::out_of_range("classify_frequency: not enough partial quotients");
  FrequencyClass out;
  out.n_terms = n_terms;
  const auto a = f.partial_quotients();
  const std::size_t half = n_terms / 2;
  std::uint64_t head_max = 0, tail_max = 0;
  for (std::size_t i = 0; i < n_terms; ++i) {
    auto& m = i < half ? head_max : tail_max;
    m = std::max(m, a[i]);
  }
  out.max_quotient = std::max(head_max, tail_max);

  std::vector<double> ratio, loglog;
  for (std::size_t n = 1; n + 1 <= n_terms; ++n) {
    const double lq = f.log_denominator(n);
    if (lq < std::log(2.0) - 1e-12) continue;
    ratio.push_back(f.log_denominator(n + 1) / lq);
    if (n + 2 <= n_terms) {
      const double lq2 = f.log_denominator(n + 2);
      if (lq2 > 1.0) loglog.push_back(std::log(lq2) / lq);
    }
  }
  auto split_max = [](const std::vector<double>& v) {
    double h = -std::numeric_limits<double>::infinity(), t = h;
    for (std::size_t i = 0; i < v.size(); ++i) {
      auto& m = i < v.size() / 2 ? h : t;
      m = std::max(m, v[i]);
    }
    return std::pair{h, t};
  };
  for (double r : ratio) out.gamma_hat = std::max(out.gamma_hat, r - 1.0);
  for (double b : loglog) out.b_hat = std::max(out.b_hat, b);

  if (tail_max <= head_max) {
    out.kind = FrequencyClass::Kind::finite_type;
  } else if (auto [h, t] = split_max(ratio); ratio.size() >= 2 && t <= h * (1.0 + 1e-12)) {
    out.kind = FrequencyClass::Kind::gamma_diophantine;
  } else if (auto [hb, tb] = split_max(loglog); loglog.size() >= 2 && tb <= hb * (1.0 + 1e-12)) {
    out.kind = FrequencyClass::Kind::stretched;
  }
  return out;
}

}  // namespace qpfk
