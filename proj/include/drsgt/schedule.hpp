#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <variant>

#include "drsgt/errors.hpp"

namespace drsgt {

/// Batch sizes are clamped here. At 2^48 the sampling noise is far below
/// double rounding of the gradient itself, and cumulative counters stay in
/// range for millions of iterations.
inline constexpr std::uint64_t kMaxSampleSize = std::uint64_t{1} << 48;

namespace schedule {
struct Constant {
  std::uint64_t q{1};
};
struct Polynomial {
  double a{1.0};
};
struct Geometric {
  double q{0.9};
};
}  // namespace schedule

class SampleSchedule {
 public:
  using Kind = std::variant<schedule::Constant, schedule::Polynomial, schedule::Geometric>;

  SampleSchedule() : kind_(schedule::Constant{1}) {}
  explicit SampleSchedule(Kind kind) : kind_(kind) { validate(); }

  static SampleSchedule constant(std::uint64_t q) { return SampleSchedule(schedule::Constant{q}); }
  static SampleSchedule polynomial(double a) { return SampleSchedule(schedule::Polynomial{a}); }
  static SampleSchedule geometric(double q) { return SampleSchedule(schedule::Geometric{q}); }

  /// Parses "constant:Q", "polynomial:a" or "geometric:q".
  static SampleSchedule parse(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw ScheduleError("schedule '" + text + "': expected kind:value");
    const std::string kind = text.substr(0, colon);
    const std::string value = text.substr(colon + 1);
    std::size_t used = 0;
    try {
      if (kind == "constant") {
        const long long q = std::stoll(value, &used);
        if (used != value.size() || q < 1) throw ScheduleError("constant schedule needs integer Q >= 1");
        return constant(std::uint64_t(q));
      }
      const double v = std::stod(value, &used);
      if (used != value.size()) throw ScheduleError("schedule '" + text + "': trailing characters");
      if (kind == "polynomial") return polynomial(v);
      if (kind == "geometric") return geometric(v);
    } catch (const std::logic_error&) {
      throw ScheduleError("schedule '" + text + "': bad number");
    }
    throw ScheduleError("schedule '" + text + "': unknown kind (constant|polynomial|geometric)");
  }

  const Kind& kind() const noexcept { return kind_; }

  /// N_k for iteration index k >= 0.
  ///   constant:   Q
  ///   polynomial: floor((k+1)^a)
  ///   geometric:  ceil(q^{-k})
  /// clamped to [1, kMaxSampleSize].
  std::uint64_t size(std::uint64_t k) const {
    // A few ulps, so pow() rounding never moves an exact integer.
    constexpr double kSlack = 8 * std::numeric_limits<double>::epsilon();
    struct V {
      std::uint64_t k;
      double operator()(const schedule::Constant& c) const { return double(c.q); }
      double operator()(const schedule::Polynomial& p) const {
        const double x = std::pow(double(k) + 1.0, p.a);
        return std::floor(x * (1.0 + kSlack));
      }
      double operator()(const schedule::Geometric& g) const {
        const double x = std::pow(g.q, -double(k));
        return std::ceil(x * (1.0 - kSlack));
      }
    };
    const double raw = std::visit(V{k}, kind_);
    if (!(raw < double(kMaxSampleSize))) return kMaxSampleSize;
    return raw < 1.0 ? 1 : std::uint64_t(raw);
  }

  std::string to_string() const {
    struct V {
      std::string operator()(const schedule::Constant& c) const { return "constant:" + std::to_string(c.q); }
      std::string operator()(const schedule::Polynomial& p) const { return fmt("polynomial:", p.a); }
      std::string operator()(const schedule::Geometric& g) const { return fmt("geometric:", g.q); }
      static std::string fmt(const char* head, double v) {
        std::ostringstream os;
        os << head << v;
        return os.str();
      }
    };
    return std::visit(V{}, kind_);
  }

 private:
  void validate() const {
    struct V {
      void operator()(const schedule::Constant& c) const {
        if (c.q < 1) throw ScheduleError("constant schedule: Q must be >= 1");
      }
      void operator()(const schedule::Polynomial& p) const {
        if (!(p.a > 0.0) || !std::isfinite(p.a)) throw ScheduleError("polynomial schedule: a must be > 0");
      }
      void operator()(const schedule::Geometric& g) const {
        if (!(g.q > 0.0 && g.q < 1.0)) throw ScheduleError("geometric schedule: q must be in (0, 1)");
      }
    };
    std::visit(V{}, kind_);
  }

  Kind kind_;
};

inline std::uint64_t sample_size(const SampleSchedule& sched, std::uint64_t k) { return sched.size(k); }

/// a + b, pinned at the max instead of wrapping.
inline std::uint64_t saturating_add(std::uint64_t a, std::uint64_t b) {
  return b > std::numeric_limits<std::uint64_t>::max() - a ? std::numeric_limits<std::uint64_t>::max()
                                                           : a + b;
}

}  // namespace drsgt
