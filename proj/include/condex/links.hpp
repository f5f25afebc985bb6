#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <string_view>

#include "condex/errors.hpp"

namespace condex {

inline double sign(double z) { return (z > 0.0) - (z < 0.0); }

/// log(1 + e^z) without overflow.
inline double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

/// 1 / (1 + e^{-z}).
inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

enum class FamilyId { A1, A2, A3, B1, B2, C1, C2 };

inline std::string to_string(FamilyId id) {
  switch (id) {
    case FamilyId::A1: return "A1";
    case FamilyId::A2: return "A2";
    case FamilyId::A3: return "A3";
    case FamilyId::B1: return "B1";
    case FamilyId::B2: return "B2";
    case FamilyId::C1: return "C1";
    case FamilyId::C2: return "C2";
  }
  return "?";
}

/// Interval of extended reals with per-endpoint closedness.
struct RangeInterval {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  bool lower_closed = false;
  bool upper_closed = false;

  bool contains(double v) const {
    if (v < lower || v > upper) return false;
    if (v == lower && !lower_closed) return false;
    if (v == upper && !upper_closed) return false;
    return true;
  }
  bool contains_interior(double v) const { return v > lower && v < upper; }
};

/// One of the seven (omega, rho, phi, psi) quadruples. omega is the strictly
/// increasing output map whose range must cover the estimation target; rho is
/// the strictly negative companion appearing in every gradient update; phi and
/// psi are their antiderivative forms used only for cost monitoring.
class LinkFamily {
 public:
  explicit LinkFamily(FamilyId id, double a = 0.0, double b = 1.0)
      : id_(id), a_(a), b_(b) {
    if ((id == FamilyId::C1 || id == FamilyId::C2) && !(a < b)) {
      throw ConfigError("link " + to_string(id) + " requires a < b");
    }
  }

  static LinkFamily parse(std::string_view name, double a = 0.0, double b = 1.0) {
    if (name == "A1") return LinkFamily(FamilyId::A1);
    if (name == "A2") return LinkFamily(FamilyId::A2);
    if (name == "A3") return LinkFamily(FamilyId::A3);
    if (name == "B1") return LinkFamily(FamilyId::B1, a);
    if (name == "B2") return LinkFamily(FamilyId::B2, a);
    if (name == "C1") return LinkFamily(FamilyId::C1, a, b);
    if (name == "C2") return LinkFamily(FamilyId::C2, a, b);
    throw ConfigError("unknown link family '" + std::string(name) + "'");
  }

  FamilyId id() const { return id_; }
  double a() const { return a_; }
  double b() const { return b_; }
  std::string name() const { return to_string(id_); }

  RangeInterval range() const {
    const double inf = std::numeric_limits<double>::infinity();
    switch (id_) {
      case FamilyId::A1:
      case FamilyId::A2:
      case FamilyId::A3: return {-inf, inf, false, false};
      case FamilyId::B1:
      case FamilyId::B2: return {a_, inf, false, false};
      case FamilyId::C1:
      case FamilyId::C2: return {a_, b_, false, false};
    }
    return {};
  }

  double omega(double z) const {
    switch (id_) {
      case FamilyId::A1: return z;
      case FamilyId::A2: return std::sinh(z);
      case FamilyId::A3: return sign(z) * std::expm1(std::fabs(z));
      case FamilyId::B1:
      case FamilyId::B2: return a_ + std::exp(z);
      case FamilyId::C1:
      case FamilyId::C2: {
        const double s = sigmoid(z);
        return a_ * (1.0 - s) + b_ * s;
      }
    }
    return 0.0;
  }

  double rho(double z) const {
    switch (id_) {
      case FamilyId::A1: return -1.0;
      case FamilyId::A2:
      case FamilyId::A3: return -std::exp(-0.5 * std::fabs(z));
      case FamilyId::B1: return -(1.0 - sigmoid(z));
      case FamilyId::B2: return -std::exp(-0.5 * z);
      case FamilyId::C1: return -sigmoid(z);
      case FamilyId::C2: return -std::exp(-z);
    }
    return 0.0;
  }

  double phi(double z) const {
    switch (id_) {
      case FamilyId::A1: return 0.5 * z * z;
      case FamilyId::A2:
        return std::expm1(0.5 * std::fabs(z)) + std::expm1(-1.5 * std::fabs(z)) / 3.0;
      case FamilyId::A3: return 4.0 * std::cosh(0.5 * z);
      case FamilyId::B1: return -a_ * softplus(-z) + softplus(z);
      case FamilyId::B2: return -2.0 * a_ * std::exp(-0.5 * z) + 2.0 * std::exp(0.5 * z);
      case FamilyId::C1: return (b_ - a_) * (1.0 - sigmoid(z)) + b_ * softplus(z);
      case FamilyId::C2:
        // log(e^z / (1+e^z)) = -softplus(-z)
        return -(b_ - a_) * softplus(-z) - a_ * std::exp(-z);
    }
    return 0.0;
  }

  double psi(double z) const {
    switch (id_) {
      case FamilyId::A1: return -z;
      case FamilyId::A2:
      case FamilyId::A3: return 2.0 * sign(z) * std::expm1(-0.5 * std::fabs(z));
      case FamilyId::B1: return softplus(-z);
      case FamilyId::B2: return 2.0 * std::exp(-0.5 * z);
      case FamilyId::C1: return -softplus(z);
      case FamilyId::C2: return std::exp(-z);
    }
    return 0.0;
  }

  /// Inverts omega at r by bisection on the monotone crossing of
  /// omega(u) - r. The bracket [-1, 1] is expanded geometrically until it
  /// straddles r (ranges may be unbounded).
  double scalar_minimizer(double r) const {
    if (!range().contains_interior(r)) {
      throw RangeError("target " + std::to_string(r) + " outside range of " + name());
    }
    double lo = -1.0, hi = 1.0;
    for (int k = 0; k < 200 && omega(lo) > r; ++k) lo *= 2.0;
    for (int k = 0; k < 200 && omega(hi) < r; ++k) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      if (omega(mid) < r) {
        lo = mid;
      } else {
        hi = mid;
      }
      if (std::fabs(omega(mid) - r) <= 1e-12 && hi - lo <= 1e-12 * (1.0 + std::fabs(mid))) {
        break;
      }
    }
    return 0.5 * (lo + hi);
  }

 private:
  FamilyId id_;
  double a_;
  double b_;
};

}  // namespace condex
