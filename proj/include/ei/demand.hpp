#pragma once

#include "ei/error.hpp"

#include <string>

namespace ei {

/// Linear inverse demand through (P0, pi0) with point elasticity eps there:
///
///     pi(P) = pi0 + pi0 / (eps * P0) * (P - P0)
///
/// Templated on the scalar so the anchor identities can be checked in exact
/// rational arithmetic. Quantities in kW, prices in CNY/kWh.
template <class T>
struct BasicDemandCurve {
    T p0;
    T pi0;
    T elasticity;

    /// dpi/dP, negative.
    T slope() const { return pi0 / (elasticity * p0); }
    /// Price axis intercept of the curve at P = 0.
    T intercept() const { return pi0 - slope() * p0; }

    T price_at(const T& quantity) const { return pi0 + slope() * (quantity - p0); }
    T quantity_at(const T& price) const { return p0 + (price - pi0) / slope(); }
    /// Quantity at which the price reaches zero: P0 * (1 - eps).
    T saturation() const { return p0 * (T(1) - elasticity); }

    /// Gross utility rate integral_0^P pi(q) dq, CNY per hour, for P in
    /// [0, saturation()].
    T utility(const T& quantity) const {
        return intercept() * quantity + slope() * quantity * quantity / T(2);
    }
};

using DemandCurve = BasicDemandCurve<double>;

/// Errors: BadElasticity (eps >= 0), ConfigError (P0 or pi0 not positive).
template <class T>
BasicDemandCurve<T> build_demand_curve(const T& p0, const T& pi0, const T& elasticity) {
    if (!(elasticity < T(0))) {
        throw Error(Errc::BadElasticity, "elasticity must be negative");
    }
    if (!(p0 > T(0)) || !(pi0 > T(0))) {
        throw Error(Errc::ConfigError, "demand anchor must have positive quantity and price");
    }
    return BasicDemandCurve<T>{p0, pi0, elasticity};
}

extern template struct BasicDemandCurve<double>;

} // namespace ei
