// Float helpers routed through libm so results do not depend on the `std` feature.

use num_complex::Complex64;

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn abs(z: Complex64) -> f64 {
    libm::sqrt(z.norm_sqr())
}

#[inline]
pub(crate) fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub(crate) fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub(crate) fn cbrt(x: f64) -> f64 {
    libm::cbrt(x)
}

/// tan(acos(pf)), the Q/P ratio of a lagging power factor.
#[inline]
pub(crate) fn q_over_p(power_factor: f64) -> f64 {
    libm::tan(libm::acos(power_factor))
}

#[inline]
pub(crate) fn fabs(x: f64) -> f64 {
    libm::fabs(x)
}
