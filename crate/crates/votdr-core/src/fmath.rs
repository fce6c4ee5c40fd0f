//! Float math that works both with std and, via `num-traits`/`libm`, without.

#![allow(dead_code)]

macro_rules! forward {
    ($($name:ident),* $(,)?) => {
        $(
            #[cfg(feature = "std")]
            #[inline]
            pub(crate) fn $name(x: f64) -> f64 {
                x.$name()
            }

            #[cfg(not(feature = "std"))]
            #[inline]
            pub(crate) fn $name(x: f64) -> f64 {
                num_traits::Float::$name(x)
            }
        )*
    };
}

forward!(sqrt, ln, log10, exp, floor, ceil, round, abs, cos, sin);

#[cfg(feature = "std")]
#[inline]
pub(crate) fn powf(x: f64, y: f64) -> f64 {
    x.powf(y)
}

#[cfg(not(feature = "std"))]
#[inline]
pub(crate) fn powf(x: f64, y: f64) -> f64 {
    num_traits::Float::powf(x, y)
}

/// 10^x, the workhorse behind every dB conversion.
#[inline]
pub(crate) fn pow10(x: f64) -> f64 {
    powf(10.0, x)
}
