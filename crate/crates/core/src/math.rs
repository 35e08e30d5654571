//! Float helpers backed by `libm` so the crate stays `no_std`.

pub(crate) const DEG: f64 = core::f64::consts::PI / 180.0;

#[inline]
pub(crate) fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub(crate) fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn atan2(y: f64, x: f64) -> f64 {
    libm::atan2(y, x)
}

#[inline]
pub(crate) fn hypot(x: f64, y: f64) -> f64 {
    libm::hypot(x, y)
}

#[inline]
pub(crate) fn floor(x: f64) -> f64 {
    libm::floor(x)
}

/// `sin`/`cos` of an angle in degrees, exact at multiples of 90°.
pub(crate) fn sin_cos_deg(angle_deg: f64) -> (f64, f64) {
    let turns = angle_deg / 90.0;
    if turns == floor(turns) && turns.abs() < 1e15 {
        let quadrant = (turns as i64).rem_euclid(4);
        return match quadrant {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        };
    }
    let rad = angle_deg * DEG;
    (sin(rad), cos(rad))
}

/// Wraps an angle in degrees into `[0, 360)`.
pub(crate) fn wrap_deg(angle: f64) -> f64 {
    let w = angle - 360.0 * floor(angle / 360.0);
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}
