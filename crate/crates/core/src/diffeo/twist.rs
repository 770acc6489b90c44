//! Area-preserving quasi-rotation of the unit square.
//!
//! Points are described by their sup-distance `rho` from the centre and the
//! arc length `s` along the square of radius `rho` (perimeter `8 rho`). In
//! these coordinates Lebesgue measure is `d rho ds`, so any twist
//! `s -> s + f(rho)` preserves area exactly. With `f(rho) = 2 rho a(rho)`
//! the map is the quarter turn where `a = 1` and the identity where `a = 0`.

/// `6u^5 - 15u^4 + 10u^3` on `[0, 1]`, clamped outside.
#[inline]
pub fn smooth01(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
    }
}

/// Derivative of [`smooth01`].
#[inline]
pub fn smooth01_deriv(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        30.0 * u * u * (1.0 - u) * (1.0 - u)
    }
}

/// Step from 0 (for `z <= -1`) to 1 (for `z >= 1`).
#[inline]
pub fn step(z: f64) -> f64 {
    smooth01(0.5 * (z + 1.0))
}

/// Quarter-turn twist of `[0,1]^2` with transition parameter `eps`.
///
/// Rotates `[2 eps, 1 - 2 eps]^2` by a quarter turn counter-clockwise and is
/// the identity outside `[eps, 1 - eps]^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SquareTwist {
    eps: f64,
    inner: f64,
    outer: f64,
}

/// Smoothness class of a point under the twist.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Zone {
    Rotation,
    Transition,
    Identity,
}

impl SquareTwist {
    /// `eps` must lie in `(0, 1/4)`.
    pub fn new(eps: f64) -> Self {
        assert!(eps > 0.0 && eps < 0.25, "twist eps must lie in (0, 1/4), got {eps}");
        Self { eps, inner: 0.5 - 2.0 * eps, outer: 0.5 - eps }
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    #[inline]
    fn weight(&self, rho: f64) -> f64 {
        1.0 - smooth01((rho - self.inner) / self.eps)
    }

    #[inline]
    pub fn zone(&self, x: f64, y: f64) -> Zone {
        let rho = (x - 0.5).abs().max((y - 0.5).abs());
        if rho <= self.inner {
            Zone::Rotation
        } else if rho >= self.outer {
            Zone::Identity
        } else {
            Zone::Transition
        }
    }

    /// Applies the twist (`inverse = false`) or its inverse.
    #[inline]
    pub fn apply(&self, x: f64, y: f64, inverse: bool) -> (f64, f64) {
        let dx = x - 0.5;
        let dy = y - 0.5;
        let rho = dx.abs().max(dy.abs());
        if rho >= self.outer {
            return (x, y);
        }
        if rho <= self.inner {
            return if inverse { (y, 1.0 - x) } else { (1.0 - y, x) };
        }
        let shift = 2.0 * rho * self.weight(rho);
        let s = arc(dx, dy, rho) + if inverse { -shift } else { shift };
        let (ex, ey) = point(s, rho);
        (0.5 + ex, 0.5 + ey)
    }

    /// Identifier of the smooth piece containing `(x, y)`: 0 wherever the
    /// twist is affine, otherwise the pair of square sides (domain, image).
    #[inline]
    pub fn piece(&self, x: f64, y: f64, inverse: bool) -> u64 {
        let dx = x - 0.5;
        let dy = y - 0.5;
        let rho = dx.abs().max(dy.abs());
        if rho >= self.outer || rho <= self.inner {
            return 0;
        }
        let (ix, iy) = self.apply(x, y, inverse);
        1 + 4 * side(dx, dy, rho) + side(ix - 0.5, iy - 0.5, rho)
    }
}

#[inline]
fn side(dx: f64, dy: f64, rho: f64) -> u64 {
    if dx == rho && dy < rho {
        0
    } else if dy == rho {
        1
    } else if dx == -rho {
        2
    } else if dy == -rho {
        3
    } else {
        // rounding can leave both coordinates strictly inside; use the nearest side
        let cands = [(rho - dx, 0), (rho - dy, 1), (dx + rho, 2), (dy + rho, 3)];
        cands.iter().fold((f64::INFINITY, 0), |b, &(d, s)| if d < b.0 { (d, s) } else { b }).1
    }
}

/// Arc length from `(rho, -rho)` counter-clockwise along the square of radius `rho`.
#[inline]
fn arc(dx: f64, dy: f64, rho: f64) -> f64 {
    if dx == rho && dy < rho {
        dy + rho
    } else if dy == rho {
        3.0 * rho - dx
    } else if dx == -rho {
        5.0 * rho - dy
    } else {
        7.0 * rho + dx
    }
}

#[inline]
fn point(s: f64, rho: f64) -> (f64, f64) {
    let per = 8.0 * rho;
    let s = s.rem_euclid(per);
    let side = ((s / (2.0 * rho)) as usize).min(3);
    let u = s - side as f64 * 2.0 * rho;
    match side {
        0 => (rho, u - rho),
        1 => (rho - u, rho),
        2 => (-rho, rho - u),
        _ => (u - rho, -rho),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rotation_zone_is_quarter_turn() {
        let t = SquareTwist::new(0.1);
        assert_eq!(t.apply(0.5, 0.25, false), (0.75, 0.5));
        assert_eq!(t.apply(0.75, 0.5, true), (0.5, 0.25));
    }

    #[test]
    fn identity_zone_is_bitwise_fixed() {
        let t = SquareTwist::new(0.1);
        for &(x, y) in &[(0.05, 0.5), (0.95, 0.3), (0.5, 0.01), (0.0, 0.0), (0.92, 0.92)] {
            assert_eq!(t.apply(x, y, false), (x, y));
        }
    }

    #[test]
    fn smoothstep_endpoints() {
        assert_eq!(smooth01(0.0), 0.0);
        assert_eq!(smooth01(1.0), 1.0);
        assert!((smooth01(0.5) - 0.5).abs() < 1e-15);
        assert_eq!(step(-1.0), 0.0);
        assert_eq!(step(1.0), 1.0);
    }

    #[test]
    fn arc_is_continuous_at_corners() {
        let rho = 0.3;
        assert!((arc(rho, rho, rho) - 2.0 * rho).abs() < 1e-15);
        assert!((arc(-rho, rho, rho) - 4.0 * rho).abs() < 1e-15);
        assert!((arc(-rho, -rho, rho) - 6.0 * rho).abs() < 1e-15);
        assert_eq!(arc(rho, -rho, rho), 0.0);
    }

    proptest! {
        #[test]
        fn twist_roundtrip(x in 0.0f64..1.0, y in 0.0f64..1.0, eps in 0.01f64..0.24) {
            let t = SquareTwist::new(eps);
            let (a, b) = t.apply(x, y, false);
            let (c, d) = t.apply(a, b, true);
            prop_assert!((c - x).abs() < 1e-12 && (d - y).abs() < 1e-12);
        }

        #[test]
        fn twist_preserves_sup_radius(x in 0.0f64..1.0, y in 0.0f64..1.0, eps in 0.01f64..0.24) {
            let t = SquareTwist::new(eps);
            let (a, b) = t.apply(x, y, false);
            let r0 = (x - 0.5).abs().max((y - 0.5).abs());
            let r1 = (a - 0.5).abs().max((b - 0.5).abs());
            prop_assert!((r0 - r1).abs() < 1e-14);
        }
    }
}
