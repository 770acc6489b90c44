//! Finite-difference estimates of `C^k` norms and distances of map nodes.
//!
//! `|||f|||_k` is the largest partial derivative of order `1..=k` of `f` and
//! `f^{-1}`, floored by the order-0 term 1 (coordinates of a lift of a torus
//! map restricted to the unit square are bounded by 1). First partials of
//! composites follow the chain rule over their factors; first and second
//! differences use Richardson extrapolation over steps `h` and `h/2`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::diffeo::{circle_diff, jacobian_at, MapNode, TorusPoint};
use crate::error::{AbcError, Result};
use crate::report::fmt_f64;

/// Chain-rule slack used by the submultiplicativity and Bowen-ball checks.
pub const SLACK_C: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub k: u32,
    pub value: f64,
    pub grid: usize,
    pub fd_step: f64,
    /// Fraction of grid points whose stencil crossed a seam between pieces.
    pub excluded_fraction: f64,
    /// Largest gap between the Richardson value and the plain `h/2` value.
    pub discrepancy: f64,
    pub warnings: Vec<String>,
}

/// Values sampled around a centre: `[dx, dy]` relative to a reference.
type Field<'a> = dyn Fn(TorusPoint) -> [f64; 2] + 'a;

fn pt(p: TorusPoint, dx: f64, dy: f64) -> TorusPoint {
    TorusPoint::new(p.x + dx, p.y + dy)
}

fn stencil(p: TorusPoint, h: f64) -> Vec<TorusPoint> {
    let mut v = Vec::with_capacity(16);
    for s in [h, h / 2.0] {
        v.extend([pt(p, s, 0.0), pt(p, -s, 0.0), pt(p, 0.0, s), pt(p, 0.0, -s)]);
        v.extend([pt(p, s, s), pt(p, s, -s), pt(p, -s, s), pt(p, -s, -s)]);
    }
    v
}

fn second(f: &Field, p: TorusPoint, h: f64) -> [f64; 6] {
    let c = f(p);
    let h2 = h * h;
    let xx = [f(pt(p, h, 0.0)), f(pt(p, -h, 0.0))];
    let yy = [f(pt(p, 0.0, h)), f(pt(p, 0.0, -h))];
    let xy = [f(pt(p, h, h)), f(pt(p, h, -h)), f(pt(p, -h, h)), f(pt(p, -h, -h))];
    let mut out = [0.0; 6];
    for i in 0..2 {
        out[i] = (xx[0][i] - 2.0 * c[i] + xx[1][i]) / h2;
        out[2 + i] = (yy[0][i] - 2.0 * c[i] + yy[1][i]) / h2;
        out[4 + i] = (xy[0][i] - xy[1][i] - xy[2][i] + xy[3][i]) / (4.0 * h2);
    }
    out
}

fn richardson<const N: usize>(coarse: [f64; N], fine: [f64; N]) -> (f64, f64) {
    let mut best: f64 = 0.0;
    let mut disc: f64 = 0.0;
    for i in 0..N {
        let r = (4.0 * fine[i] - coarse[i]) / 3.0;
        best = best.max(r.abs());
        disc = disc.max((r - fine[i]).abs());
    }
    (best, disc)
}

fn flat(j: [[f64; 2]; 2]) -> [f64; 4] {
    [j[0][0], j[0][1], j[1][0], j[1][1]]
}

/// First partials by the chain rule with Richardson over `h`, `h/2`.
fn first_order(node: &MapNode, p: TorusPoint, h: f64, inverse: bool) -> Option<([f64; 4], [f64; 4])> {
    let a = jacobian_at(node, p, h, inverse)?;
    let b = jacobian_at(node, p, h / 2.0, inverse)?;
    Some((flat(a), flat(b)))
}

fn diff4(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
}

fn second_order(f: &Field, p: TorusPoint, h: f64) -> (f64, f64) {
    richardson(second(f, p, h), second(f, p, h / 2.0))
}

fn grid_points(grid: usize) -> Vec<TorusPoint> {
    let g = grid as f64;
    (0..grid)
        .flat_map(|j| (0..grid).map(move |i| TorusPoint::new((i as f64 + 0.5) / g, (j as f64 + 0.5) / g)))
        .collect()
}

#[derive(Default)]
struct Local {
    order0: f64,
    d1: f64,
    d2: f64,
    disc: f64,
}

struct Sweep {
    local: Local,
    excluded: usize,
    total: usize,
}

/// Sweeps the grid in parallel; `eval` returns `None` for excluded centres.
fn sweep<F>(grid: usize, eval: F) -> Sweep
where
    F: Fn(TorusPoint) -> Option<Local> + Sync,
{
    let pts = grid_points(grid);
    let parts: Vec<Option<Local>> = pts.par_iter().map(|&p| eval(p)).collect();
    let mut s = Sweep { local: Local::default(), excluded: 0, total: pts.len() };
    for r in parts {
        match r {
            Some(l) => {
                s.local.order0 = s.local.order0.max(l.order0);
                s.local.d1 = s.local.d1.max(l.d1);
                s.local.d2 = s.local.d2.max(l.d2);
                s.local.disc = s.local.disc.max(l.disc);
            }
            None => s.excluded += 1,
        }
    }
    s
}

/// The whole second-order stencil stays in one piece of `node`.
fn same_piece(node: &MapNode, p: TorusPoint, h: f64, inverse: bool) -> bool {
    let id = node.piece(p, inverse);
    stencil(p, h).into_iter().all(|q| node.piece(q, inverse) == id)
}

fn check_args(k: u32, grid: usize, fd_step: f64) -> Result<()> {
    if k > 2 {
        return Err(AbcError::Invalid(format!("norm order {k} not supported (0..=2)")));
    }
    if grid == 0 || !(fd_step > 0.0 && fd_step < 0.01) {
        return Err(AbcError::Invalid(format!("need grid > 0 and fd_step in (0, 0.01), got {grid}, {fd_step}")));
    }
    Ok(())
}

fn resolution_warning(nodes: &[&MapNode], fd_step: f64) -> Vec<String> {
    let mag = nodes.iter().map(|n| n.magnification()).fold(1.0, f64::max);
    if fd_step * mag > 0.05 {
        vec![format!("fd_step {fd_step} does not resolve blocks of width ~{}", fmt_f64(1.0 / mag))]
    } else {
        vec![]
    }
}

/// `|||node|||_k` over a `grid x grid` lattice of cell centres.
pub fn triple_norm(node: &MapNode, k: u32, grid: usize, fd_step: f64) -> Result<NormEstimate> {
    check_args(k, grid, fd_step)?;
    let mut value: f64 = 1.0;
    let mut disc: f64 = 0.0;
    let mut excluded = 0;
    let mut total = 0;
    if k >= 1 {
        for inverse in [false, true] {
            let s = sweep(grid, |p| {
                let (a, b) = first_order(node, p, fd_step, inverse)?;
                let (d1, mut disc) = richardson(a, b);
                let mut d2 = 0.0;
                if k >= 2 {
                    if !same_piece(node, p, fd_step, inverse) {
                        return None;
                    }
                    let c = node.apply(p, inverse);
                    let f = |q: TorusPoint| {
                        let v = node.apply(q, inverse);
                        [circle_diff(v.x, c.x), circle_diff(v.y, c.y)]
                    };
                    let (v, d) = second_order(&f, p, fd_step);
                    d2 = v;
                    disc = disc.max(d);
                }
                Some(Local { order0: 0.0, d1, d2, disc })
            });
            value = value.max(s.local.d1).max(s.local.d2);
            disc = disc.max(s.local.disc);
            excluded += s.excluded;
            total += s.total;
        }
    }
    Ok(NormEstimate {
        k,
        value,
        grid,
        fd_step,
        excluded_fraction: if total > 0 { excluded as f64 / total as f64 } else { 0.0 },
        discrepancy: disc,
        warnings: resolution_warning(&[node], fd_step),
    })
}

/// `d_k(f, g)`: sup of `f - g` (minimised over integer shifts) and of the
/// partials of `f - g` up to order `k`, for the maps and their inverses.
pub fn dk_distance(f: &MapNode, g: &MapNode, k: u32, grid: usize, fd_step: f64) -> Result<NormEstimate> {
    check_args(k, grid, fd_step)?;
    let mut value: f64 = 0.0;
    let mut disc: f64 = 0.0;
    let mut excluded = 0;
    let mut total = 0;
    for inverse in [false, true] {
        let s = sweep(grid, |p| {
            let diff = |q: TorusPoint| {
                let a = f.apply(q, inverse);
                let b = g.apply(q, inverse);
                [circle_diff(a.x, b.x), circle_diff(a.y, b.y)]
            };
            let c = diff(p);
            let mut out = Local { order0: c[0].abs().max(c[1].abs()), ..Local::default() };
            if k >= 1 {
                let (fa, fb) = first_order(f, p, fd_step, inverse)?;
                let (ga, gb) = first_order(g, p, fd_step, inverse)?;
                let (d1, disc) = richardson(diff4(fa, ga), diff4(fb, gb));
                out.d1 = d1;
                out.disc = disc;
            }
            if k >= 2 {
                if !(same_piece(f, p, fd_step, inverse) && same_piece(g, p, fd_step, inverse)) {
                    return None;
                }
                let (d2, disc) = second_order(&diff, p, fd_step);
                out.d2 = d2;
                out.disc = out.disc.max(disc);
            }
            Some(out)
        });
        value = value.max(s.local.order0).max(s.local.d1).max(s.local.d2);
        disc = disc.max(s.local.disc);
        excluded += s.excluded;
        total += s.total;
    }
    Ok(NormEstimate {
        k,
        value,
        grid,
        fd_step,
        excluded_fraction: excluded as f64 / total as f64,
        discrepancy: disc,
        warnings: resolution_warning(&[f, g], fd_step),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubmultReport {
    pub composite: f64,
    pub left: f64,
    pub right: f64,
    pub c: f64,
}

impl SubmultReport {
    pub fn holds(&self) -> bool {
        self.composite <= self.c * self.left * self.right
    }
}

/// `|||f ∘ g|||_1` against `C |||f|||_1 |||g|||_1`.
pub fn check_submultiplicative(f: &MapNode, g: &MapNode, grid: usize, fd_step: f64) -> Result<SubmultReport> {
    let fg = MapNode::compose(vec![f.clone(), g.clone()]);
    Ok(SubmultReport {
        composite: triple_norm(&fg, 1, grid, fd_step)?.value,
        left: triple_norm(f, 1, grid, fd_step)?.value,
        right: triple_norm(g, 1, grid, fd_step)?.value,
        c: SLACK_C,
    })
}

/// Upper bound `4 C^4 |||H_n|||_1^4 / eps^2` on Bowen-ball covers of `T_n`.
pub fn bowen_cover_bound(h_norm: f64, eps: f64) -> f64 {
    4.0 * SLACK_C.powi(4) * h_norm.powi(4) / (eps * eps)
}

/// Cover bound `(8 ||DH_{n-1}||)^3 ||D phi||^2 q_n / eps^3` for the untwisted construction.
pub fn untwisted_cover_bound(dh_prev: f64, dphi: f64, q_n: f64, eps: f64) -> f64 {
    (8.0 * dh_prev).powi(3) * dphi * dphi * q_n / eps.powi(3)
}

fn csv_field(s: &str) -> String {
    let s = s.trim().replace('\n', "; ");
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s
    }
}

/// CSV with columns `node,k,estimate,grid,fd_step,excluded_fraction`.
pub fn norms_csv(header: &str, rows: &[(String, NormEstimate)]) -> String {
    let mut out = String::from(header);
    out.push_str("node,k,estimate,grid,fd_step,excluded_fraction\n");
    for (name, e) in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            csv_field(name),
            e.k,
            fmt_f64(e.value),
            e.grid,
            fmt_f64(e.fd_step),
            fmt_f64(e.excluded_fraction)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffeo::{HorizontalStepShear, TiledTwist};
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use proptest::prelude::*;

    fn rot(num: i64, den: i64) -> MapNode {
        MapNode::rotation(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    fn phi(q: u64, eps: f64) -> MapNode {
        MapNode::QuasiRotTiled(TiledTwist { q, eps })
    }

    #[test]
    fn identity_and_rotation_have_unit_norm() {
        for node in [MapNode::Identity, rot(1, 3)] {
            let e = triple_norm(&node, 1, 40, 1e-6).unwrap();
            assert!((e.value - 1.0).abs() < 1e-6, "{}", e.value);
            assert_eq!(e.excluded_fraction, 0.0);
        }
    }

    #[test]
    fn tiled_twist_norm_grows_linearly_in_q() {
        let a = triple_norm(&phi(4, 0.1), 1, 200, 1e-6).unwrap().value;
        let b = triple_norm(&phi(8, 0.1), 1, 200, 1e-6).unwrap().value;
        let r = b / a;
        assert!((1.5..=2.5).contains(&r), "{a} {b} {r}");
    }

    #[test]
    fn norms_are_at_least_one() {
        let e = triple_norm(&phi(4, 0.1), 1, 60, 1e-6).unwrap();
        assert!(e.value >= 1.0 - 1e-6);
        let e2 = triple_norm(&phi(4, 0.1), 2, 60, 1e-5).unwrap();
        assert!(e2.value >= e.value * 0.5);
    }

    #[test]
    fn shear_norm_scales_with_b() {
        let mk = |b: u64| {
            let q = 4;
            let a = b * 2 * q * q * q;
            MapNode::HorizontalStepShear(HorizontalStepShear { q, b, a, j0: a / 8, eps: 0.25 })
        };
        let n1 = triple_norm(&mk(2), 1, 400, 1e-7).unwrap().value;
        let n2 = triple_norm(&mk(4), 1, 400, 1e-7).unwrap().value;
        let r = n2 / n1;
        assert!((2.0 / 3.0..=6.0).contains(&r), "{n1} {n2}");
        assert!(n1 > 1.0);
    }

    #[test]
    fn distance_between_rotations() {
        let d = dk_distance(&rot(1, 10), &rot(1, 4), 0, 20, 1e-6).unwrap();
        assert!((d.value - 0.15).abs() < 1e-12);
        let d = dk_distance(&rot(1, 10), &rot(19, 20), 0, 20, 1e-6).unwrap();
        assert!((d.value - 0.15).abs() < 1e-12);
        let d = dk_distance(&phi(4, 0.1), &phi(4, 0.1), 1, 30, 1e-6).unwrap();
        assert_eq!(d.value, 0.0);
    }

    #[test]
    fn conjugated_rotation_distance_is_linear_in_gap() {
        let h = phi(2, 0.1);
        let d = |den: i64| {
            let a = MapNode::conjugate(h.clone(), rot(1, 7));
            let b = MapNode::conjugate(h.clone(), MapNode::rotation(
                BigRational::new(BigInt::from(1), BigInt::from(7)) + BigRational::new(BigInt::from(1), BigInt::from(den)),
            ));
            dk_distance(&a, &b, 1, 60, 1e-7).unwrap().value
        };
        let h2 = triple_norm(&h, 2, 60, 1e-5).unwrap().value;
        let c1 = d(1000) / (h2 * h2 / 1000.0);
        let c2 = d(2000) / (h2 * h2 / 2000.0);
        assert!(c1 > 0.0 && (c1 / c2 - 1.0).abs() < 0.5, "{c1} {c2}");
    }

    #[test]
    fn submultiplicative_examples() {
        let id = MapNode::Identity;
        assert!(check_submultiplicative(&id, &id, 20, 1e-6).unwrap().holds());
        let p = phi(4, 0.1);
        assert!(check_submultiplicative(&rot(1, 3), &p, 80, 1e-6).unwrap().holds());
        assert!(check_submultiplicative(&p, &p, 80, 1e-6).unwrap().holds());
    }

    #[test]
    fn bad_arguments() {
        assert!(triple_norm(&MapNode::Identity, 3, 10, 1e-6).is_err());
        assert!(triple_norm(&MapNode::Identity, 1, 0, 1e-6).is_err());
        assert!(!triple_norm(&phi(1 << 20, 0.1), 1, 4, 1e-6).unwrap().warnings.is_empty());
    }

    #[test]
    fn csv_quotes_descriptions() {
        let e = triple_norm(&MapNode::Identity, 1, 4, 1e-6).unwrap();
        let csv = norms_csv("", &[("a, b".into(), e)]);
        assert!(csv.lines().nth(1).unwrap().starts_with("\"a, b\",1,1"));
        assert!(csv.lines().nth(1).unwrap().ends_with(",4,1e-6,0"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn distance_is_pseudometric(a in 0i64..20, b in 0i64..20, c in 0i64..20) {
            let (f, g, h) = (rot(a, 20), rot(b, 20), rot(c, 20));
            let fg = dk_distance(&f, &g, 1, 8, 1e-6).unwrap().value;
            let gf = dk_distance(&g, &f, 1, 8, 1e-6).unwrap().value;
            let gh = dk_distance(&g, &h, 1, 8, 1e-6).unwrap().value;
            let fh = dk_distance(&f, &h, 1, 8, 1e-6).unwrap().value;
            prop_assert_eq!(fg, gf);
            prop_assert!(fh <= fg + gh + 1e-9);
        }
    }
}
