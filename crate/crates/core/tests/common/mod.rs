//! Random instance generators shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regcalc::expr::{BinOp, Expr, Func};
use regcalc::extreal::ExtReal;
use regcalc::regulated::PiecewiseFn;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `c[0] + c[1] (x - at) + c[2] (x - at)^2 + ...`
pub fn poly(c: &[f64], at: f64) -> Expr {
    let u = Expr::sub(Expr::X, Expr::num(at));
    let mut e = Expr::num(c[0]);
    for (k, &ck) in c.iter().enumerate().skip(1) {
        let p = if k == 1 { u.clone() } else { Expr::pow(u.clone(), Expr::num(k as f64)) };
        e = Expr::add(e, Expr::mul(Expr::num(ck), p));
    }
    e
}

/// Cells `(a, c_1], (c_1, c_2], ..., (c_k, b)` with one body each.
#[derive(Debug, Clone)]
pub struct Pw {
    pub a: f64,
    pub b: f64,
    pub cuts: Vec<f64>,
    pub bodies: Vec<Expr>,
}

impl Pw {
    pub fn build(&self, name: &str) -> PiecewiseFn {
        let mut bld = PiecewiseFn::builder(name, ExtReal::Finite(self.a), ExtReal::Finite(self.b));
        let ends: Vec<f64> = std::iter::once(self.a).chain(self.cuts.iter().copied()).chain(std::iter::once(self.b)).collect();
        for (w, body) in ends.windows(2).zip(&self.bodies) {
            bld = bld.piece(w[0], w[1], body.clone());
        }
        bld.build().unwrap_or_else(|e| panic!("{name}: {e}"))
    }

    /// Left end of each cell.
    pub fn lefts(&self) -> Vec<f64> {
        std::iter::once(self.a).chain(self.cuts.iter().copied()).collect()
    }

    /// Each body minus `slope (x - at)`.
    pub fn tilted(&self, slope: f64, at: f64) -> Pw {
        let line = poly(&[0.0, slope], at);
        Pw { bodies: self.bodies.iter().map(|b| Expr::sub(b.clone(), line.clone())).collect(), ..self.clone() }
    }

    /// `x -> f(-x)` on `(-b, -a)`.
    pub fn reflected(&self) -> Pw {
        let mx = Expr::neg(Expr::X);
        Pw {
            a: -self.b,
            b: -self.a,
            cuts: self.cuts.iter().rev().map(|c| -c).collect(),
            bodies: self.bodies.iter().rev().map(|e| e.subst_x(&mx)).collect(),
        }
    }

    /// `-f(-x)` on `(-b, -a)`.
    pub fn reflected_negated(&self) -> Pw {
        let r = self.reflected();
        Pw { bodies: r.bodies.into_iter().map(Expr::neg).collect(), ..r }
    }
}

pub fn sorted_cuts(r: &mut impl Rng, a: f64, b: f64, k: usize, min_gap: f64) -> Vec<f64> {
    loop {
        let mut cs: Vec<f64> = (0..k).map(|_| (r.gen_range(a..b) * 64.0).round() / 64.0).collect();
        cs.sort_by(f64::total_cmp);
        let ok = std::iter::once(a).chain(cs.iter().copied()).chain(std::iter::once(b)).collect::<Vec<_>>().windows(2).all(|w| w[1] - w[0] >= min_gap);
        if ok {
            return cs;
        }
    }
}

/// Builds bodies cell by cell: each body is `poly(coeffs)` anchored at the
/// cell's left end, with the constant term replaced by the previous cell's
/// end value plus `jump(i)` (`v0` for the first cell).
pub fn chained(a: f64, b: f64, cuts: Vec<f64>, mut coeffs: impl FnMut(usize) -> Vec<f64>, mut jump: impl FnMut(usize) -> f64, v0: f64) -> Pw {
    let lefts: Vec<f64> = std::iter::once(a).chain(cuts.iter().copied()).collect();
    let rights: Vec<f64> = cuts.iter().copied().chain(std::iter::once(b)).collect();
    let mut bodies = Vec::new();
    let mut v = v0;
    for i in 0..lefts.len() {
        let mut c = coeffs(i);
        c[0] = v;
        let body = poly(&c, lefts[i]);
        if i + 1 < lefts.len() {
            v = body.eval(rights[i], None).unwrap() + jump(i);
        }
        bodies.push(body);
    }
    Pw { a, b, cuts, bodies }
}

/// Strictly increasing base with slope at least 0.5 and positive jumps at
/// the cuts where `atom(i)` holds.
pub fn increasing(r: &mut impl Rng, a: f64, b: f64, cuts: Vec<f64>, atom: &[bool]) -> Pw {
    let coeffs: Vec<Vec<f64>> = (0..=cuts.len()).map(|_| vec![0.0, r.gen_range(0.5..2.0), r.gen_range(0.0..0.5), r.gen_range(0.0..0.3)]).collect();
    let jumps: Vec<f64> = atom.iter().map(|&j| if j { r.gen_range(0.1..1.5) } else { 0.0 }).collect();
    let v0 = r.gen_range(-1.0..1.0);
    chained(a, b, cuts, |i| coeffs[i].clone(), |i| jumps[i], v0)
}

/// Cubic bodies with arbitrary coefficients, jumping only where `may_jump`.
pub fn wiggly(r: &mut impl Rng, a: f64, b: f64, cuts: Vec<f64>, may_jump: &[bool]) -> Pw {
    let coeffs: Vec<Vec<f64>> = (0..=cuts.len()).map(|_| (0..4).map(|_| r.gen_range(-2.0..2.0)).collect()).collect();
    let jumps: Vec<f64> = may_jump.iter().map(|&j| if j && r.gen_bool(0.7) { r.gen_range(-2.0..2.0) } else { 0.0 }).collect();
    let v0 = r.gen_range(-1.0..1.0);
    chained(a, b, cuts, |i| coeffs[i].clone(), |i| jumps[i], v0)
}

/// Random expression trees over the whole grammar.
pub fn any_expr(r: &mut impl Rng, depth: usize) -> Expr {
    if depth == 0 || r.gen_bool(0.25) {
        return match r.gen_range(0..6) {
            0 => Expr::X,
            1 => Expr::N,
            2 => Expr::Pi,
            3 => Expr::E,
            4 => Expr::Num(r.gen_range(0..1000) as f64 / 8.0),
            _ => Expr::Num(r.gen_range(0.0..1e3)),
        };
    }
    match r.gen_range(0..4) {
        0 => Expr::neg(any_expr(r, depth - 1)),
        1 => Expr::call(Func::ALL[r.gen_range(0..Func::ALL.len())], any_expr(r, depth - 1)),
        _ => {
            let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow][r.gen_range(0..5)];
            Expr::bin(op, any_expr(r, depth - 1), any_expr(r, depth - 1))
        }
    }
}

/// Expressions differentiable everywhere on the reals, with logs and roots
/// only of arguments bounded away from zero.
pub fn smooth_expr(r: &mut impl Rng, depth: usize) -> Expr {
    if depth == 0 || r.gen_bool(0.2) {
        return if r.gen_bool(0.6) { Expr::X } else { Expr::num(r.gen_range(-3.0..3.0)) };
    }
    let sub = |r: &mut _| smooth_expr(r, depth - 1);
    let one_plus_sq = |e: Expr| Expr::add(Expr::num(1.0), Expr::pow(e, Expr::num(2.0)));
    match r.gen_range(0..11) {
        0 => Expr::add(sub(r), sub(r)),
        1 => Expr::sub(sub(r), sub(r)),
        2 | 3 => Expr::mul(sub(r), sub(r)),
        4 => Expr::div(sub(r), one_plus_sq(sub(r))),
        5 => Expr::call(Func::Sin, sub(r)),
        6 => Expr::call(Func::Cos, sub(r)),
        7 => Expr::call(Func::Exp, Expr::call(Func::Sin, sub(r))),
        8 => Expr::call(Func::Ln, one_plus_sq(sub(r))),
        9 => Expr::call(if r.gen_bool(0.5) { Func::Sqrt } else { Func::Cbrt }, one_plus_sq(sub(r))),
        _ => Expr::pow(sub(r), Expr::num(r.gen_range(2..4) as f64)),
    }
}

/// Central difference with step `h`.
pub fn central_diff(e: &Expr, x: f64, h: f64) -> Option<f64> {
    let hi = e.eval(x + h, None).ok()?;
    let lo = e.eval(x - h, None).ok()?;
    let d = (hi - lo) / (2.0 * h);
    d.is_finite().then_some(d)
}

/// Relative-plus-absolute closeness.
pub fn close(a: f64, b: f64, rtol: f64, atol: f64) -> bool {
    (a - b).abs() <= atol.max(rtol * a.abs().max(b.abs()))
}

/// Body value and derivative of the cell meeting `x` from the left (or
/// from the right).
pub fn side(p: &Pw, x: f64, left: bool) -> (f64, f64) {
    let lefts = p.lefts();
    let i = lefts.iter().rposition(|&l| if left { l < x } else { l <= x }).expect("x inside the domain");
    let body = &p.bodies[i];
    (body.eval(x, None).unwrap(), body.diff().unwrap().eval(x, None).unwrap())
}

/// Test-side `(D_α f)(x)`: the jump ratio where `α` jumps, else the ratio of
/// summed one-sided body derivatives.
pub fn dalpha_oracle(f: &Pw, alpha: &Pw, x: f64) -> f64 {
    let (al, dal) = side(alpha, x, true);
    let (ar, dar) = side(alpha, x, false);
    let (fl, dfl) = side(f, x, true);
    let (fr, dfr) = side(f, x, false);
    if (ar - al).abs() > 1e-12 {
        (fr - fl) / (ar - al)
    } else {
        (dfl + dfr) / (dal + dar)
    }
}

/// `f = x p(x)` and `g = x q(x)` near 0 on `(0, 1)` with `q > 0`, `g`
/// increasing and jumping up at every cut, and every cut an atom of `alpha`.
/// Returns `(f, g, alpha, p(0)/q(0))`.
pub fn vanishing_pair(rng: &mut impl Rng) -> (Pw, Pw, Pw, f64) {
    let k = rng.gen_range(1..5);
    let cuts = sorted_cuts(rng, 0.0, 1.0, k, 0.05);
    let alpha = increasing(rng, 0.0, 1.0, cuts.clone(), &vec![true; k]);
    let gc: Vec<Vec<f64>> = (0..=k).map(|_| vec![0.0, rng.gen_range(0.5..2.0), rng.gen_range(0.0..1.0)]).collect();
    let gj: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..1.0)).collect();
    let fc: Vec<Vec<f64>> = (0..=k).map(|_| (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let fj: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let g = chained(0.0, 1.0, cuts.clone(), |j| gc[j].clone(), |j| gj[j], 0.0);
    let f = chained(0.0, 1.0, cuts, |j| fc[j].clone(), |j| fj[j], 0.0);
    (f, g, alpha, fc[0][1] / gc[0][1])
}
