//! Stolz–Cesàro as an instance of the `D_α` rule.
//!
//! `F` is the polyline through `(m, f_1 + ... + f_{m+1})`, so on `(m, m+1)`
//! it has slope `f_{m+2}` and `F(n-1) = F_n`. With `α(x) = x`, `D_αF` is
//! `f_{m+2}` inside a cell and `(f_{m+2} + f_{m+3})/2` at the node `m+1`.

use crate::extreal::ExtReal;
use crate::limit::LimitStatus;
use crate::regulated::{end_behavior, Endpoint, PiecewiseFn, PolylineFn, Regulated};
use crate::sequence::Sequence;
use crate::stieltjes::{d_alpha_with, Options};

use super::{lhospital_limit, limit_evidence, Hypothesis, Oracle, RuleConfig, RuleError, RuleReport};

/// Construction checks hold to this absolute-plus-relative tolerance.
pub const CONSTRUCTION_TOL: f64 = 1e-9;
/// Nodes up to this index are also checked with the numeric quotient.
const NUMERIC_CHECK_NODES: usize = 64;

/// The polyline `F` for a sequence, with nodes `0..=n`.
pub fn partial_sum_polyline(name: &str, seq: &Sequence, n: usize) -> Result<PolylineFn, RuleError> {
    let terms = seq.terms(1, n as i64 + 1).map_err(|e| RuleError::Input(format!("sequence `{name}`: {e}")))?;
    Ok(PolylineFn::unit_steps(name, terms[0], &terms[1..], ExtReal::PosInf)?)
}

/// Sample nodes: every node up to 64, then a geometric sweep.
fn sample_nodes(last: usize) -> Vec<usize> {
    let mut ms: Vec<usize> = (0..last.min(NUMERIC_CHECK_NODES)).collect();
    let mut m = NUMERIC_CHECK_NODES;
    while m < last {
        ms.push(m);
        m = m * 3 / 2;
    }
    ms
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= CONSTRUCTION_TOL * (1.0 + b.abs())
}

/// Checks `D_αF(m + 1/2) = f_{m+2}` and `D_αF(m+1) = (f_{m+2}+f_{m+3})/2`.
pub fn construction_check(big: &PolylineFn, seq: &Sequence, id: &dyn Regulated) -> Hypothesis {
    let name = format!("D_α{} matches the construction", big.name());
    let last = big.horizon().unwrap_or(0.0) as usize;
    let nodes = sample_nodes(last.saturating_sub(2));
    let mut checked = 0;
    for &m in &nodes {
        let (fa, fb) = match (seq.at(m as i64 + 2), seq.at(m as i64 + 3)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => return Hypothesis::new(&name, false, e.to_string()),
        };
        let inside = m as f64 + 0.5;
        let node = m as f64 + 1.0;
        let mut probes = vec![(inside, fa, Options::default()), (node, (fa + fb) / 2.0, Options::default())];
        if m < NUMERIC_CHECK_NODES {
            probes.push((inside, fa, Options::numeric()));
            probes.push((node, (fa + fb) / 2.0, Options::numeric()));
        }
        for (x, want, opts) in probes {
            match d_alpha_with(big, id, x, &opts) {
                Ok(r) if r.value.finite().is_some_and(|v| close(v, want)) => checked += 1,
                Ok(r) => return Hypothesis::new(&name, false, format!("D_α{}({x}) = {} but expected {want}", big.name(), r.value)),
                Err(e) => return Hypothesis::new(&name, false, e.to_string()),
            }
        }
    }
    Hypothesis::new(&name, true, format!("{checked} probes at {} nodes up to {}", nodes.len(), nodes.last().map_or(0, |m| m + 1)))
}

/// `lim F_n/G_n` from `lim f_n/g_n` through the polylines, for
/// `n <= n_probe`. Data sequences shorter than `n_probe + 3` terms cut the
/// probe horizon.
pub fn stolz_limit(f_seq: &Sequence, g_seq: &Sequence, n_probe: usize, cfg: &RuleConfig) -> Result<RuleReport, RuleError> {
    let available = [f_seq.last_index(), g_seq.last_index()].into_iter().flatten().min();
    let n = match available {
        Some(last) if last < n_probe as i64 + 3 => (last - 3).max(0) as usize,
        _ => n_probe,
    };
    if n < 16 {
        return Err(RuleError::Input(format!("need at least 19 terms, have {}", n + 3)));
    }
    let nodes = n + 2;
    let big_f = partial_sum_polyline("F", f_seq, nodes)?;
    let big_g = partial_sum_polyline("G", g_seq, nodes)?;
    let id = PiecewiseFn::single("id", ExtReal::Finite(0.0), ExtReal::PosInf, "x".parse().expect("identity parses"))?;

    let mut hyps = Vec::new();
    let gs = g_seq.terms(1, n as i64).map_err(|e| RuleError::Input(format!("sequence g: {e}")))?;
    let bad = gs.iter().position(|&v| !(v > 0.0));
    hyps.push(Hypothesis::new(
        "g_n > 0",
        bad.is_none(),
        match bad {
            None => format!("checked n = 1..{n}"),
            Some(i) => format!("g_{} = {}", i + 1, gs[i]),
        },
    ));
    hyps.push(construction_check(&big_f, f_seq, &id));
    hyps.push(construction_check(&big_g, g_seq, &id));
    let growth = end_behavior(&big_g, Endpoint::B, &cfg.engine);
    hyps.push(Hypothesis::new("G_n -> inf", growth.status == LimitStatus::DivergedPos, limit_evidence(&growth)));

    let inner = lhospital_limit(&big_f, &big_g, &id, Endpoint::B, cfg)?;

    let (_, fy) = big_f.nodes();
    let (_, gy) = big_g.nodes();
    let ys: Vec<f64> = std::iter::successors(Some(4usize), |k| Some(k * 2))
        .take_while(|&k| k <= n)
        .map(|k| fy[k - 1] / gy[k - 1])
        .collect();
    let oracle = cfg.engine.from_samples(&ys);

    hyps.extend(inner.hypotheses);
    let ok = hyps.iter().all(|h| h.status != super::HypStatus::Failed);
    let conclusion = inner.conclusion.filter(|_| ok);
    let agree = match &conclusion {
        Some(super::Conclusion::Limit(a)) => cfg.agrees(*a, &oracle),
        _ => false,
    };
    Ok(RuleReport { rule: "stolz".into(), hypotheses: hyps, case: inner.case, conclusion, oracle: Some(Oracle::Limit(oracle)), agree })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stieltjes::d_alpha;

    #[test]
    fn polyline_matches_partial_sums() {
        let s = Sequence::Closed("2*n + 1".parse().unwrap());
        let p = partial_sum_polyline("F", &s, 10).unwrap();
        // F(n-1) = F_n = n^2 + 2n
        for n in 2..=11 {
            assert_eq!(p.value((n - 1) as f64).unwrap(), (n * n + 2 * n) as f64);
        }
        let id = PiecewiseFn::single("id", ExtReal::Finite(0.0), ExtReal::PosInf, "x".parse().unwrap()).unwrap();
        assert_eq!(d_alpha(&p, &id, 2.0).unwrap().value, ExtReal::Finite(8.0));
    }

    #[test]
    fn constant_sequences() {
        let one = Sequence::Closed("1".parse().unwrap());
        let r = stolz_limit(&one, &one, 10_000, &RuleConfig::default()).unwrap();
        assert!(r.all_verified() && r.agree, "{r:#?}");
        assert_eq!(r.limit(), Some(ExtReal::Finite(1.0)));
    }
}
