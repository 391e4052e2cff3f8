//! Five-point Gauss-Legendre rule.

const NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];

const WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Nodes `u` in `[0, 1]` and weights summing to 1.
pub fn unit_rule() -> [(f64, f64); 5] {
    let mut out = [(0.0, 0.0); 5];
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = (0.5 * (1.0 + NODES[k]), 0.5 * WEIGHTS[k]);
    }
    out
}

/// `int_lo^hi f(s) ds`.
pub fn integrate<F: FnMut(f64) -> f64>(lo: f64, hi: f64, mut f: F) -> f64 {
    let h = hi - lo;
    unit_rule().iter().map(|&(u, w)| w * f(lo + h * u)).sum::<f64>() * h
}
