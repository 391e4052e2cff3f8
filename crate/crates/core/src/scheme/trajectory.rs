use std::io::{Read, Write};

use crate::kernel::check_finite;
use crate::{Error, Result, Vector};

/// A piecewise-linear path on `[0, 1]` with knots at `t = k / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    knots: Vec<Vector>,
}

impl Trajectory {
    /// Requires at least two knots of a common, positive dimension.
    pub fn new(knots: Vec<Vector>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidParameter("a trajectory needs at least two knots".into()));
        }
        let d = knots[0].len();
        if d == 0 {
            return Err(Error::InvalidParameter("knots must have positive dimension".into()));
        }
        for k in &knots {
            if k.len() != d {
                return Err(Error::Dimension {
                    what: "knot",
                    expected: d,
                    got: k.len(),
                });
            }
            check_finite(k, "knot")?;
        }
        Ok(Self { knots })
    }

    pub fn constant(x: &Vector, n: usize) -> Result<Self> {
        Self::new(vec![x.clone(); n.max(1) + 1])
    }

    /// The segment from `from` to `to` sampled on `n` steps.
    pub fn straight_line(from: &Vector, to: &Vector, n: usize) -> Result<Self> {
        let n = n.max(1);
        Self::new(
            (0..=n)
                .map(|k| {
                    let u = k as f64 / n as f64;
                    from * (1.0 - u) + to * u
                })
                .collect(),
        )
    }

    /// Step count `n` (one less than the knot count).
    pub fn n(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.knots[0].len()
    }

    pub fn knots(&self) -> &[Vector] {
        &self.knots
    }

    pub fn knot(&self, k: usize) -> &Vector {
        &self.knots[k]
    }

    pub fn start(&self) -> &Vector {
        &self.knots[0]
    }

    pub fn end(&self) -> &Vector {
        &self.knots[self.n()]
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 / self.n() as f64
    }

    /// Constant derivative on segment `k` (between knots `k - 1` and `k`), `1 <= k <= n`.
    pub fn slope(&self, k: usize) -> Vector {
        (&self.knots[k] - &self.knots[k - 1]) * self.n() as f64
    }

    /// Value at `t`; knots are reproduced exactly.
    pub fn eval(&self, t: f64) -> Result<Vector> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::TimeOutOfRange(t));
        }
        Ok(self.eval_unchecked(t))
    }

    pub(crate) fn eval_unchecked(&self, t: f64) -> Vector {
        let n = self.n();
        let r = t * n as f64;
        let nearest = r.round();
        if (r - nearest).abs() <= 4.0 * f64::EPSILON * n as f64 {
            return self.knots[(nearest as usize).min(n)].clone();
        }
        let k = (r.floor() as usize).min(n - 1);
        let frac = r - k as f64;
        &self.knots[k] + (&self.knots[k + 1] - &self.knots[k]) * frac
    }

    /// The same path sampled on `m` steps.
    pub fn resample(&self, m: usize) -> Result<Self> {
        let m = m.max(1);
        Self::new((0..=m).map(|k| self.eval_unchecked(k as f64 / m as f64)).collect())
    }

    /// `sup_t |self(t) - other(t)|`, exact for piecewise-linear paths: the
    /// difference is affine between consecutive points of the merged grids.
    pub fn sup_distance(&self, other: &Trajectory) -> f64 {
        let mut times: Vec<f64> = (0..=self.n()).map(|k| self.time(k)).collect();
        if other.n() != self.n() {
            times.extend((0..=other.n()).map(|k| other.time(k)));
        }
        times
            .into_iter()
            .map(|t| (self.eval_unchecked(t) - other.eval_unchecked(t)).norm())
            .fold(0.0, f64::max)
    }

    /// Modulus of continuity `sup{|f(t) - f(s)| : |t - s| <= delta}`.
    ///
    /// On each cell where both times stay in fixed segments the difference is
    /// affine, so the convex norm peaks at a cell vertex: a pair of knots, or a
    /// knot paired with the point at distance exactly `delta`.
    pub fn modulus(&self, delta: f64) -> Result<f64> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
        }
        let n = self.n();
        let nf = n as f64;
        let reach = (delta * nf + 1e-9).floor() as usize;
        let mut best = 0.0f64;
        for i in 0..=n {
            for j in (i + 1)..=(i + reach).min(n) {
                best = best.max((&self.knots[j] - &self.knots[i]).norm());
            }
            let t = self.time(i);
            if delta < 1.0 {
                if t + delta <= 1.0 {
                    best = best.max((self.eval_unchecked(t + delta) - &self.knots[i]).norm());
                }
                if t - delta >= 0.0 {
                    best = best.max((&self.knots[i] - self.eval_unchecked(t - delta)).norm());
                }
            }
        }
        Ok(best)
    }

    /// Columnar CSV: header `t,x1..xd`, one row per knot.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim()).map(|i| format!("x{i}")));
        w.write_record(&header)?;
        for (k, knot) in self.knots.iter().enumerate() {
            let mut row = vec![self.time(k).to_string()];
            row.extend(knot.iter().map(|x| x.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV layout of [`write_csv`](Self::write_csv). Rows must sit
    /// on the uniform grid `t = k / n`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let dim = r.headers()?.len().saturating_sub(1);
        if dim == 0 {
            return Err(Error::Io("trajectory csv needs columns t,x1..xd".into()));
        }
        let mut times = Vec::new();
        let mut knots = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let vals: std::result::Result<Vec<f64>, _> = rec.iter().map(|s| s.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| Error::Io(format!("row {}: {e}", row + 1)))?;
            if vals.len() != dim + 1 {
                return Err(Error::Io(format!("row {}: expected {} columns", row + 1, dim + 1)));
            }
            times.push(vals[0]);
            knots.push(Vector::from_column_slice(&vals[1..]));
        }
        let traj = Self::new(knots)?;
        for (k, &t) in times.iter().enumerate() {
            if (t - traj.time(k)).abs() > 1e-9 {
                return Err(Error::Io(format!(
                    "row {}: time {t} is not on the uniform grid (expected {})",
                    k + 1,
                    traj.time(k)
                )));
            }
        }
        Ok(traj)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar(xs: &[f64]) -> Trajectory {
        Trajectory::new(xs.iter().map(|&x| Vector::from_element(1, x)).collect()).unwrap()
    }

    #[test]
    fn eval_examples() {
        let f = scalar(&[0.0, 2.0, 1.0]);
        assert_eq!(f.eval(0.25).unwrap()[0], 1.0);
        assert_eq!(f.eval(0.5).unwrap()[0], 2.0);
        assert_eq!(f.eval(0.75).unwrap()[0], 1.5);
        assert!(matches!(f.eval(1.5), Err(Error::TimeOutOfRange(_))));
        assert!(f.eval(-0.1).is_err());
    }

    #[test]
    fn modulus_examples() {
        let tent = scalar(&[0.0, 1.0, 0.0]);
        assert_eq!(tent.modulus(0.5).unwrap(), 1.0);
        assert_eq!(tent.modulus(0.25).unwrap(), 0.5);
        let flat = scalar(&[3.0; 6]);
        assert_eq!(flat.modulus(0.3).unwrap(), 0.0);
        assert!(tent.modulus(0.0).is_err());
    }

    #[test]
    fn csv_round_trip_and_grid_check() {
        let f = Trajectory::new(vec![
            Vector::from_column_slice(&[0.0, 1.0]),
            Vector::from_column_slice(&[0.5, -0.25]),
            Vector::from_column_slice(&[1.0 / 3.0, 2.0]),
        ])
        .unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x1,x2\n0,0,1\n0.5,"));
        assert_eq!(Trajectory::read_csv(&buf[..]).unwrap(), f);
        let skewed = "t,x1\n0,0\n0.3,1\n1,2\n";
        assert!(Trajectory::read_csv(skewed.as_bytes()).is_err());
    }

    /// Brute-force modulus over a fine grid of time pairs.
    fn brute_modulus(f: &Trajectory, delta: f64, grid: usize) -> f64 {
        let ts: Vec<f64> = (0..=grid).map(|k| k as f64 / grid as f64).collect();
        let mut best = 0.0f64;
        for &s in &ts {
            for &t in &ts {
                if t >= s && t - s <= delta + 1e-12 {
                    best = best.max((f.eval_unchecked(t) - f.eval_unchecked(s)).norm());
                }
            }
        }
        best
    }

    proptest! {
        #[test]
        fn knots_reproduced_exactly(xs in prop::collection::vec(-5.0f64..5.0, 2..60)) {
            let f = scalar(&xs);
            for k in 0..=f.n() {
                prop_assert_eq!(f.eval(f.time(k)).unwrap()[0], xs[k]);
            }
        }

        #[test]
        fn modulus_is_monotone_and_exact(
            xs in prop::collection::vec(-3.0f64..3.0, 2..9),
            d1 in 0.01f64..1.0,
            d2 in 0.01f64..1.0,
        ) {
            let f = scalar(&xs);
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let wl = f.modulus(lo).unwrap();
            let wh = f.modulus(hi).unwrap();
            prop_assert!(wl <= wh);
            // A fine grid can only under-estimate the supremum.
            let brute = brute_modulus(&f, lo, 240);
            prop_assert!(brute <= wl + 1e-12);
            prop_assert!(wl - brute <= 2.0 * f.modulus(1.0 / 240.0).unwrap() + 1e-12);
        }
    }
}
