//! Quadrature, one-dimensional optimization and grid helpers.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One Gauss-Kronrod 7/15 panel: returns (kronrod estimate, error estimate).
fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

const MAX_PANELS: usize = 2000;

#[derive(PartialEq)]
struct Panel {
    a: f64,
    b: f64,
    est: f64,
    err: f64,
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Adaptive Gauss-Kronrod integration of `f` over `[a, b]`: the panel with the largest error
/// estimate is bisected until the summed error meets `rel_tol` or the panel budget runs out.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (est, err) = gk15(f, a, b);
    if !est.is_finite() {
        return est;
    }
    let mut heap = std::collections::BinaryHeap::new();
    heap.push(Panel { a, b, est, err });
    let (mut total, mut total_err) = (est, err);
    while heap.len() < MAX_PANELS && total_err > rel_tol * total.abs().max(1e-300) {
        let p = heap.pop().unwrap();
        let m = 0.5 * (p.a + p.b);
        if !(p.a < m && m < p.b) {
            heap.push(Panel { err: 0.0, ..p });
            total_err = heap.iter().map(|q| q.err).sum();
            continue;
        }
        let (l, le) = gk15(f, p.a, m);
        let (r, re) = gk15(f, m, p.b);
        if !(l + r).is_finite() {
            return l + r;
        }
        total += l + r - p.est;
        total_err += le + re - p.err;
        heap.push(Panel { a: p.a, b: m, est: l, err: le });
        heap.push(Panel { a: m, b: p.b, est: r, err: re });
    }
    heap.iter().map(|q| q.est).sum()
}

/// Golden-section search for a maximum of `f` on `[a, b]`, keeping the best point seen.
pub fn golden_max(f: &dyn Fn(f64) -> f64, a: f64, b: f64, iterations: usize) -> (f64, f64) {
    const R: f64 = 0.618_033_988_749_894_8;
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - R * (hi - lo);
    let mut x2 = lo + R * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut best = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    for _ in 0..iterations {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - R * (hi - lo);
            f1 = f(x1);
            if f1 > best.1 {
                best = (x1, f1);
            }
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + R * (hi - lo);
            f2 = f(x2);
            if f2 > best.1 {
                best = (x2, f2);
            }
        }
        if hi - lo <= f64::EPSILON * hi.abs() {
            break;
        }
    }
    best
}

/// `count` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && count >= 1);
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == count - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

/// Lower convex hull of `(x_i, y_i)` (x increasing), evaluated back at every `x_i`.
pub fn lower_convex_envelope(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(xs.len());
    for (&x, &y) in xs.iter().zip(ys) {
        while hull.len() >= 2 {
            let (x1, y1) = hull[hull.len() - 2];
            let (x2, y2) = hull[hull.len() - 1];
            // drop the middle point when it lies on or above the chord
            if (y2 - y1) * (x - x1) >= (y - y1) * (x2 - x1) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push((x, y));
    }
    let mut out = Vec::with_capacity(xs.len());
    let mut j = 0;
    for &x in xs {
        while j + 1 < hull.len() && hull[j + 1].0 < x {
            j += 1;
        }
        if j + 1 >= hull.len() || hull[j].0 >= x {
            out.push(hull[j.min(hull.len() - 1)].1);
        } else {
            let (x1, y1) = hull[j];
            let (x2, y2) = hull[j + 1];
            out.push(y1 + (y2 - y1) * (x - x1) / (x2 - x1));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn integrates_polynomials_and_exponentials() {
        let v = integrate(&|x| x * x, 0.0, 3.0, 1e-14);
        assert!((v - 9.0).abs() < 1e-12);
        let v = integrate(&|x: f64| (-x).exp(), 0.0, 40.0, 1e-13);
        assert!((v - (1.0 - (-40.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn golden_finds_smooth_and_jump_maxima() {
        let (x, fx) = golden_max(&|x| -(x - 0.3) * (x - 0.3), 0.0, 1.0, 200);
        assert!((x - 0.3).abs() < 1e-7 && fx <= 0.0 && fx > -1e-14);
        // supremum approached from the left of a jump
        let (x, fx) = golden_max(&|x| if x < 0.5 { x } else { -1.0 }, 0.0, 1.0, 200);
        assert!((x - 0.5).abs() < 1e-12 && (fx - 0.5).abs() < 1e-12);
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-4, 0.25, 100);
        assert_eq!(g.len(), 100);
        assert_eq!(g[0], 1e-4);
        assert_eq!(g[99], 0.25);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    proptest! {
        #[test]
        fn envelope_is_convex_and_below(ys in proptest::collection::vec(0.0..10.0f64, 3..40)) {
            let xs: Vec<f64> = (0..ys.len()).map(|i| i as f64).collect();
            let env = lower_convex_envelope(&xs, &ys);
            for (e, y) in env.iter().zip(&ys) {
                prop_assert!(*e <= *y + 1e-12);
            }
            for w in env.windows(3) {
                prop_assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-9);
            }
        }
    }
}
