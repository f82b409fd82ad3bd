//! One-dimensional search helpers shared by the maximizers and the interval
//! inversions.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a maximum of `f` on `[a, b]`. Returns the best
/// point seen (including the endpoints), ties broken toward the smaller
/// abscissa.
pub(crate) fn golden_max<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let mut best = (lo, f(lo));
    let fb = f(hi);
    if fb > best.1 {
        best = (hi, fb);
    }
    if hi - lo <= tol {
        return best;
    }
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let consider = |best: &mut (f64, f64), x: f64, fx: f64| {
        if fx > best.1 || (fx == best.1 && x < best.0) {
            *best = (x, fx);
        }
    };
    consider(&mut best, x1, f1);
    consider(&mut best, x2, f2);
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
            consider(&mut best, x1, f1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
            consider(&mut best, x2, f2);
        }
    }
    best
}

/// Bisection on a predicate that is `true` at `yes` and `false` at `no`.
/// Returns the final `(yes, no)` bracket, of width at most `tol`.
pub(crate) fn bisect<P: FnMut(f64) -> bool>(mut pred: P, mut yes: f64, mut no: f64, tol: f64) -> (f64, f64) {
    while (yes - no).abs() > tol {
        let mid = 0.5 * (yes + no);
        if mid == yes || mid == no {
            break;
        }
        if pred(mid) {
            yes = mid;
        } else {
            no = mid;
        }
    }
    (yes, no)
}

/// `n` equally spaced points covering `[lo, hi]` inclusive.
pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 || hi <= lo {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| if i == n - 1 { hi } else { lo + step * i as f64 }).collect()
}

/// Indices of coarse-grid local maxima worth refining: at least as large as
/// both neighbours, strictly larger than one of them (plateaus are left
/// alone), and within `slack` of the overall best.
pub(crate) fn refinable_peaks(values: &[f64], slack: f64) -> Vec<usize> {
    let n = values.len();
    if n < 2 {
        return Vec::new();
    }
    let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (0..n)
        .filter(|&i| {
            let v = values[i];
            if v < best - slack {
                return false;
            }
            let left = if i > 0 { Some(values[i - 1]) } else { None };
            let right = if i + 1 < n { Some(values[i + 1]) } else { None };
            let ge = left.map_or(true, |l| v >= l) && right.map_or(true, |r| v >= r);
            let gt = left.map_or(false, |l| v > l) || right.map_or(false, |r| v > r);
            ge && gt
        })
        .collect()
}
