/// `(1 + √5) / 2`
pub const GOLDEN_RATIO: f64 = 1.618_033_988_749_895;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GoldenSearch {
    /// Midpoint of the final bracket.
    pub point: f64,
    /// Bracket reductions performed.
    pub iterations: usize,
    /// Objective evaluations performed.
    pub evaluations: usize,
}

/// Maximizes `objective` on `[lower, upper]` by golden-section search.
///
/// Probe points are `c = b - (b - a)/φ` and `d = a + (b - a)/φ`. When
/// `f(c) < f(d)` the maximum lies in `[c, b]`, otherwise in `[a, d]`. The
/// surviving probe becomes the opposite probe of the next bracket, so each
/// reduction costs one evaluation. Stops once `|a - b| < eps` and returns
/// the bracket midpoint.
pub fn golden_section_search(
    objective: impl FnMut(f64) -> f64,
    lower: f64,
    upper: f64,
    eps: f64,
) -> f64 {
    golden_section_search_with_stats(objective, lower, upper, eps).point
}

pub fn golden_section_search_with_stats(
    mut objective: impl FnMut(f64) -> f64,
    lower: f64,
    upper: f64,
    eps: f64,
) -> GoldenSearch {
    debug_assert!(lower <= upper && eps > 0.0);
    let (mut a, mut b) = (lower, upper);
    if (b - a).abs() < eps {
        return GoldenSearch {
            point: (a + b) / 2.0,
            iterations: 0,
            evaluations: 0,
        };
    }
    let mut c = b - (b - a) / GOLDEN_RATIO;
    let mut d = a + (b - a) / GOLDEN_RATIO;
    let mut fc = objective(c);
    let mut fd = objective(d);
    let mut iterations = 0;
    let mut evaluations = 2;
    while (a - b).abs() >= eps {
        if fc < fd {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) / GOLDEN_RATIO;
            fd = objective(d);
        } else {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) / GOLDEN_RATIO;
            fc = objective(c);
        }
        iterations += 1;
        evaluations += 1;
    }
    GoldenSearch {
        point: (a + b) / 2.0,
        iterations,
        evaluations,
    }
}
