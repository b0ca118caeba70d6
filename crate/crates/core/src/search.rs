//! Derivative-free maximization of scalar functions of time: a uniform grid
//! scan to locate candidate peaks, then golden-section refinement inside the
//! bracketing grid cells.

/// A located maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub t: f64,
    pub value: f64,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a maximum of `f` on `[a, b]`, stopping once the
/// bracket is narrower than `tol`. Returns the best point evaluated, which
/// includes both endpoints, so the result never falls below `f(a)` or `f(b)`.
pub fn golden_section_max(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Peak {
    let (mut lo, mut hi) = if a <= b { (a, b) } else { (b, a) };
    let mut best = Peak {
        t: lo,
        value: f(lo),
    };
    let consider = |t: f64, value: f64, best: &mut Peak| {
        if value > best.value {
            *best = Peak { t, value };
        }
    };
    let fhi = f(hi);
    consider(hi, fhi, &mut best);

    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    consider(x1, f1, &mut best);
    consider(x2, f2, &mut best);
    let tol = tol.max(f64::EPSILON * hi.abs().max(1.0));
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
            consider(x1, f1, &mut best);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
            consider(x2, f2, &mut best);
        }
    }
    best
}

fn grid(start: f64, end: f64, points: usize) -> impl Iterator<Item = (usize, f64)> {
    let step = (end - start) / points as f64;
    (0..=points).map(move |i| (i, start + step * i as f64))
}

/// Indices of grid local maxima (plateaus count once, at their left edge).
/// The first and last samples qualify when they dominate their one neighbour.
fn local_maxima(values: &[f64]) -> Vec<usize> {
    let n = values.len();
    (0..n)
        .filter(|&i| {
            let left = i == 0 || values[i] > values[i - 1];
            let right = i + 1 == n || values[i] >= values[i + 1];
            left && right
        })
        .collect()
}

fn refine(
    f: &impl Fn(f64) -> f64,
    times: &[f64],
    values: &[f64],
    i: usize,
    lo_bound: f64,
    tol: f64,
) -> Peak {
    let a = if i == 0 { times[0] } else { times[i - 1] }.max(lo_bound);
    let b = times[(i + 1).min(times.len() - 1)];
    let refined = golden_section_max(f, a, b, tol);
    if refined.value >= values[i] {
        refined
    } else {
        Peak {
            t: times[i],
            value: values[i],
        }
    }
}

/// Global maximum of `f` on `[start, end]`: `grid_points` uniform cells, then
/// golden-section refinement of the `candidates` best grid peaks.
pub fn maximize(
    f: impl Fn(f64) -> f64,
    start: f64,
    end: f64,
    grid_points: usize,
    tol: f64,
    candidates: usize,
) -> Peak {
    assert!(end > start && grid_points >= 2);
    let (times, values): (Vec<f64>, Vec<f64>) = grid(start, end, grid_points)
        .map(|(_, t)| (t, f(t)))
        .unzip();
    let mut peaks = local_maxima(&values);
    peaks.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    peaks
        .into_iter()
        .take(candidates.max(1))
        .map(|i| refine(&f, &times, &values, i, start, tol))
        .fold(None::<Peak>, |best, p| match best {
            Some(b) if b.value >= p.value => Some(b),
            _ => Some(p),
        })
        .expect("grid has at least one local maximum")
}

/// Like [`maximize`], but among peaks within `slack` of the global maximum
/// returns the earliest one. Periodic signals then yield their first period.
pub fn maximize_earliest(
    f: impl Fn(f64) -> f64,
    start: f64,
    end: f64,
    grid_points: usize,
    tol: f64,
    slack: f64,
) -> Peak {
    assert!(end > start && grid_points >= 2);
    let (times, values): (Vec<f64>, Vec<f64>) = grid(start, end, grid_points)
        .map(|(_, t)| (t, f(t)))
        .unzip();
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // a grid sample can sit below its true peak by O(curvature · cell²); keep
    // every peak that could plausibly tie after refinement
    let spread = local_maxima(&values)
        .iter()
        .map(|&i| {
            let l = values[i.saturating_sub(1)];
            let r = values[(i + 1).min(values.len() - 1)];
            (values[i] - l.min(r)).abs()
        })
        .fold(0.0, f64::max);
    let refined: Vec<Peak> = local_maxima(&values)
        .into_iter()
        .filter(|&i| values[i] >= top - spread - slack)
        .map(|i| refine(&f, &times, &values, i, start, tol))
        .collect();
    let best = refined
        .iter()
        .map(|p| p.value)
        .fold(f64::NEG_INFINITY, f64::max);
    refined
        .into_iter()
        .filter(|p| p.value >= best - slack)
        .min_by(|a, b| a.t.total_cmp(&b.t))
        .expect("grid has at least one local maximum")
}

/// The highest peak of `f` strictly after `t = 0`, on `(0, end]`.
///
/// A peak at the origin itself (the function decreasing from `t = 0`) is not
/// eligible, which lets repeated calls move from one peak to the next. The
/// right edge counts only if `f` is still rising there.
pub fn next_peak(f: impl Fn(f64) -> f64, end: f64, grid_points: usize, tol: f64) -> Peak {
    assert!(end > 0.0 && grid_points >= 2);
    let (times, values): (Vec<f64>, Vec<f64>) =
        grid(0.0, end, grid_points).map(|(_, t)| (t, f(t))).unzip();
    let last = values.len() - 1;
    let mut best: Option<usize> = None;
    for i in 1..=last {
        let rising = values[i] > values[i - 1];
        let peak = if i == last {
            rising
        } else {
            rising && values[i] >= values[i + 1]
        };
        if peak && best.is_none_or(|b| values[i] > values[b]) {
            best = Some(i);
        }
    }
    // monotonically decreasing everywhere: take the best non-origin sample
    let i = best.unwrap_or_else(|| {
        (1..=last)
            .max_by(|&a, &b| values[a].total_cmp(&values[b]).then(b.cmp(&a)))
            .unwrap()
    });
    let min_t = times[1] * 1e-6;
    let p = refine(&f, &times, &values, i, min_t, tol);
    if p.t <= 0.0 {
        Peak {
            t: times[i],
            value: values[i],
        }
    } else {
        p
    }
}

/// The first grid local maximum on `(0, end]` whose value reaches
/// `fraction` of the global grid maximum, refined by golden section.
pub fn first_significant_peak(
    f: impl Fn(f64) -> f64,
    end: f64,
    grid_points: usize,
    tol: f64,
    fraction: f64,
) -> Peak {
    let (times, values): (Vec<f64>, Vec<f64>) =
        grid(0.0, end, grid_points).map(|(_, t)| (t, f(t))).unzip();
    let global = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let i = local_maxima(&values)
        .into_iter()
        .find(|&i| i > 0 && values[i] >= fraction * global)
        .unwrap_or_else(|| values.iter().position(|&v| v == global).unwrap());
    refine(&f, &times, &values, i, 0.0, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn golden_finds_parabola_vertex() {
        let p = golden_section_max(|x| -(x - 1.3).powi(2), 0.0, 4.0, 1e-9);
        assert!((p.t - 1.3).abs() < 1e-8);
    }

    #[test]
    fn golden_keeps_endpoint_when_monotone() {
        let p = golden_section_max(|x| x, 0.0, 2.0, 1e-6);
        assert_eq!(p.t, 2.0);
    }

    #[test]
    fn maximize_picks_global_peak() {
        // sin² peaks of increasing height
        let f = |t: f64| (t / 10.0) * t.sin().powi(2);
        let p = maximize(f, 0.0, 10.0, 500, 1e-10, 3);
        // last peak before 10 solves tan t = -2t, just above 5π/2
        assert!((p.t - 7.9171).abs() < 1e-3, "{p:?}");
        assert!(p.value >= f(2.5 * PI));
    }

    #[test]
    fn maximize_earliest_prefers_first_period() {
        let f = |t: f64| (3.0 * t).sin().powi(2);
        let p = maximize_earliest(f, 0.0, 10.0, 700, 1e-10, 1e-9);
        assert!((p.t - PI / 6.0).abs() < 1e-6, "{p:?}");
    }

    #[test]
    fn next_peak_skips_the_origin() {
        let f = |t: f64| t.cos().powi(2);
        let p = next_peak(f, 5.0, 1000, 1e-9);
        assert!((p.t - PI).abs() < 1e-6, "{p:?}");
    }

    #[test]
    fn next_peak_takes_highest_interior_peak() {
        let f = |t: f64| (1.0 + t) * t.sin().powi(2) * (-t / 50.0).exp();
        let p = next_peak(f, 9.0, 2000, 1e-9);
        assert!((p.t - 2.5 * PI).abs() < 0.05, "{p:?}");
    }

    #[test]
    fn first_significant_peak_ignores_ripples() {
        let f = |t: f64| {
            0.01 * (20.0 * t).sin().powi(2)
                + (-(t - 4.0).powi(2)).exp()
                + 0.8 * (-(t - 8.0).powi(2)).exp()
        };
        let p = first_significant_peak(f, 10.0, 5000, 1e-9, 0.5);
        assert!((p.t - 4.0).abs() < 0.1, "{p:?}");
    }
}
