//! Bessel functions of the first kind and Chebyshev polynomials.

/// J_0(x), …, J_{n_max}(x) for real x.
///
/// Miller's downward recurrence normalised by J_0 + 2ΣJ_{2k} = 1; the
/// ascending series takes over for |x| < 1e-3 and for orders deep in the
/// series regime, where the recurrence values would underflow.
pub fn bessel_j_sequence(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    if ax < 1e-3 {
        for (n, v) in out.iter_mut().enumerate() {
            *v = ascending_series(n, ax);
        }
    } else {
        miller(ax, &mut out);
        for (n, v) in out.iter_mut().enumerate() {
            // (x/2)^2 < (n+1)/4: every series term is at most a quarter of its
            // predecessor, so the sum carries full relative precision.
            if ax * ax < (n + 1) as f64 {
                *v = ascending_series(n, ax);
            }
        }
    }
    if x < 0.0 {
        for (n, v) in out.iter_mut().enumerate() {
            if n % 2 == 1 {
                *v = -*v;
            }
        }
    }
    out
}

/// J_n(x) for a single order.
pub fn bessel_j(n: usize, x: f64) -> f64 {
    bessel_j_sequence(n, x)[n]
}

fn miller(x: f64, out: &mut [f64]) {
    const BIG: f64 = 1e250;
    let n_max = out.len() - 1;
    let top = n_max.max(x.ceil() as usize);
    let start = 2 * ((top + 20 + (40.0 * top as f64).sqrt() as usize) / 2);
    let two_over_x = 2.0 / x;
    let mut above = 0.0; // J_{m+1}
    let mut cur = 1e-300; // J_m
    let mut norm = 0.0;
    let mut m = start;
    loop {
        if m <= n_max {
            out[m] = cur;
        }
        if m % 2 == 0 {
            norm += if m == 0 { cur } else { 2.0 * cur };
        }
        if m == 0 {
            break;
        }
        let below = m as f64 * two_over_x * cur - above;
        above = cur;
        cur = below;
        m -= 1;
        if cur.abs() > BIG {
            cur /= BIG;
            above /= BIG;
            norm /= BIG;
            for v in out.iter_mut().skip(m + 1) {
                *v /= BIG;
            }
        }
    }
    for v in out.iter_mut() {
        *v /= norm;
    }
}

fn ascending_series(n: usize, x: f64) -> f64 {
    let half = 0.5 * x;
    // leading term (x/2)^n / n! built incrementally to avoid overflow
    let mut term = 1.0;
    for k in 1..=n {
        term *= half / k as f64;
        if term == 0.0 {
            return 0.0;
        }
    }
    let q = half * half;
    let mut sum = term;
    for m in 1..200 {
        term *= -q / (m as f64 * (m + n) as f64);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// T_0(x), …, T_{n_max}(x).
pub fn chebyshev_t_sequence(n_max: usize, x: f64) -> Vec<f64> {
    let mut t = Vec::with_capacity(n_max + 1);
    t.push(1.0);
    if n_max >= 1 {
        t.push(x);
    }
    for n in 2..=n_max {
        let next = 2.0 * x * t[n - 1] - t[n - 2];
        t.push(next);
    }
    t
}

/// Smallest x > 0 at which |J_n| first exceeds `eps`, located by bisection on
/// a fine scan. Used to size the time window in which a K-term Bessel
/// expansion is trustworthy.
pub fn bessel_onset(n: usize, eps: f64) -> f64 {
    let step = 1e-2;
    let mut x = step;
    while bessel_j(n, x).abs() <= eps {
        x += step;
        if x > 4.0 * (n as f64 + 10.0) {
            return x;
        }
    }
    let (mut lo, mut hi) = (x - step, x);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if bessel_j(n, mid).abs() <= eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}
