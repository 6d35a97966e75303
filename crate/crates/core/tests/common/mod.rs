//! Independent reference implementations used as oracles by the integration
//! tests. Nothing here calls into the library's matcher or scoring code.
#![allow(dead_code)]

pub const SIDE: u64 = 384;

/// `(R_e, R_w)` by direct transliteration of the scoring pseudocode.
pub fn fit(w: u64, h: u64, m: u64, n: u64, side: u64) -> (u64, u64) {
    let (tw, th) = (side * m, side * n);
    let sx = tw as f64 / w as f64;
    let sy = th as f64 / h as f64;
    let scale = if sx < sy { sx } else { sy };
    let dw = (w as f64 * scale) as u64;
    let dh = (h as f64 * scale) as u64;
    let re = std::cmp::min(dw * dh, w * h);
    (re, tw * th - re)
}

pub fn grid(m_max: u64, n_max: u64) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    for m in 1..=m_max {
        for n in 1..=n_max {
            out.push((m, n));
        }
    }
    out
}

pub fn max_num(k: u64) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    for m in 1..=k {
        for n in 1..=k {
            if m * n <= k {
                out.push((m, n));
            }
        }
    }
    out.sort_by_key(|a| (a.0 * a.1, a.0));
    out
}

/// Area descending, `|m - n|` ascending, `m` ascending.
pub fn descending(mut ratios: Vec<(u64, u64)>) -> Vec<(u64, u64)> {
    ratios.sort_by(|a, b| {
        let ka = (std::cmp::Reverse(a.0 * a.1), a.0.abs_diff(a.1), a.0);
        let kb = (std::cmp::Reverse(b.0 * b.1), b.0.abs_diff(b.1), b.0);
        ka.cmp(&kb)
    });
    ratios
}

/// Relaxed rule over `ratios` in the given order; `None` if nothing is
/// accepted.
pub fn relaxed(w: u64, h: u64, ratios: &[(u64, u64)], alpha: f64) -> Option<(u64, u64)> {
    let mut best = None;
    let mut re_max = 0.0f64;
    let mut rw_min = f64::INFINITY;
    for &(m, n) in ratios {
        let (re, rw) = fit(w, h, m, n, SIDE);
        let (re, rw) = (re as f64, rw as f64);
        if (re - re_max) > alpha * re_max || ((re_max - re) < alpha * re_max && rw < rw_min) {
            re_max = re;
            rw_min = rw;
            best = Some((m, n));
        }
    }
    best
}

pub fn llava_next(w: u64, h: u64, ratios: &[(u64, u64)]) -> (u64, u64) {
    let mut best = None;
    let mut re_max = 0u64;
    let mut rw_min = u64::MAX;
    for &(m, n) in ratios {
        let (re, rw) = fit(w, h, m, n, SIDE);
        if re > re_max || (re == re_max && rw < rw_min) {
            re_max = re;
            rw_min = rw;
            best = Some((m, n));
        }
    }
    best.expect("first candidate is always accepted")
}

pub fn internvl(w: u64, h: u64, k: u64) -> (u64, u64) {
    let aspect = w as f64 / h as f64;
    let area = (w * h) as f64;
    let mut best = (1, 1);
    let mut best_diff = f64::INFINITY;
    for (m, n) in max_num(k) {
        let diff = (aspect - m as f64 / n as f64).abs();
        if diff < best_diff {
            best_diff = diff;
            best = (m, n);
        } else if diff == best_diff && area > 0.5 * (SIDE * SIDE * m * n) as f64 {
            best = (m, n);
        }
    }
    best
}

/// Relaxed selection as the library defines it: descending order, falling
/// back to the first candidate when nothing is accepted.
pub fn relaxed_selected(w: u64, h: u64, ratios: Vec<(u64, u64)>, alpha: f64) -> (u64, u64) {
    let ordered = descending(ratios);
    relaxed(w, h, &ordered, alpha).unwrap_or(ordered[0])
}
