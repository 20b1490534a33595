//! Log-domain helpers shared by every flux-sector sum.
//!
//! A flux configuration b ∈ {±1}^N on the torus always has Π_p b_p = +1, so
//! sums over fluxes are sums over even-parity sign vectors of a product of
//! per-plaquette weights. The two-state parity recursion below evaluates them
//! with non-negative arithmetic only.

/// Per-plaquette weight pair normalised by its larger member.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnWeight {
    /// `max(ln w(+1), ln w(-1))`.
    pub top: f64,
    /// `w(min) / w(max)` in `[0, 1]`.
    pub ratio: f64,
    pub plus_dominant: bool,
}

impl ColumnWeight {
    pub fn new(ln_plus: f64, ln_minus: f64) -> Self {
        let plus_dominant = ln_plus >= ln_minus;
        let (top, low) = if plus_dominant { (ln_plus, ln_minus) } else { (ln_minus, ln_plus) };
        if top == f64::NEG_INFINITY {
            return ColumnWeight { top, ratio: 0.0, plus_dominant };
        }
        ColumnWeight { top, ratio: (low - top).exp(), plus_dominant }
    }
}

/// `ln Σ_{Π b = +1} Π_p w_p(b_p)`.
pub fn even_parity_log(cols: &[ColumnWeight]) -> f64 {
    let (even, _, shift) = parity_fold(cols);
    shift + even.ln()
}

/// `ln Σ_{Π b = -1} Π_p w_p(b_p)`.
pub fn odd_parity_log(cols: &[ColumnWeight]) -> f64 {
    let (_, odd, shift) = parity_fold(cols);
    shift + odd.ln()
}

fn parity_fold(cols: &[ColumnWeight]) -> (f64, f64, f64) {
    let mut shift = 0.0;
    let mut scale = 1.0f64;
    let (mut even, mut odd) = (1.0f64, 0.0f64);
    for c in cols {
        if c.top == f64::NEG_INFINITY {
            return (0.0, 0.0, f64::NEG_INFINITY);
        }
        shift += c.top;
        let (e, o) = if c.plus_dominant {
            (even + odd * c.ratio, odd + even * c.ratio)
        } else {
            (even * c.ratio + odd, odd * c.ratio + even)
        };
        let s = e + o;
        even = e / s;
        odd = o / s;
        scale *= s;
        if scale > 1e250 {
            shift += scale.ln();
            scale = 1.0;
        }
    }
    (even, odd, shift + scale.ln())
}

pub fn even_parity_logsum(cols: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let v: Vec<ColumnWeight> = cols.into_iter().map(|(a, b)| ColumnWeight::new(a, b)).collect();
    even_parity_log(&v)
}

/// Probability `1/(1+e^{2j})` that a ±1 variable with coupling `j` points against its field.
pub fn flip_prob(j: f64) -> f64 {
    if j == f64::INFINITY {
        0.0
    } else {
        1.0 / (1.0 + (2.0 * j).exp())
    }
}

/// `(ln P(aligned), ln P(anti-aligned))` for a ±1 variable with coupling `j ≥ 0`.
pub fn ln_aligned_pair(j: f64) -> (f64, f64) {
    if j == f64::INFINITY {
        return (0.0, f64::NEG_INFINITY);
    }
    let c = -(-2.0 * j).exp().ln_1p();
    (c, c - 2.0 * j)
}

/// Stable `ln(e^a + e^b)`.
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

pub fn log_sum(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Normalise log-weights into log-probabilities.
pub fn log_normalize(xs: &[f64]) -> Vec<f64> {
    let z = log_sum(xs);
    xs.iter().map(|x| x - z).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(ws: &[(f64, f64)], parity: i32) -> f64 {
        let n = ws.len();
        let mut tot = 0.0;
        for m in 0..1u32 << n {
            let sign = if m.count_ones() % 2 == 0 { 1 } else { -1 };
            if sign != parity {
                continue;
            }
            let mut w = 1.0;
            for (i, (lp, lm)) in ws.iter().enumerate() {
                w *= if m >> i & 1 == 1 { lm.exp() } else { lp.exp() };
            }
            tot += w;
        }
        tot.ln()
    }

    #[test]
    fn matches_cosh_sinh_identity() {
        let lam: [f64; 4] = [0.3, -1.2, 0.0, 2.5];
        let c: f64 = lam.iter().map(|l| 2.0 * l.cosh()).product();
        let s: f64 = lam.iter().map(|l| 2.0 * l.sinh()).product();
        let got = even_parity_logsum(lam.iter().map(|&l| (l, -l)));
        assert!((got - ((c + s) / 2.0).ln()).abs() < 1e-13);
    }

    #[test]
    fn infinite_weights() {
        let inf = f64::INFINITY;
        let (a, b) = ln_aligned_pair(inf);
        assert_eq!((a, b), (0.0, f64::NEG_INFINITY));
        assert_eq!(flip_prob(inf), 0.0);
        assert_eq!(flip_prob(0.0), 0.5);
        let got = even_parity_logsum([(0.0, f64::NEG_INFINITY), (f64::NEG_INFINITY, 0.0)]);
        assert_eq!(got, f64::NEG_INFINITY);
        let got = even_parity_logsum([(f64::NEG_INFINITY, 0.0), (f64::NEG_INFINITY, -1.0)]);
        assert!((got + 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn parity_sums_match_brute_force(ws in prop::collection::vec((-30.0f64..30.0, -30.0f64..30.0), 1..9)) {
            let cols: Vec<ColumnWeight> = ws.iter().map(|&(a, b)| ColumnWeight::new(a, b)).collect();
            let e = even_parity_log(&cols);
            let o = odd_parity_log(&cols);
            prop_assert!((e - brute(&ws, 1)).abs() < 1e-9 * (1.0 + e.abs()));
            prop_assert!((o - brute(&ws, -1)).abs() < 1e-9 * (1.0 + o.abs()));
        }
    }
}
