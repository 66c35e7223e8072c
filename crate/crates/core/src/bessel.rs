//! Integer-order Bessel functions J_n and modified K_n on the positive real
//! axis, as needed by the step-index fiber characteristic equation.
//!
//! J_n uses Miller's downward recurrence with sum normalization (close to
//! machine precision for the argument range used here). K_0/K_1 use the
//! ascending series below x = 2 and the standard Chebyshev-fitted forms
//! above, giving ~1e-9 relative accuracy; higher orders follow from the
//! (stable) upward recurrence.

/// J_n(x) for n ≥ 0, x ≥ 0.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if x < 0.0 {
        return f64::NAN;
    }
    // Start order for the downward recurrence; generous so that values stay
    // accurate to ~1e-13 for the x ≲ 100 range used here.
    let nmax = {
        let base = (n as f64).max(x);
        let guard = (base + 2.0 * (40.0 * base).sqrt() + 30.0).ceil() as u32;
        guard + (guard & 1) // even
    };
    let mut jp = 0.0f64; // J_{k+1}
    let mut j = 1e-300f64; // J_k
    let mut sum = 0.0f64;
    let mut result = 0.0f64;
    let mut k = nmax;
    loop {
        let jm = (2.0 * (k + 1) as f64 / x) * j - jp; // J_k from J_{k+1}, J_{k+2}
        jp = j;
        j = jm;
        if k % 2 == 0 {
            sum += if k == 0 { j } else { 2.0 * j };
        }
        if k == n {
            result = j;
        }
        // Rescale to dodge overflow on long recurrences.
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp *= 1e-250;
            sum *= 1e-250;
            result *= 1e-250;
        }
        if k == 0 {
            break;
        }
        k -= 1;
    }
    result / sum
}

/// K_0(x) for x > 0.
pub fn bessel_k0(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x <= 2.0 {
        // K0 = -(ln(x/2) + γ)·I0 + Σ (x²/4)^k / (k!)² · H_k
        let t = x * x / 4.0;
        let mut term = 1.0f64;
        let mut i0 = 1.0f64;
        let mut series = 0.0f64;
        let mut hk = 0.0f64;
        for k in 1..40 {
            term *= t / (k * k) as f64;
            i0 += term;
            hk += 1.0 / k as f64;
            series += term * hk;
            if term < 1e-18 {
                break;
            }
        }
        const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
        -(x / 2.0).ln() * i0 - EULER_GAMMA * i0 + series
    } else {
        let z = 2.0 / x;
        let p = 1.25331414
            + z * (-0.07832358
                + z * (0.02189568
                    + z * (-0.01062446 + z * (0.00587872 + z * (-0.00251540 + z * 0.00053208)))));
        p * (-x).exp() / x.sqrt()
    }
}

/// K_1(x) for x > 0.
pub fn bessel_k1(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x <= 2.0 {
        // K1 = ln(x/2)·I1 + (1/x)·(1 + Σ c_k), assembled from the ascending series.
        let t = x * x / 4.0;
        // I1(x) = (x/2) Σ t^k / (k!(k+1)!)
        let mut term = 1.0f64;
        let mut i1 = 1.0f64;
        for k in 1..40 {
            term *= t / (k * (k + 1)) as f64;
            i1 += term;
            if term < 1e-18 {
                break;
            }
        }
        i1 *= x / 2.0;
        // Series part of x·K1: 1 + Σ_{k≥0} t^{k+1}/(k!(k+1)!)·(H_k + H_{k+1} - ...)
        const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
        let lnz = (x / 2.0).ln();
        let mut sum = 0.0f64;
        let mut fk = 1.0f64; // t^k / (k!(k+1)!)
        let mut hk = 0.0f64; // H_k
        for k in 0..40 {
            let hk1 = hk + 1.0 / (k + 1) as f64;
            sum += fk * (hk + hk1);
            fk *= t / ((k + 1) * (k + 2)) as f64;
            hk = hk1;
            if fk < 1e-18 {
                break;
            }
        }
        (lnz + EULER_GAMMA) * i1 + 1.0 / x - (x / 4.0) * sum
    } else {
        let z = 2.0 / x;
        let p = 1.25331414
            + z * (0.23498619
                + z * (-0.03655620
                    + z * (0.01504268 + z * (-0.00780353 + z * (0.00325614 - z * 0.00068245)))));
        p * (-x).exp() / x.sqrt()
    }
}

/// K_n(x) for n ≥ 0, x > 0, by upward recurrence.
pub fn bessel_k(n: u32, x: f64) -> f64 {
    match n {
        0 => bessel_k0(x),
        1 => bessel_k1(x),
        _ => {
            let mut km = bessel_k0(x);
            let mut k = bessel_k1(x);
            for j in 1..n {
                let kn = km + (2.0 * j as f64 / x) * k;
                km = k;
                k = kn;
                if !k.is_finite() {
                    return f64::INFINITY;
                }
            }
            k
        }
    }
}
