//! Special functions not covered by `statrs`.

use crate::C64;

pub use statrs::function::gamma::ln_gamma;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Exponential integral `E_1(w)` on the principal branch (cut along `w <= 0`).
pub fn exp_integral_e1(w: C64) -> C64 {
    if w.norm() < 8.0 {
        e1_series(w)
    } else {
        e1_fraction(w)
    }
}

fn e1_series(w: C64) -> C64 {
    // E1(w) = -gamma - ln w - sum_{k>=1} (-w)^k / (k k!)
    let mut term = C64::new(1.0, 0.0);
    let mut sum = C64::new(0.0, 0.0);
    for k in 1..200 {
        term *= -w / k as f64;
        let add = term / k as f64;
        sum += add;
        if add.norm() < 1e-17 * sum.norm().max(1e-300) {
            break;
        }
    }
    -EULER_GAMMA - w.ln() - sum
}

fn e1_fraction(w: C64) -> C64 {
    // Continued fraction e^{-w} / (w + 1 - 1/(w + 3 - 4/(w + 5 - ...))) by modified Lentz.
    let tiny = 1e-300;
    let mut b = w + 1.0;
    let mut c = C64::new(1.0 / tiny, 0.0);
    let mut d = C64::new(1.0, 0.0) / b;
    let mut h = d;
    for i in 1..10_000 {
        let a = -((i * i) as f64);
        b += 2.0;
        d = C64::new(1.0, 0.0) / (b + a * d);
        c = b + a / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).norm() < 1e-16 {
            break;
        }
    }
    h * (-w).exp()
}
