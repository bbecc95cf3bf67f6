//! Integer-order Bessel functions of the first kind.

/// `J_n(x)` by Miller's downward recurrence, normalised with
/// `J_0 + 2·Σ J_{2k} = 1`.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    if x < 0.0 {
        let v = bessel_j(n, -x);
        return if n % 2 == 1 { -v } else { v };
    }
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    // Start well above both n and x so the dominant solution has decayed.
    let top = (n as f64).max(x);
    let mut m = (top + 20.0 + (40.0 * top).sqrt()) as usize;
    m += m % 2;

    const BIG: f64 = 1e250;
    let (mut above, mut cur) = (0.0_f64, 1e-300_f64);
    let mut norm = 0.0;
    let mut result = 0.0;
    for k in (1..=m).rev() {
        let below = 2.0 * k as f64 / x * cur - above;
        above = cur;
        cur = below;
        // `cur` is now j_{k-1}
        if k - 1 == n as usize {
            result = cur;
        }
        if (k - 1) % 2 == 0 && k - 1 > 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > BIG {
            cur /= BIG;
            above /= BIG;
            norm /= BIG;
            result /= BIG;
        }
    }
    norm += cur;
    result / norm
}
