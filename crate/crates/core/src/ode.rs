//! Fixed-step Gragg–Bulirsch–Stoer integrator for small autonomous systems.
//!
//! One call performs a single step of order 8: modified-midpoint solutions
//! with 2, 4, 6 and 8 substeps are combined by polynomial extrapolation in
//! the squared substep.

const SEQ: [usize; 4] = [2, 4, 6, 8];

fn modified_midpoint<const N: usize, F>(f: &F, y0: &[f64; N], h: f64, n: usize) -> [f64; N]
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    let hh = h / n as f64;
    let mut zm = *y0;
    let d0 = f(y0);
    let mut z = [0.0; N];
    for i in 0..N {
        z[i] = y0[i] + hh * d0[i];
    }
    for _ in 1..n {
        let d = f(&z);
        for i in 0..N {
            let next = zm[i] + 2.0 * hh * d[i];
            zm[i] = z[i];
            z[i] = next;
        }
    }
    let d = f(&z);
    let mut out = [0.0; N];
    for i in 0..N {
        out[i] = 0.5 * (z[i] + zm[i] + hh * d[i]);
    }
    out
}

/// Advance `y0` by `h` under `y' = f(y)`.
pub fn gbs_step<const N: usize, F>(f: &F, y0: &[f64; N], h: f64) -> [f64; N]
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    // t[k][l]: extrapolation of order 2(l+1) built from rows k-l..=k
    let mut t = [[[0.0; N]; 4]; 4];
    for (k, &n) in SEQ.iter().enumerate() {
        t[k][0] = modified_midpoint(f, y0, h, n);
        for l in 1..=k {
            let ratio = (n as f64 / SEQ[k - l] as f64).powi(2);
            for i in 0..N {
                t[k][l][i] = t[k][l - 1][i] + (t[k][l - 1][i] - t[k - 1][l - 1][i]) / (ratio - 1.0);
            }
        }
    }
    t[3][3]
}
