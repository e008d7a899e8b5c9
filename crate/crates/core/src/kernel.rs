//! The squared-Fejér (Jackson-type) kernel used to build dual certificates.
//!
//! `K(t) = [sin((m+1) t/2) / ((m+1) sin(t/2))]^4` with `m = D/2` has
//! trigonometric degree `D` and `K(0) = 1`. `D` is the largest multiple of
//! four not exceeding the requested degree, so the inner ratio has integer
//! frequencies `-m/2..=m/2`.

/// Fourier coefficients of the kernel, `k = -D..=D`.
#[derive(Debug, Clone)]
pub struct JacksonKernel {
    degree: usize,
    /// `coeffs[k]` for `k = 0..=D`; the kernel is real and even.
    coeffs: Vec<f64>,
}

impl JacksonKernel {
    /// Kernel of degree `4 * floor(n / 4)`.
    pub fn new(n: usize) -> Self {
        let degree = 4 * (n / 4);
        let m = degree / 2;
        let half = (m / 2) as isize;
        let w = 1.0 / (m as f64 + 1.0);
        // ratio: frequencies -half..=half, each w
        let ratio: Vec<f64> = vec![w; (2 * half + 1) as usize];
        let sq = convolve(&ratio, &ratio);
        let quad = convolve(&sq, &sq);
        // quad is centred at index 2 * (2 * half) = degree
        let coeffs = quad[degree..].to_vec();
        debug_assert_eq!(coeffs.len(), degree + 1);
        Self { degree, coeffs }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `\hat K_k` for `|k| <= D`, zero otherwise.
    pub fn coeff(&self, k: isize) -> f64 {
        self.coeffs.get(k.unsigned_abs()).copied().unwrap_or(0.0)
    }

    /// Value and first two derivatives at `t`.
    pub fn eval3(&self, t: f64) -> (f64, f64, f64) {
        let (mut v, mut d1, mut d2) = (self.coeffs[0], 0.0, 0.0);
        let (s1, c1) = t.sin_cos();
        let (mut sk, mut ck) = (0.0f64, 1.0f64);
        for (k, &a) in self.coeffs.iter().enumerate().skip(1) {
            // rotate (cos kt, sin kt) by t
            let next_c = ck * c1 - sk * s1;
            let next_s = sk * c1 + ck * s1;
            ck = next_c;
            sk = next_s;
            let kf = k as f64;
            v += 2.0 * a * ck;
            d1 -= 2.0 * a * kf * sk;
            d2 -= 2.0 * a * kf * kf * ck;
        }
        (v, d1, d2)
    }

    /// Closed-form value, used as an independent check of the coefficients.
    pub fn closed_form(&self, t: f64) -> f64 {
        let m = (self.degree / 2) as f64;
        let s = (t / 2.0).sin();
        if s.abs() < 1e-12 {
            return 1.0;
        }
        let r = ((m + 1.0) * t / 2.0).sin() / ((m + 1.0) * s);
        r.powi(4)
    }
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficients_match_closed_form() {
        for n in [8, 64, 128, 130] {
            let k = JacksonKernel::new(n);
            assert_eq!(k.degree(), 4 * (n / 4));
            for i in 0..50 {
                let t = -3.1 + 0.1237 * i as f64;
                let (v, _, _) = k.eval3(t);
                assert!((v - k.closed_form(t)).abs() < 1e-13, "n={n} t={t}");
            }
            assert!((k.eval3(0.0).0 - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let k = JacksonKernel::new(64);
        let h = 1e-5;
        for &t in &[0.01, 0.2, -0.7, 2.0] {
            let (_, d1, d2) = k.eval3(t);
            let fd1 = (k.closed_form(t + h) - k.closed_form(t - h)) / (2.0 * h);
            let (_, a, _) = k.eval3(t + h);
            let (_, b, _) = k.eval3(t - h);
            let fd2 = (a - b) / (2.0 * h);
            assert!((d1 - fd1).abs() < 1e-6 * (1.0 + d1.abs()));
            assert!((d2 - fd2).abs() < 1e-5 * (1.0 + d2.abs()));
        }
    }
}
