//! Dormand–Prince 5(4) explicit stepper for complex linear ODEs.

use num_complex::Complex64;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Scratch space for one system size. `step` evaluates a trial step without
/// committing it, so a caller can retry from the same start (step rejection,
/// event bisection) at the cost of re-evaluating the stages.
#[derive(Debug, Clone)]
pub struct DormandPrince {
    k: [Vec<Complex64>; 7],
    tmp: Vec<Complex64>,
    pub y_new: Vec<Complex64>,
    /// True when `k[0]` holds f(t, y) for the current step start.
    k1_valid: bool,
    pub rtol: f64,
}

impl DormandPrince {
    pub fn new(dim: usize, rtol: f64) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); dim];
        DormandPrince {
            k: std::array::from_fn(|_| z.clone()),
            tmp: z.clone(),
            y_new: z,
            k1_valid: false,
            rtol,
        }
    }

    pub fn dim(&self) -> usize {
        self.tmp.len()
    }

    /// Forget the cached start derivative (new start point or new system).
    pub fn reset(&mut self) {
        self.k1_valid = false;
    }

    /// Trial step of size `h` from (t, y). Fills `y_new` and returns the
    /// scaled error norm (accept when ≤ 1).
    pub fn step<F>(&mut self, f: &mut F, t: f64, y: &[Complex64], h: f64) -> f64
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
    {
        let n = y.len();
        debug_assert_eq!(n, self.dim());
        if !self.k1_valid {
            f(t, y, &mut self.k[0]);
            self.k1_valid = true;
        }
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        // Re-slicing to a common length lets the bounds checks fold away.
        let (y, tmp) = (&y[..n], &mut self.tmp[..n]);
        let (k1, k2, k3, k4, k5, k6, k7) = (
            &mut k1[..n],
            &mut k2[..n],
            &mut k3[..n],
            &mut k4[..n],
            &mut k5[..n],
            &mut k6[..n],
            &mut k7[..n],
        );

        for i in 0..n {
            tmp[i] = y[i] + k1[i] * (h * A21);
        }
        f(t + C2 * h, tmp, k2);
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A31 + k2[i] * A32) * h;
        }
        f(t + C3 * h, tmp, k3);
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A41 + k2[i] * A42 + k3[i] * A43) * h;
        }
        f(t + C4 * h, tmp, k4);
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * h;
        }
        f(t + C5 * h, tmp, k5);
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65) * h;
        }
        f(t + h, tmp, k6);
        let y_new = &mut self.y_new[..n];
        for i in 0..n {
            y_new[i] = y[i] + (k1[i] * B1 + k3[i] * B3 + k4[i] * B4 + k5[i] * B5 + k6[i] * B6) * h;
        }
        f(t + h, y_new, k7);

        let norm_y = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let atol = self.rtol * 1e-3 * norm_y.max(1e-300);
        let mut acc = 0.0;
        for i in 0..n {
            let err = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
            let sc = atol + self.rtol * y[i].norm_sqr().max(y_new[i].norm_sqr()).sqrt();
            acc += err.norm_sqr() / (sc * sc);
        }
        (acc / n.max(1) as f64).sqrt()
    }

    /// Fourth-order dense output of the last trial step at t + θh, written
    /// into `out`. `y` and `h` must be those passed to [`step`](Self::step).
    pub fn dense(&self, y: &[Complex64], h: f64, theta: f64, out: &mut [Complex64]) {
        let [k1, _, k3, k4, k5, k6, k7] = &self.k;
        let s = 1.0 - theta;
        for i in 0..out.len() {
            let r2 = self.y_new[i] - y[i];
            let r3 = k1[i] * h - r2;
            let r4 = r2 - k7[i] * h - r3;
            let r5 = (k1[i] * D1 + k3[i] * D3 + k4[i] * D4 + k5[i] * D5 + k6[i] * D6 + k7[i] * D7) * h;
            out[i] = y[i] + (r2 + (r3 + (r4 + r5 * s) * theta) * s) * theta;
        }
    }

    /// Commit the last trial step: its end derivative becomes the next start
    /// derivative (first-same-as-last).
    pub fn accept(&mut self, y: &mut [Complex64]) {
        y.copy_from_slice(&self.y_new);
        self.k.swap(0, 6);
        self.k1_valid = true;
    }

    /// Step size factor from an error norm.
    pub fn factor(err: f64) -> f64 {
        if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        }
    }
}
