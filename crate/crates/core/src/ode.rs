//! Classical fixed-step fourth-order Runge-Kutta for autonomous systems.

/// Scratch buffers for one RK4 integrator, reused across steps.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Rk4 {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    /// Advances `x` by `h` under `dx/dt = f(x)`.
    pub fn step<F>(&mut self, x: &mut [f64], h: f64, mut f: F)
    where
        F: FnMut(&[f64], &mut [f64]),
    {
        let n = x.len();
        debug_assert_eq!(n, self.k1.len());
        f(x, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k1[i];
        }
        f(&self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k2[i];
        }
        f(&self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = x[i] + h * self.k3[i];
        }
        f(&self.tmp, &mut self.k4);
        for i in 0..n {
            x[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_fourth_order() {
        let run = |h: f64| {
            let mut x = [1.0];
            let mut rk = Rk4::new(1);
            let steps = (1.0 / h).round() as usize;
            for _ in 0..steps {
                rk.step(&mut x, h, |s, d| d[0] = -s[0]);
            }
            (x[0] - (-1.0f64).exp()).abs()
        };
        let e1 = run(0.1);
        let e2 = run(0.05);
        // error ratio ~ 2^4
        assert!(e1 / e2 > 14.0 && e1 / e2 < 18.0, "{}", e1 / e2);
    }

    #[test]
    fn harmonic_oscillator_energy() {
        let mut x = [1.0, 0.0];
        let mut rk = Rk4::new(2);
        for _ in 0..1000 {
            rk.step(&mut x, 0.01, |s, d| {
                d[0] = s[1];
                d[1] = -s[0];
            });
        }
        assert!((x[0] - 10.0f64.cos()).abs() < 1e-8);
    }
}
