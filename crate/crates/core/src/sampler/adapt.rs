//! Warmup adaptation: dual-averaging step size control and a windowed
//! diagonal metric estimated from warmup draws.

/// Nesterov dual averaging targeting a fixed acceptance probability.
#[derive(Debug, Clone)]
pub(crate) struct DualAveraging {
    mu: f64,
    log_eps: f64,
    log_eps_bar: f64,
    h_bar: f64,
    t: f64,
    gamma: f64,
    t0: f64,
    kappa: f64,
    delta: f64,
}

impl DualAveraging {
    pub fn new(eps0: f64, delta: f64) -> Self {
        Self {
            mu: (10.0 * eps0).ln(),
            log_eps: eps0.ln(),
            log_eps_bar: 0.0,
            h_bar: 0.0,
            t: 0.0,
            gamma: 0.05,
            t0: 10.0,
            kappa: 0.75,
            delta,
        }
    }

    /// Restart around a fresh step size, keeping the target acceptance.
    pub fn restart(&mut self, eps: f64) {
        *self = Self::new(eps, self.delta);
    }

    /// Feed one acceptance statistic; returns the step size for the next
    /// iteration.
    pub fn update(&mut self, accept_prob: f64) -> f64 {
        self.t += 1.0;
        let eta = 1.0 / (self.t + self.t0);
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (self.delta - accept_prob);
        self.log_eps = self.mu - self.t.sqrt() / self.gamma * self.h_bar;
        let w = self.t.powf(-self.kappa);
        self.log_eps_bar = w * self.log_eps + (1.0 - w) * self.log_eps_bar;
        self.log_eps.exp()
    }

    /// Smoothed step size to freeze for the sampling phase.
    pub fn adapted(&self) -> f64 {
        self.log_eps_bar.exp()
    }

    #[cfg(test)]
    pub fn current(&self) -> f64 {
        self.log_eps.exp()
    }
}

/// Streaming mean and variance accumulator.
#[derive(Debug, Clone)]
pub(crate) struct Welford {
    n: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    pub fn new(dim: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn reset(&mut self) {
        self.n = 0;
        self.mean.fill(0.0);
        self.m2.fill(0.0);
    }

    pub fn push(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((&xi, mean), m2) in x.iter().zip(self.mean.iter_mut()).zip(self.m2.iter_mut()) {
            let d = xi - *mean;
            *mean += d / n;
            *m2 += d * (xi - *mean);
        }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    /// Sample variances shrunk toward a small constant, as used for metric
    /// regularization with few warmup draws.
    pub fn regularized_variance(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.m2
            .iter()
            .map(|&m2| {
                let var = if self.n > 1 { m2 / (n - 1.0) } else { 1.0 };
                (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
            })
            .collect()
    }
}

/// Warmup layout: a fast initial buffer (step size only), expanding slow
/// windows (metric estimation), and a fast terminal buffer.
#[derive(Debug, Clone)]
pub(crate) struct WarmupSchedule {
    /// First iteration of the slow region.
    pub slow_start: usize,
    /// One past the last iteration of the slow region.
    pub slow_end: usize,
    /// Exclusive end iteration of each metric window.
    pub window_ends: Vec<usize>,
}

impl WarmupSchedule {
    pub fn new(warmup: usize) -> Self {
        if warmup == 0 {
            return Self {
                slow_start: 0,
                slow_end: 0,
                window_ends: Vec::new(),
            };
        }
        let (init, term, base) = if warmup >= 150 {
            (75, 50, 25)
        } else {
            let init = (0.15 * warmup as f64) as usize;
            let term = (0.10 * warmup as f64) as usize;
            let base = warmup.saturating_sub(init + term).max(1);
            (init, term, base)
        };
        let slow_start = init.min(warmup);
        let slow_end = warmup.saturating_sub(term).max(slow_start);
        let mut window_ends = Vec::new();
        let mut start = slow_start;
        let mut width = base;
        while start < slow_end {
            let mut end = start + width;
            if end + 2 * width > slow_end || end > slow_end {
                end = slow_end;
            }
            window_ends.push(end);
            start = end;
            width *= 2;
        }
        Self {
            slow_start,
            slow_end,
            window_ends,
        }
    }

    pub fn in_slow(&self, iter: usize) -> bool {
        iter >= self.slow_start && iter < self.slow_end
    }

    pub fn is_window_end(&self, iter: usize) -> bool {
        self.window_ends.contains(&(iter + 1))
    }
}
