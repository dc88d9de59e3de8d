//! No-U-turn transitions: multiplicative trajectory doubling, multinomial
//! sampling of states within subtrees, biased progressive sampling across
//! doublings, and a generalized U-turn stopping rule on the evolved
//! momentum sum.

use rand::Rng;

use super::{standard_normal, Target};

/// Energy increase beyond which a trajectory is declared divergent.
const DIVERGENCE_THRESHOLD: f64 = 1000.0;

/// One point on a trajectory with cached density and gradient.
#[derive(Debug, Clone)]
pub(crate) struct State {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub grad: Vec<f64>,
    pub logp: f64,
}

impl State {
    pub fn new(dim: usize) -> Self {
        Self {
            q: vec![0.0; dim],
            p: vec![0.0; dim],
            grad: vec![0.0; dim],
            logp: 0.0,
        }
    }
}

/// Aggregate statistics of one transition.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct TransitionStats {
    pub accept_sum: f64,
    pub n_states: usize,
    pub divergent: bool,
    pub max_depth_hit: bool,
    pub depth: usize,
}

pub(crate) struct Nuts<'a, T: Target + ?Sized> {
    target: &'a T,
    /// Estimated posterior variances; the metric is their inverse.
    inv_mass: &'a [f64],
    eps: f64,
    max_depth: usize,
    h0: f64,
}

/// Subtree summary carried through the recursion.
struct Subtree {
    /// Leftmost and rightmost states in trajectory time.
    minus: State,
    plus: State,
    /// Proposal drawn multinomially from the subtree.
    prop: State,
    /// Log of the total multinomial weight sum(exp(h0 - h)).
    log_sum_w: f64,
    /// Momentum sum across the subtree (U-turn test statistic).
    rho: Vec<f64>,
    valid: bool,
    divergent: bool,
}

impl<'a, T: Target + ?Sized> Nuts<'a, T> {
    pub fn new(target: &'a T, inv_mass: &'a [f64], eps: f64, max_depth: usize) -> Self {
        Self {
            target,
            inv_mass,
            eps,
            max_depth,
            h0: 0.0,
        }
    }

    fn kinetic(&self, p: &[f64]) -> f64 {
        0.5 * p
            .iter()
            .zip(self.inv_mass)
            .map(|(pi, mi)| pi * pi * mi)
            .sum::<f64>()
    }

    fn hamiltonian(&self, s: &State) -> f64 {
        -s.logp + self.kinetic(&s.p)
    }

    /// One leapfrog step in `dir` in trajectory time; returns false when the
    /// density or gradient stopped being finite.
    fn leapfrog(&self, s: &mut State, dir: f64) -> bool {
        let e = dir * self.eps;
        for i in 0..s.q.len() {
            s.p[i] += 0.5 * e * s.grad[i];
        }
        for i in 0..s.q.len() {
            s.q[i] += e * self.inv_mass[i] * s.p[i];
        }
        s.logp = self.target.logp_grad(&s.q, &mut s.grad);
        if !s.logp.is_finite() {
            return false;
        }
        for i in 0..s.q.len() {
            s.p[i] += 0.5 * e * s.grad[i];
        }
        true
    }

    /// Continue expanding while the momentum sum points away from both ends.
    fn no_u_turn(&self, minus: &State, plus: &State, rho: &[f64]) -> bool {
        let mut fwd = 0.0;
        let mut bwd = 0.0;
        for (i, &r) in rho.iter().enumerate() {
            fwd += plus.p[i] * self.inv_mass[i] * r;
            bwd += minus.p[i] * self.inv_mass[i] * r;
        }
        fwd > 0.0 && bwd > 0.0
    }

    fn leaf<R: Rng>(
        &self,
        from: &State,
        dir: f64,
        stats: &mut TransitionStats,
        _rng: &mut R,
    ) -> Subtree {
        let mut s = from.clone();
        let finite = self.leapfrog(&mut s, dir);
        let h = if finite {
            self.hamiltonian(&s)
        } else {
            f64::INFINITY
        };
        let delta = h - self.h0;
        let divergent = delta.is_nan() || delta > DIVERGENCE_THRESHOLD;
        stats.n_states += 1;
        stats.accept_sum += if delta.is_nan() {
            0.0
        } else {
            (-delta).exp().min(1.0)
        };
        let log_w = if divergent { f64::NEG_INFINITY } else { -delta };
        Subtree {
            minus: s.clone(),
            plus: s.clone(),
            rho: s.p.clone(),
            prop: s,
            log_sum_w: log_w,
            valid: !divergent,
            divergent,
        }
    }

    /// Build a balanced subtree of `depth` doublings extending `from`.
    fn build<R: Rng>(
        &self,
        depth: usize,
        from: &State,
        dir: f64,
        stats: &mut TransitionStats,
        rng: &mut R,
    ) -> Subtree {
        if depth == 0 {
            return self.leaf(from, dir, stats, rng);
        }
        let mut first = self.build(depth - 1, from, dir, stats, rng);
        if !first.valid {
            return first;
        }
        let edge = if dir > 0.0 {
            first.plus.clone()
        } else {
            first.minus.clone()
        };
        let second = self.build(depth - 1, &edge, dir, stats, rng);
        if !second.valid {
            first.valid = false;
            first.divergent |= second.divergent;
            return first;
        }
        // Multinomial choice between the two halves.
        let log_total = log_sum_exp(first.log_sum_w, second.log_sum_w);
        if (rng.gen::<f64>().ln()) < second.log_sum_w - log_total {
            first.prop = second.prop;
        }
        first.log_sum_w = log_total;
        for i in 0..first.rho.len() {
            first.rho[i] += second.rho[i];
        }
        if dir > 0.0 {
            first.plus = second.plus;
        } else {
            first.minus = second.minus;
        }
        first.valid = self.no_u_turn(&first.minus, &first.plus, &first.rho);
        first
    }

    /// Run one transition from `current` (whose logp and grad are filled).
    /// Returns the next state and the transition statistics.
    pub fn transition<R: Rng>(&mut self, current: &mut State, rng: &mut R) -> TransitionStats {
        for i in 0..current.p.len() {
            current.p[i] = standard_normal(rng) / self.inv_mass[i].sqrt();
        }
        self.h0 = self.hamiltonian(current);
        let mut stats = TransitionStats::default();

        let mut minus = current.clone();
        let mut plus = current.clone();
        let mut sample = current.clone();
        let mut rho = current.p.clone();
        let mut log_sum_w = 0.0;

        for depth in 0..self.max_depth {
            stats.depth = depth + 1;
            let dir: f64 = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let edge = if dir > 0.0 {
                plus.clone()
            } else {
                minus.clone()
            };
            let sub = self.build(depth, &edge, dir, &mut stats, rng);
            if sub.divergent {
                stats.divergent = true;
            }
            if !sub.valid {
                break;
            }
            // Biased progressive sampling favors the fresh subtree.
            if (rng.gen::<f64>().ln()) < sub.log_sum_w - log_sum_w {
                sample = sub.prop.clone();
            }
            log_sum_w = log_sum_exp(log_sum_w, sub.log_sum_w);
            for (r, &dr) in rho.iter_mut().zip(&sub.rho) {
                *r += dr;
            }
            if dir > 0.0 {
                plus = sub.plus;
            } else {
                minus = sub.minus;
            }
            if !self.no_u_turn(&minus, &plus, &rho) {
                break;
            }
            if depth + 1 == self.max_depth {
                stats.max_depth_hit = true;
            }
        }
        *current = sample;
        stats
    }
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        m + ((a - m).exp() + (b - m).exp()).ln()
    }
}

/// Find an initial step size producing an acceptance statistic near one
/// half, by doubling or halving from one.
pub(crate) fn find_reasonable_epsilon<T: Target + ?Sized, R: Rng>(
    target: &T,
    inv_mass: &[f64],
    q0: &[f64],
    logp0: f64,
    grad0: &[f64],
    rng: &mut R,
) -> Result<f64, f64> {
    let dim = q0.len();
    let mut eps = 1.0;
    let mut state = State::new(dim);
    state.q.copy_from_slice(q0);
    state.grad.copy_from_slice(grad0);
    state.logp = logp0;
    for (p, &im) in state.p.iter_mut().zip(inv_mass) {
        *p = standard_normal(rng) / im.sqrt();
    }
    let nuts = Nuts::new(target, inv_mass, eps, 1);
    let h0 = nuts.hamiltonian(&state);

    let log_accept = |eps: f64, state: &State| -> f64 {
        let mut trial = state.clone();
        let stepper = Nuts::new(target, inv_mass, eps, 1);
        if !stepper.leapfrog(&mut trial, 1.0) {
            return f64::NEG_INFINITY;
        }
        let h = stepper.hamiltonian(&trial);
        if h.is_nan() {
            f64::NEG_INFINITY
        } else {
            h0 - h
        }
    };

    let la = log_accept(eps, &state);
    let dir: f64 = if la > (0.5f64).ln() { 1.0 } else { -1.0 };
    for _ in 0..100 {
        let la = log_accept(eps, &state);
        if dir > 0.0 && la <= (0.5f64).ln() {
            break;
        }
        if dir < 0.0 && la >= (0.5f64).ln() {
            break;
        }
        eps *= if dir > 0.0 { 2.0 } else { 0.5 };
        if !(1e-12..=1e7).contains(&eps) {
            break;
        }
    }
    if eps < 1e-12 {
        Err(eps)
    } else {
        Ok(eps)
    }
}
