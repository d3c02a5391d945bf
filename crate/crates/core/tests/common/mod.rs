//! Independent oracles for the closed forms.

/// Stationary distribution of the M/M/m birth-death chain, truncated once
/// the remaining geometric tail carries less than `tail_mass`.
///
/// Built from the cut equations `lambda * pi_k = min(k+1, m) * mu * pi_{k+1}`
/// and normalised at the end; it never touches the Erlang formulas.
pub struct ChainSolution {
    pub pi: Vec<f64>,
    pub servers: usize,
}

impl ChainSolution {
    pub fn solve(lambda: f64, mu: f64, servers: usize, tail_mass: f64) -> Self {
        let rho = lambda / (servers as f64 * mu);
        assert!(rho < 1.0, "oracle needs a stable chain");
        let mut weights = vec![1.0_f64];
        let mut total = 1.0;
        loop {
            let k = weights.len() - 1;
            let next = weights[k] * lambda / ((k + 1).min(servers) as f64 * mu);
            weights.push(next);
            total += next;
            // Beyond m every further state scales by rho.
            if k + 1 >= servers && next * rho / (1.0 - rho) / total < tail_mass {
                break;
            }
            assert!(weights.len() < 1_000_000, "chain did not converge");
        }
        let pi = weights.iter().map(|w| w / total).collect();
        Self { pi, servers }
    }

    pub fn p0(&self) -> f64 {
        self.pi[0]
    }

    /// Probability that all servers are busy.
    pub fn p_wait(&self) -> f64 {
        self.pi[self.servers..].iter().sum()
    }

    pub fn mean_tasks(&self) -> f64 {
        self.pi.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }
}
