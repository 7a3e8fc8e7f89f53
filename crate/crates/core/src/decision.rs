use crate::error::{Error, Result};
use crate::scenario::Topology;

const SUM_TOL: f64 = 1e-9;

/// One slot's control action for every TU in the network.
///
/// `z[i][n]` is the airtime share of subchannel `n` (of TU `i`'s home MIS)
/// given to TU `i`. Exclusive policies only ever write 0 or 1; the TDMA
/// baseline writes fractional shares.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub y: Vec<bool>,
    pub z: Vec<Vec<f64>>,
    pub f: Vec<f64>,
    pub m: Vec<u64>,
}

impl Decision {
    pub fn idle(num_tus: usize, subchannels: usize) -> Self {
        Self {
            y: vec![false; num_tus],
            z: vec![vec![0.0; subchannels]; num_tus],
            f: vec![0.0; num_tus],
            m: vec![0; num_tus],
        }
    }

    pub fn num_tus(&self) -> usize {
        self.y.len()
    }

    /// Checks compute shares in [0, 1] summing to at most 1 per MIS and
    /// subchannel shares summing to at most 1 (binary when `exclusive`). When `capacities` is given as `(theta, mu)` per TU, the
    /// migration bound `m <= theta - mu` is checked as well.
    pub fn check(
        &self,
        topo: &Topology,
        exclusive: bool,
        capacities: Option<(&[u64], &[u64])>,
    ) -> Result<()> {
        for k in 0..topo.num_mis() {
            let tus = topo.tus_of(k);
            let mut f_sum = 0.0;
            for i in tus.clone() {
                let f = self.f[i];
                if !(0.0..=1.0).contains(&f) {
                    return Err(Error::Infeasible(format!("f[{i}] = {f} outside [0, 1]")));
                }
                f_sum += f;
                for (n, &z) in self.z[i].iter().enumerate() {
                    let ok = if exclusive {
                        z == 0.0 || z == 1.0
                    } else {
                        (0.0..=1.0).contains(&z)
                    };
                    if !ok {
                        return Err(Error::Infeasible(format!("z[{i}][{n}] = {z}")));
                    }
                }
            }
            if f_sum > 1.0 + SUM_TOL {
                return Err(Error::Infeasible(format!("MIS {k}: sum f = {f_sum} > 1")));
            }
            if let Some(first) = tus.clone().next() {
                for n in 0..self.z[first].len() {
                    let share: f64 = tus.clone().map(|i| self.z[i][n]).sum();
                    if share > 1.0 + SUM_TOL {
                        return Err(Error::Infeasible(format!(
                            "MIS {k}: subchannel {n} shared {share} > 1"
                        )));
                    }
                }
            }
        }
        if let Some((theta, mu)) = capacities {
            for i in 0..self.num_tus() {
                let bound = theta[i].saturating_sub(mu[i]);
                if self.m[i] > bound {
                    return Err(Error::Infeasible(format!(
                        "m[{i}] = {} exceeds theta - mu = {bound}",
                        self.m[i]
                    )));
                }
            }
        }
        Ok(())
    }
}
