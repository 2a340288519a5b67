use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when matching a computed noise value to a support point.
pub const SUPPORT_TOL: f64 = 1e-9;

/// Exogenous noise distribution of one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NoiseLaw {
    /// `Bin(n, p)` shifted so that its mean is `mean`.
    ShiftedBinomial { n: u32, p: f64, mean: f64 },
    Gaussian { mu: f64, sigma: f64 },
    Uniform { lo: f64, hi: f64 },
    Bernoulli { p: f64 },
    /// Weighted components; weights sum to one.
    Mixture(Vec<(f64, NoiseLaw)>),
}

impl NoiseLaw {
    pub fn shbin(n: u32, p: f64, mean: f64) -> Self {
        NoiseLaw::ShiftedBinomial { n, p, mean }
    }

    pub fn std_normal() -> Self {
        NoiseLaw::Gaussian { mu: 0.0, sigma: 1.0 }
    }

    /// Point mass at zero.
    pub fn zero() -> Self {
        NoiseLaw::ShiftedBinomial { n: 0, p: 0.5, mean: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        match self {
            NoiseLaw::ShiftedBinomial { p, mean, .. } => {
                if !(0.0..=1.0).contains(p) || !mean.is_finite() {
                    return bad(format!("invalid shifted binomial {self:?}"));
                }
            }
            NoiseLaw::Gaussian { mu, sigma } => {
                if !mu.is_finite() || !sigma.is_finite() || *sigma < 0.0 {
                    return bad(format!("invalid gaussian {self:?}"));
                }
            }
            NoiseLaw::Uniform { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                    return bad(format!("invalid uniform {self:?}"));
                }
            }
            NoiseLaw::Bernoulli { p } => {
                if !(0.0..=1.0).contains(p) {
                    return bad(format!("invalid bernoulli {self:?}"));
                }
            }
            NoiseLaw::Mixture(parts) => {
                if parts.is_empty() {
                    return bad("empty mixture".into());
                }
                let total: f64 = parts.iter().map(|(w, _)| *w).sum();
                if parts.iter().any(|(w, _)| *w < 0.0) || (total - 1.0).abs() > 1e-9 {
                    return bad(format!("mixture weights must be nonnegative and sum to 1 (got {total})"));
                }
                let discrete = parts[0].1.is_discrete();
                for (_, law) in parts {
                    law.validate()?;
                    if law.is_discrete() != discrete {
                        return bad("mixture mixes discrete and continuous components".into());
                    }
                }
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseLaw::ShiftedBinomial { n, p, mean } => {
                let k = (0..*n).filter(|_| rng.gen::<f64>() < *p).count() as f64;
                k + (mean - *n as f64 * p)
            }
            NoiseLaw::Gaussian { mu, sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                mu + sigma * z
            }
            NoiseLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.gen::<f64>(),
            NoiseLaw::Bernoulli { p } => f64::from(u8::from(rng.gen::<f64>() < *p)),
            NoiseLaw::Mixture(parts) => {
                let mut r = rng.gen::<f64>();
                for (w, law) in parts {
                    if r < *w {
                        return law.sample(rng);
                    }
                    r -= w;
                }
                parts.last().expect("validated mixture").1.sample(rng)
            }
        }
    }

    /// Support points with their probabilities, merged and sorted, for laws
    /// with finite support. `None` for continuous laws.
    pub fn finite_support(&self) -> Option<Vec<(f64, f64)>> {
        let mut pts: Vec<(f64, f64)> = match self {
            NoiseLaw::ShiftedBinomial { n, p, mean } => {
                let offset = mean - *n as f64 * p;
                (0..=*n)
                    .map(|k| (k as f64 + offset, binomial_pmf(*n, k, *p)))
                    .collect()
            }
            NoiseLaw::Gaussian { mu, sigma } if *sigma == 0.0 => vec![(*mu, 1.0)],
            NoiseLaw::Gaussian { .. } | NoiseLaw::Uniform { .. } => return None,
            NoiseLaw::Bernoulli { p } => vec![(0.0, 1.0 - p), (1.0, *p)],
            NoiseLaw::Mixture(parts) => {
                let mut all = Vec::new();
                for (w, law) in parts {
                    all.extend(law.finite_support()?.into_iter().map(|(v, q)| (v, q * w)));
                }
                all
            }
        };
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
        for (v, q) in pts {
            match merged.last_mut() {
                Some(last) if (last.0 - v).abs() <= SUPPORT_TOL => last.1 += q,
                _ => merged.push((v, q)),
            }
        }
        merged.retain(|&(_, q)| q > 0.0);
        Some(merged)
    }

    pub fn is_discrete(&self) -> bool {
        match self {
            NoiseLaw::Gaussian { sigma, .. } => *sigma == 0.0,
            NoiseLaw::Uniform { .. } => false,
            NoiseLaw::Mixture(parts) => parts.iter().all(|(_, l)| l.is_discrete()),
            _ => true,
        }
    }

    /// Maps a computed value onto the law's support: the nearest support
    /// point within tolerance for discrete laws, the value itself for
    /// continuous laws when it lies inside the support (± tolerance).
    pub fn snap(&self, u: f64) -> Option<f64> {
        if !u.is_finite() {
            return None;
        }
        match self {
            NoiseLaw::Uniform { lo, hi } => {
                (u >= lo - SUPPORT_TOL && u <= hi + SUPPORT_TOL).then_some(u.clamp(*lo, *hi))
            }
            NoiseLaw::Gaussian { sigma, .. } if *sigma > 0.0 => Some(u),
            NoiseLaw::Mixture(parts) if !self.is_discrete() => {
                parts.iter().find_map(|(_, l)| l.snap(u)).map(|_| u)
            }
            _ => self
                .finite_support()
                .expect("discrete law")
                .into_iter()
                .find(|(v, _)| (v - u).abs() <= SUPPORT_TOL)
                .map(|(v, _)| v),
        }
    }

    /// Probability mass (discrete) or density (continuous) at `u`, after
    /// snapping. Zero outside the support.
    pub fn likelihood(&self, u: f64) -> f64 {
        let Some(u) = self.snap(u) else { return 0.0 };
        match self {
            NoiseLaw::Gaussian { mu, sigma } if *sigma > 0.0 => {
                let z = (u - mu) / sigma;
                (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
            }
            NoiseLaw::Uniform { lo, hi } => 1.0 / (hi - lo),
            NoiseLaw::Mixture(parts) if !self.is_discrete() => {
                parts.iter().map(|(w, l)| w * l.likelihood(u)).sum()
            }
            _ => self
                .finite_support()
                .expect("discrete law")
                .into_iter()
                .find(|(v, _)| *v == u)
                .map_or(0.0, |(_, q)| q),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            NoiseLaw::ShiftedBinomial { mean, .. } => *mean,
            NoiseLaw::Gaussian { mu, .. } => *mu,
            NoiseLaw::Uniform { lo, hi } => 0.5 * (lo + hi),
            NoiseLaw::Bernoulli { p } => *p,
            NoiseLaw::Mixture(parts) => parts.iter().map(|(w, l)| w * l.mean()).sum(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            NoiseLaw::ShiftedBinomial { n, p, .. } => *n as f64 * p * (1.0 - p),
            NoiseLaw::Gaussian { sigma, .. } => sigma * sigma,
            NoiseLaw::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
            NoiseLaw::Bernoulli { p } => p * (1.0 - p),
            NoiseLaw::Mixture(parts) => {
                let m = self.mean();
                parts
                    .iter()
                    .map(|(w, l)| w * (l.variance() + (l.mean() - m).powi(2)))
                    .sum()
            }
        }
    }
}

fn binomial_pmf(n: u32, k: u32, p: f64) -> f64 {
    let mut c = 1.0;
    for i in 0..k {
        c = c * f64::from(n - i) / f64::from(i + 1);
    }
    c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn shbin_support_is_shifted_binomial() {
        let law = NoiseLaw::shbin(8, 0.5, 0.0);
        let s = law.finite_support().unwrap();
        let vals: Vec<f64> = s.iter().map(|p| p.0).collect();
        assert_eq!(vals, (-4..=4).map(f64::from).collect::<Vec<_>>());
        assert!((s.iter().map(|p| p.1).sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(s[4].1, 70.0 / 256.0);
    }

    #[test]
    fn shbin_samples_stay_on_support() {
        let law = NoiseLaw::shbin(5, 0.5, 3.5);
        let mut rng = stream(1, 0);
        for _ in 0..1000 {
            let u = law.sample(&mut rng);
            assert!(u.fract() == 0.0 && (1.0..=6.0).contains(&u), "{u}");
        }
    }

    #[test]
    fn mixture_support_and_moments() {
        let law = NoiseLaw::Mixture(vec![
            (0.5, NoiseLaw::shbin(2, 0.5, 2.0)),
            (0.5, NoiseLaw::shbin(4, 0.5, 4.0)),
        ]);
        law.validate().unwrap();
        let s = law.finite_support().unwrap();
        assert_eq!(s.iter().map(|p| p.0).collect::<Vec<_>>(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let mean: f64 = s.iter().map(|(v, q)| v * q).sum();
        let var: f64 = s.iter().map(|(v, q)| q * (v - mean).powi(2)).sum();
        assert!((mean - law.mean()).abs() < 1e-12);
        assert!((var - law.variance()).abs() < 1e-12);
    }

    #[test]
    fn bad_mixture_weights() {
        let law = NoiseLaw::Mixture(vec![(0.3, NoiseLaw::zero()), (0.3, NoiseLaw::zero())]);
        assert!(law.validate().is_err());
    }

    #[test]
    fn snapping() {
        let law = NoiseLaw::shbin(2, 0.5, 0.0);
        assert_eq!(law.snap(1.0 + 1e-12), Some(1.0));
        assert_eq!(law.snap(0.5), None);
        assert_eq!(law.likelihood(0.0), 0.5);
        assert_eq!(law.likelihood(2.0), 0.0);
        let u = NoiseLaw::Uniform { lo: 0.0, hi: 1.0 };
        assert_eq!(u.likelihood(1.0 + 1e-12), 1.0);
        assert_eq!(u.likelihood(1.1), 0.0);
    }
}
