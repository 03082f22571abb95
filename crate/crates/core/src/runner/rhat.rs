use crate::error::{Error, Result};

/// Classical potential scale reduction factor of equal-length chains.
pub fn gelman_rubin(chains: &[Vec<f64>]) -> Result<f64> {
    let m = chains.len();
    if m < 2 {
        return Err(Error::InvalidData("R-hat needs at least two chains".into()));
    }
    let n = chains[0].len();
    if n < 10 || chains.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidData("R-hat needs chains of equal length of at least 10".into()));
    }
    let nf = n as f64;
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / nf).collect();
    let grand = means.iter().sum::<f64>() / m as f64;
    let between = nf / (m as f64 - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let within = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (nf - 1.0))
        .sum::<f64>()
        / m as f64;
    if within <= 0.0 {
        return Err(Error::Degenerate("zero within-chain variance".into()));
    }
    let pooled = (nf - 1.0) / nf * within + between / nf;
    Ok((pooled / within).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(seed: u64, n: usize, shift: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| shift + Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect()
    }

    #[test]
    fn iid_chains_are_near_one() {
        let chains: Vec<_> = (0..4).map(|s| normals(s, 10_000, 0.0)).collect();
        let r = gelman_rubin(&chains).unwrap();
        assert!((0.999..=1.01).contains(&r), "{r}");
    }

    #[test]
    fn disjoint_chains_are_flagged() {
        let chains = vec![normals(1, 1000, 0.0), normals(2, 1000, 10.0)];
        assert!(gelman_rubin(&chains).unwrap() > 2.0);
    }

    #[test]
    fn constant_chains_are_degenerate() {
        let chains = vec![vec![1.0; 20], vec![1.0; 20]];
        assert!(matches!(gelman_rubin(&chains), Err(Error::Degenerate(_))));
        assert!(gelman_rubin(&[vec![0.0; 20]]).is_err());
        assert!(gelman_rubin(&[vec![0.0; 5], vec![1.0; 5]]).is_err());
    }
}
