use crate::error::{Error, Result};

/// Streaming count, mean and centered second moment of one scalar.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScalarStat {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl ScalarStat {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Pooled statistics of two disjoint sample sets.
    pub fn merge(&self, other: &ScalarStat) -> ScalarStat {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta = other.mean - self.mean;
        ScalarStat {
            count: self.count + other.count,
            mean: (na * self.mean + nb * other.mean) / n,
            m2: self.m2 + other.m2 + delta * delta * na * nb / n,
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        self.m2 / (self.count - 1) as f64
    }

    /// Standard error of the mean, assuming independent samples.
    pub fn standard_error(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }
}

impl FromIterator<f64> for ScalarStat {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = ScalarStat::default();
        iter.into_iter().for_each(|x| s.push(x));
        s
    }
}

/// Named scalar observables plus per-distance-class correlation statistics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Accumulator {
    names: Vec<String>,
    scalars: Vec<ScalarStat>,
    classes: Vec<ScalarStat>,
}

impl Accumulator {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>, class_count: usize) -> Self {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        Accumulator {
            scalars: vec![ScalarStat::default(); names.len()],
            names,
            classes: vec![ScalarStat::default(); class_count],
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn sample_count(&self) -> u64 {
        self.scalars
            .first()
            .or(self.classes.first())
            .map_or(0, |s| s.count)
    }

    /// Records one sample: a value per registered scalar and per class.
    pub fn push(&mut self, scalars: &[f64], classes: &[f64]) -> Result<()> {
        if scalars.len() != self.scalars.len() || classes.len() != self.classes.len() {
            return Err(Error::InvalidArgument(format!(
                "accumulator expects {} scalars and {} classes, got {} and {}",
                self.scalars.len(),
                self.classes.len(),
                scalars.len(),
                classes.len()
            )));
        }
        for (s, &x) in self.scalars.iter_mut().zip(scalars) {
            s.push(x);
        }
        for (s, &x) in self.classes.iter_mut().zip(classes) {
            s.push(x);
        }
        Ok(())
    }

    pub fn scalar(&self, name: &str) -> Option<&ScalarStat> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.scalars[i])
    }

    pub fn scalars(&self) -> impl Iterator<Item = (&str, &ScalarStat)> {
        self.names.iter().map(String::as_str).zip(&self.scalars)
    }

    pub fn classes(&self) -> &[ScalarStat] {
        &self.classes
    }

    pub fn merge(&self, other: &Accumulator) -> Result<Accumulator> {
        if self.names != other.names || self.classes.len() != other.classes.len() {
            return Err(Error::InvalidArgument(
                "cannot merge accumulators with different registrations".into(),
            ));
        }
        Ok(Accumulator {
            names: self.names.clone(),
            scalars: self
                .scalars
                .iter()
                .zip(&other.scalars)
                .map(|(a, b)| a.merge(b))
                .collect(),
            classes: self
                .classes
                .iter()
                .zip(&other.classes)
                .map(|(a, b)| a.merge(b))
                .collect(),
        })
    }

    /// `name.count`, `name.mean`, `name.m2` entries at round-trip precision.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (name, s) in self.scalars() {
            out.push((format!("{name}.count"), s.count.to_string()));
            out.push((format!("{name}.mean"), format!("{:?}", s.mean)));
            out.push((format!("{name}.m2"), format!("{:?}", s.m2)));
        }
        out
    }

    /// Restores scalar statistics written by [`Accumulator::to_pairs`].
    pub fn restore_pairs<'a>(
        &mut self,
        mut lookup: impl FnMut(&str) -> Option<&'a str>,
    ) -> Result<()> {
        for (name, s) in self.names.iter().zip(self.scalars.iter_mut()) {
            let field = |suffix: &str, lookup: &mut dyn FnMut(&str) -> Option<&'a str>| {
                let key = format!("{name}.{suffix}");
                lookup(&key).ok_or_else(|| Error::Parse(format!("missing accumulator entry `{key}`")))
            };
            let bad = |e: String| Error::Parse(format!("accumulator `{name}`: {e}"));
            s.count = field("count", &mut lookup)?.parse().map_err(|e| bad(format!("{e}")))?;
            s.mean = field("mean", &mut lookup)?.parse().map_err(|e| bad(format!("{e}")))?;
            s.m2 = field("m2", &mut lookup)?.parse().map_err(|e| bad(format!("{e}")))?;
        }
        Ok(())
    }
}

/// Mean over all values and batch-means standard error with `batches`
/// equal batches (fewer when there are not enough values). Trailing values
/// that do not fill a batch still count toward the mean.
pub fn batch_means(values: &[f64], batches: usize) -> Result<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 samples for an error estimate, got {n}"
        )));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let nb = batches.clamp(2, n);
    let len = n / nb;
    let stat: ScalarStat = values
        .chunks_exact(len)
        .take(nb)
        .map(|c| c.iter().sum::<f64>() / len as f64)
        .collect();
    Ok((mean, stat.standard_error()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 4.0, -2.0, 7.5, 3.25];
        let s: ScalarStat = xs.iter().copied().collect();
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert!((s.mean - mean).abs() < 1e-14);
        assert!((s.variance() - var).abs() < 1e-12);
    }

    #[test]
    fn batch_means_of_constant_series() {
        let (m, se) = batch_means(&[0.25; 400], 20).unwrap();
        assert_eq!(m, 0.25);
        assert_eq!(se, 0.0);
        assert!(batch_means(&[1.0], 20).is_err());
    }

    #[test]
    fn batch_means_sees_autocorrelation() {
        // Long runs of identical values: naive SE underestimates, batches do not.
        let series: Vec<f64> = (0..2000).map(|i| if (i / 100) % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let naive: ScalarStat = series.iter().copied().collect();
        let (_, se) = batch_means(&series, 20).unwrap();
        assert!(se > 5.0 * naive.standard_error());
    }

    #[test]
    fn accumulator_checks_shapes() {
        let mut a = Accumulator::new(["mx"], 2);
        assert!(a.push(&[1.0], &[0.0]).is_err());
        a.push(&[1.0], &[0.0, 1.0]).unwrap();
        let b = Accumulator::new(["my"], 2);
        assert!(a.merge(&b).is_err());
    }

    #[test]
    fn accumulator_pairs_round_trip() {
        let mut a = Accumulator::new(["mx", "sxx"], 0);
        for i in 0..17 {
            a.push(&[i as f64 * 0.1, (i as f64).sin()], &[]).unwrap();
        }
        let pairs: std::collections::BTreeMap<String, String> = a.to_pairs().into_iter().collect();
        let mut b = Accumulator::new(["mx", "sxx"], 0);
        b.restore_pairs(|k| pairs.get(k).map(String::as_str)).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn split_merge_matches_unsplit(xs in proptest::collection::vec(-10.0..10.0f64, 2..200), cut in 0usize..200) {
            let cut = cut.min(xs.len());
            let whole: ScalarStat = xs.iter().copied().collect();
            let a: ScalarStat = xs[..cut].iter().copied().collect();
            let b: ScalarStat = xs[cut..].iter().copied().collect();
            let ab = a.merge(&b);
            let ba = b.merge(&a);
            prop_assert_eq!(ab.count, whole.count);
            prop_assert!((ab.mean - whole.mean).abs() < 1e-12);
            prop_assert!((ab.m2 - whole.m2).abs() < 1e-9 * (1.0 + whole.m2));
            prop_assert!((ab.mean - ba.mean).abs() < 1e-12);
        }
    }
}
