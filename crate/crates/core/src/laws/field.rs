//! Replica fields and capped first-occurrence searches on them.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{Configuration, Pattern};
use crate::model::Model;
use crate::rng::Purpose;
use crate::sampler::{self, ExactField, Method, SampleDomain, SampleMeta, SamplerSpec};
use crate::stats::{first_occurrence, scan_shells, Hit};

/// One per-replica observation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HitRecord {
    pub replica: u64,
    pub pattern_hash: String,
    pub value: usize,
    pub censored: bool,
    pub cap: usize,
}

impl HitRecord {
    pub fn new(replica: u64, pattern: &Pattern, hit: Hit, cap: usize) -> Self {
        Self {
            replica,
            pattern_hash: pattern.hash_hex(),
            value: hit.capped(),
            censored: hit.is_censored(),
            cap,
        }
    }

    pub fn hit(&self) -> Hit {
        if self.censored {
            Hit::Censored(self.cap)
        } else {
            Hit::Found(self.value)
        }
    }

    pub const CSV_HEADER: &'static str = "replica,pattern_hash,value,censored,K";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.replica, self.pattern_hash, self.value, self.censored, self.cap
        )
    }
}

/// What a search looks for.
#[derive(Clone, Copy, Debug)]
pub enum SearchTarget<'a> {
    /// A fixed pattern.
    Pattern(&'a Pattern),
    /// The field's own initial `n`-pattern (repetition time).
    Own(usize),
}

impl SearchTarget<'_> {
    fn side(&self) -> usize {
        match self {
            SearchTarget::Pattern(a) => a.side(),
            SearchTarget::Own(n) => *n,
        }
    }

    fn resolve(&self, sigma: &Configuration) -> Result<Pattern> {
        match self {
            SearchTarget::Pattern(a) => Ok((*a).clone()),
            SearchTarget::Own(n) => sigma.initial_pattern(*n),
        }
    }
}

/// A family of replica fields drawn from one model and one seed.
#[derive(Clone, Debug)]
pub struct FieldGen {
    pub model: Model,
    pub method: Method,
    pub seed: u64,
    pub purpose: Purpose,
    /// Glauber sweeps; `None` uses the sampler default.
    pub burn_in: Option<usize>,
    pub allow_non_dobrushin: bool,
}

impl FieldGen {
    pub fn new(model: Model, seed: u64) -> Self {
        let method = Method::for_model(&model);
        Self {
            model,
            method,
            seed,
            purpose: Purpose::Field,
            burn_in: None,
            allow_non_dobrushin: false,
        }
    }

    pub fn with_purpose(mut self, purpose: Purpose) -> Self {
        self.purpose = purpose;
        self
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    fn exact(&self, replica: u64) -> Result<ExactField> {
        ExactField::new(&self.model, self.method, self.seed, self.purpose, replica)
    }

    /// Torus side used for Glauber replicas searched up to `cap`; the `2R`
    /// margin is never searched.
    pub fn torus_len(&self, n: usize, cap: usize) -> usize {
        cap + n + 1 + 2 * self.model.interaction().range()
    }

    fn glauber_spec(&self, len: usize, replica: u64) -> SamplerSpec {
        SamplerSpec {
            model: self.model.clone(),
            domain: SampleDomain::Torus { len },
            method: Method::Glauber,
            burn_in: self.burn_in,
            seed: self.seed,
            // Distinct purposes must not share Glauber streams.
            replica: replica * 8 + self.purpose as u64,
            allow_non_dobrushin: self.allow_non_dobrushin,
            purpose: self.purpose,
        }
    }

    /// A field covering `C_side` for replica `replica`.
    pub fn window(&self, replica: u64, side: usize) -> Result<Configuration> {
        match self.method {
            Method::Glauber => {
                let len = side + 1 + 2 * self.model.interaction().range();
                let s = sampler::sample(&self.glauber_spec(len, replica))?;
                Ok(s.config)
            }
            _ => self.exact(replica)?.window(side),
        }
    }

    /// Sampler metadata for the replica fields used with cap `cap`.
    /// Glauber runs replica 0 once to report its diagnostics.
    pub fn meta(&self, n: usize, cap: usize) -> Result<SampleMeta> {
        match self.method {
            Method::Glauber => {
                Ok(sampler::sample(&self.glauber_spec(self.torus_len(n, cap), 0))?.meta)
            }
            m => Ok(SampleMeta {
                method: format!("{m:?}").to_lowercase(),
                seed: self.seed,
                ..Default::default()
            }),
        }
    }

    /// First occurrence of `target` with `|x| > 0`, searched up to `cap`.
    ///
    /// Exact fields are generated in windows of doubling side and scanned
    /// shell by shell, which gives the same answer as one scan of the full
    /// `C_{cap+n}` window because the fields are prefix consistent.
    pub fn hit(
        &self,
        replica: u64,
        target: SearchTarget<'_>,
        cap: usize,
    ) -> Result<(Hit, Pattern)> {
        if cap == 0 {
            return Err(Error::OutOfDomain("cap must be at least 1".into()));
        }
        let n = target.side();
        if self.method == Method::Glauber {
            let len = self.torus_len(n, cap);
            let sigma = sampler::sample(&self.glauber_spec(len, replica))?.config;
            let a = target.resolve(&sigma)?;
            return Ok((first_occurrence(&a, &sigma, cap)?, a));
        }
        let field = self.exact(replica)?;
        let mut lo = 1;
        let mut hi = cap.min(16);
        loop {
            let sigma = field.window(hi + n)?;
            let a = target.resolve(&sigma)?;
            if let Some(k) = scan_shells(&a, &sigma, lo, hi)? {
                return Ok((Hit::Found(k), a));
            }
            if hi == cap {
                return Ok((Hit::Censored(cap), a));
            }
            lo = hi + 1;
            hi = (2 * hi).min(cap);
        }
    }
}

/// A pattern drawn from the model itself (the initial `n`-pattern of a
/// dedicated replica).
pub fn random_pattern(gen: &FieldGen, n: usize, index: u64) -> Result<Pattern> {
    let g = gen.clone().with_purpose(Purpose::Pattern);
    g.window(index, n)?.initial_pattern(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::first_repetition;

    #[test]
    fn doubling_search_matches_full_scan() {
        let gen = FieldGen::new(Model::bernoulli(2, 0.5).unwrap(), 3);
        let a = Pattern::new(2, 1, 2, vec![1, 1, 0, 1]).unwrap();
        for replica in 0..40 {
            for cap in [1, 5, 17, 40] {
                let (hit, _) = gen.hit(replica, SearchTarget::Pattern(&a), cap).unwrap();
                let full = gen.window(replica, cap + 1).unwrap();
                assert_eq!(hit, first_occurrence(&a, &full, cap).unwrap());
                let (rep, own) = gen.hit(replica, SearchTarget::Own(2), cap).unwrap();
                let full = gen.window(replica, cap + 2).unwrap();
                assert_eq!(rep, first_repetition(&full, 2, cap).unwrap());
                assert_eq!(own, full.initial_pattern(2).unwrap());
            }
        }
    }

    #[test]
    fn glauber_search_uses_margin_free_window() {
        let mut gen = FieldGen::new(Model::ising(2, 0.1, 1.0, 0.0).unwrap(), 1);
        gen.burn_in = Some(5);
        assert_eq!(gen.torus_len(1, 6), 10);
        let a = Pattern::constant(2, 1, 2, 1).unwrap();
        let (h1, _) = gen.hit(2, SearchTarget::Pattern(&a), 6).unwrap();
        let (h2, _) = gen.hit(2, SearchTarget::Pattern(&a), 6).unwrap();
        assert_eq!(h1, h2);
        let meta = gen.meta(1, 6).unwrap();
        assert_eq!(meta.burn_in, 5);
    }

    #[test]
    fn records_round_trip() {
        let a = Pattern::constant(2, 1, 2, 0).unwrap();
        let r = HitRecord::new(4, &a, Hit::Censored(9), 9);
        assert_eq!(r.hit(), Hit::Censored(9));
        assert!(r.csv_line().starts_with("4,"));
        assert!(r.csv_line().ends_with(",9,true,9"));
    }
}
