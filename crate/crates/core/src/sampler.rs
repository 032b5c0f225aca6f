//! Field samplers: exact iid and Markov-product fields, and Glauber
//! heat-bath dynamics on a torus for Gibbs models.
//!
//! The iid and Markov-product samplers address the random stream by row
//! (see [`crate::rng`]), so the field on `C_m` is a prefix of the field on
//! `C_{m'}` for `m < m'`. Glauber samples are torus configurations and have
//! no such property.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dobrushin::check_dobrushin;
use crate::error::{Error, Result};
use crate::lattice::{Configuration, Cube, Domain, LatticeVector};
use crate::model::{Interaction, Model, ModelKind};
use crate::rng::{self, Purpose, MAX_ROW_COORD};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Iid,
    MarkovProduct,
    Glauber,
}

impl Method {
    /// The exact sampler when the model has one, Glauber otherwise.
    pub fn for_model(model: &Model) -> Self {
        match model.kind() {
            ModelKind::Iid { .. } => Method::Iid,
            ModelKind::MarkovProduct { .. } => Method::MarkovProduct,
            _ => Method::Glauber,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleDomain {
    /// The cube `C_side`.
    Cube { side: usize },
    /// A periodic torus with `len` sites per axis.
    Torus { len: usize },
}

impl SampleDomain {
    fn domain(&self, dim: usize) -> Domain {
        match *self {
            SampleDomain::Cube { side } => Domain::Cube(Cube::at_origin(dim, side)),
            SampleDomain::Torus { len } => Domain::Torus { dim, len },
        }
    }
}

#[derive(Clone, Debug)]
pub struct SamplerSpec {
    pub model: Model,
    pub domain: SampleDomain,
    pub method: Method,
    /// Glauber sweeps before the sample is taken; `None` means `100 L^2`.
    pub burn_in: Option<usize>,
    pub seed: u64,
    pub replica: u64,
    /// Run Glauber even when the Dobrushin check fails (recorded as a warning).
    pub allow_non_dobrushin: bool,
    pub purpose: Purpose,
}

impl SamplerSpec {
    pub fn new(model: Model, domain: SampleDomain, seed: u64) -> Self {
        let method = Method::for_model(&model);
        Self {
            model,
            domain,
            method,
            burn_in: None,
            seed,
            replica: 0,
            allow_non_dobrushin: false,
            purpose: Purpose::Field,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SampleMeta {
    pub method: String,
    pub seed: u64,
    pub replica: u64,
    pub burn_in: usize,
    /// Integrated autocorrelation time (in sweeps) of the mean symbol over
    /// the second half of burn-in.
    pub autocorrelation_time: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Sample {
    pub config: Configuration,
    pub meta: SampleMeta,
}

pub fn sample(spec: &SamplerSpec) -> Result<Sample> {
    let model = &spec.model;
    let domain = spec.domain.domain(model.dim());
    let mut meta = SampleMeta {
        method: format!("{:?}", spec.method).to_lowercase(),
        seed: spec.seed,
        replica: spec.replica,
        ..Default::default()
    };
    let config = match spec.method {
        Method::Iid | Method::MarkovProduct => {
            let field = ExactField::new(model, spec.method, spec.seed, spec.purpose, spec.replica)?;
            let values = field.generate(&domain.storage_cube())?;
            Configuration::new(domain, model.alphabet(), values)?
        }
        Method::Glauber => {
            let SampleDomain::Torus { len } = spec.domain else {
                return Err(Error::Unsupported("glauber samples live on a torus".into()));
            };
            let burn_in = spec.burn_in.unwrap_or(100 * len * len);
            meta.burn_in = burn_in;
            meta.warnings = glauber_precheck(model.interaction(), spec.allow_non_dobrushin)?;
            if burn_in == 0 {
                meta.warnings
                    .push("zero burn-in: sample is the random initial state".into());
            }
            let mut chain = Glauber::new(model.interaction(), len, spec.seed, spec.replica)?;
            let trace = chain.run(burn_in);
            meta.autocorrelation_time = autocorrelation_time(&trace[trace.len() / 2..]);
            chain.configuration()?
        }
    };
    Ok(Sample { config, meta })
}

/// Draws `(xi, sigma)` from `Q x P`. The two fields use separate purpose
/// tags, so one master seed gives independent streams.
pub fn sample_pair(spec_q: &SamplerSpec, spec_p: &SamplerSpec) -> Result<(Sample, Sample)> {
    let mut q = spec_q.clone();
    let mut p = spec_p.clone();
    q.purpose = Purpose::FieldQ;
    p.purpose = Purpose::FieldP;
    if q.method == Method::Glauber || p.method == Method::Glauber {
        // Glauber draws from its own tag; keep the pair apart by replica parity.
        q.replica = 2 * spec_q.replica;
        p.replica = 2 * spec_p.replica + 1;
    }
    Ok((sample(&q)?, sample(&p)?))
}

/// Refuses a Glauber run outside the Dobrushin regime unless allowed.
pub fn glauber_precheck(u: &Interaction, allow: bool) -> Result<Vec<String>> {
    let report = check_dobrushin(u)?;
    if report.satisfied {
        return Ok(Vec::new());
    }
    if allow {
        Ok(vec![format!(
            "Dobrushin condition fails (row sum {:.6}); mixing is not guaranteed",
            report.row_sum
        )])
    } else {
        Err(Error::DobrushinViolated(report.row_sum))
    }
}

/// An iid or Markov-product field on `Z^d_{>=0}`, generated on demand.
#[derive(Clone, Debug)]
pub struct ExactField {
    dim: usize,
    alphabet: usize,
    seed: u64,
    purpose: Purpose,
    replica: u64,
    law: RowLaw,
}

#[derive(Clone, Debug)]
enum RowLaw {
    Iid(Vec<f64>),
    Markov {
        start: Vec<f64>,
        rows: Vec<Vec<f64>>,
    },
}

impl ExactField {
    pub fn new(
        model: &Model,
        method: Method,
        seed: u64,
        purpose: Purpose,
        replica: u64,
    ) -> Result<Self> {
        let law = match (method, model.kind()) {
            (Method::Iid, ModelKind::Iid { p }) => RowLaw::Iid(rng::cdf(p)),
            (Method::MarkovProduct, ModelKind::MarkovProduct { matrix, stationary }) => {
                RowLaw::Markov {
                    start: rng::cdf(stationary),
                    rows: matrix.iter().map(|r| rng::cdf(r)).collect(),
                }
            }
            (m, _) => {
                return Err(Error::Unsupported(format!(
                    "{m:?} sampler does not apply to {}",
                    model.label()
                )))
            }
        };
        Ok(Self {
            dim: model.dim(),
            alphabet: model.alphabet(),
            seed,
            purpose,
            replica,
            law,
        })
    }

    /// Values on `C_side` in row-major order.
    pub fn window(&self, side: usize) -> Result<Configuration> {
        let cube = Cube::at_origin(self.dim, side);
        let values = self.generate(&cube)?;
        Configuration::new(Domain::Cube(cube), self.alphabet, values)
    }

    fn generate(&self, cube: &Cube) -> Result<Vec<u8>> {
        let d = self.dim;
        if cube.origin != LatticeVector::zero(d) {
            return Err(Error::Unsupported(
                "fields are generated from the origin".into(),
            ));
        }
        if cube.side >= MAX_ROW_COORD {
            return Err(Error::DomainTooSmall(format!(
                "field side {} exceeds the addressable {}",
                cube.side,
                MAX_ROW_COORD - 1
            )));
        }
        let m = cube.axis_len();
        let rows = (d > 1).then(|| Cube::at_origin(d - 1, cube.side));
        let row_count = rows.map_or(1, |r| r.site_count());
        let mut g = rng::stream(self.seed, self.purpose, self.replica);
        let mut out = Vec::with_capacity(row_count * m);
        for r in 0..row_count {
            let code = rows.map_or(0, |c| rng::row_code(c.site_at(r).coords()));
            rng::seek_row(&mut g, code);
            self.fill_row(&mut g, m, &mut out);
        }
        Ok(out)
    }

    fn fill_row(&self, g: &mut ChaCha8Rng, m: usize, out: &mut Vec<u8>) {
        match &self.law {
            RowLaw::Iid(c) => out.extend((0..m).map(|_| rng::draw(c, rng::uniform(g)))),
            RowLaw::Markov { start, rows } => {
                let mut s = rng::draw(start, rng::uniform(g));
                out.push(s);
                for _ in 1..m {
                    s = rng::draw(&rows[s as usize], rng::uniform(g));
                    out.push(s);
                }
            }
        }
    }
}

/// One term placement through a site, reduced to table lookups.
#[derive(Clone, Debug)]
struct Touch {
    term: usize,
    self_weight: usize,
    others: Vec<(usize, usize)>,
}

/// Sequential-sweep heat-bath dynamics on the periodic `len^d` torus.
#[derive(Clone, Debug)]
pub struct Glauber {
    dim: usize,
    len: usize,
    alphabet: usize,
    tables: Vec<Vec<f64>>,
    touches: Vec<Vec<Touch>>,
    state: Vec<u8>,
    rng: ChaCha8Rng,
}

impl Glauber {
    /// Chain started from an iid uniform configuration.
    pub fn new(u: &Interaction, len: usize, seed: u64, replica: u64) -> Result<Self> {
        if len == 0 {
            return Err(Error::DomainTooSmall("torus of length 0".into()));
        }
        let d = u.dim();
        let q = u.alphabet();
        let cube = Cube::at_origin(d, len - 1);
        let wrap = |y: LatticeVector| {
            let mut w = y;
            for i in 0..d {
                w.set(i, y.get(i).rem_euclid(len as i64));
            }
            cube.index_of(&w).expect("wrapped site")
        };
        let star = u.star();
        let touches = cube
            .sites()
            .map(|x| {
                let me = cube.index_of(&x).expect("site");
                star.iter()
                    .map(|e| {
                        let shape = u.terms()[e.term].shape();
                        let k = shape.len();
                        let mut t = Touch {
                            term: e.term,
                            self_weight: 0,
                            others: Vec::new(),
                        };
                        for (i, s) in shape.iter().enumerate() {
                            let w = q.pow((k - 1 - i) as u32);
                            let idx = wrap(x + e.offset + *s);
                            if idx == me {
                                t.self_weight += w;
                            } else {
                                t.others.push((idx, w));
                            }
                        }
                        t
                    })
                    .collect()
            })
            .collect();
        let uniform = vec![1.0 / q as f64; q];
        let init = ExactField {
            dim: d,
            alphabet: q,
            seed,
            purpose: Purpose::Glauber,
            replica,
            law: RowLaw::Iid(rng::cdf(&uniform)),
        };
        let state = init.generate(&cube)?;
        let mut g = rng::stream(seed, Purpose::Glauber, replica);
        // The initial state used words from row 0 onward of stream zero of the
        // same key; move the dynamics to the far end of the keystream.
        g.set_word_pos(1u128 << 64);
        Ok(Self {
            dim: d,
            len,
            alphabet: q,
            tables: u.terms().iter().map(|t| t.table().to_vec()).collect(),
            touches,
            state,
            rng: g,
        })
    }

    pub fn state(&self) -> &[u8] {
        &self.state
    }

    pub fn set_state(&mut self, state: &[u8]) -> Result<()> {
        if state.len() != self.state.len() {
            return Err(Error::DimensionMismatch {
                expected: self.state.len(),
                got: state.len(),
            });
        }
        if let Some(&s) = state.iter().find(|&&s| s as usize >= self.alphabet) {
            return Err(Error::SymbolOutOfRange {
                symbol: s as usize,
                alphabet: self.alphabet,
            });
        }
        self.state.copy_from_slice(state);
        Ok(())
    }

    pub fn configuration(&self) -> Result<Configuration> {
        Configuration::new(
            Domain::Torus {
                dim: self.dim,
                len: self.len,
            },
            self.alphabet,
            self.state.clone(),
        )
    }

    /// Heat-bath law at `site` given the rest of the current state.
    pub fn conditional(&self, site: usize) -> Vec<f64> {
        let q = self.alphabet;
        let mut e = vec![0.0; q];
        for t in &self.touches[site] {
            let base: usize = t
                .others
                .iter()
                .map(|&(i, w)| self.state[i] as usize * w)
                .sum();
            let table = &self.tables[t.term];
            for (a, slot) in e.iter_mut().enumerate() {
                *slot += table[base + a * t.self_weight];
            }
        }
        let min = e.iter().cloned().fold(f64::INFINITY, f64::min);
        if !min.is_finite() {
            // Every symbol forbidden: leave the law concentrated on the current one.
            let mut p = vec![0.0; q];
            p[self.state[site] as usize] = 1.0;
            return p;
        }
        let w: Vec<f64> = e.iter().map(|x| (min - x).exp()).collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|x| x / z).collect()
    }

    /// One sweep over all sites in row-major order.
    pub fn sweep(&mut self) {
        for site in 0..self.state.len() {
            let p = self.conditional(site);
            let u = rng::uniform(&mut self.rng);
            let mut acc = 0.0;
            let mut pick = p.len() - 1;
            for (a, pa) in p.iter().enumerate() {
                acc += pa;
                if u < acc {
                    pick = a;
                    break;
                }
            }
            self.state[site] = pick as u8;
        }
    }

    /// Runs `sweeps` sweeps and returns the mean symbol after each.
    pub fn run(&mut self, sweeps: usize) -> Vec<f64> {
        let n = self.state.len() as f64;
        (0..sweeps)
            .map(|_| {
                self.sweep();
                self.state.iter().map(|&s| s as f64).sum::<f64>() / n
            })
            .collect()
    }
}

/// Integrated autocorrelation time `1 + 2 sum rho_k`, with the sum cut at the
/// first lag `k >= 5 tau(k)`.
pub fn autocorrelation_time(trace: &[f64]) -> Option<f64> {
    let n = trace.len();
    if n < 20 {
        return None;
    }
    let mean = trace.iter().sum::<f64>() / n as f64;
    let c0 = trace.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if c0 <= 0.0 {
        return None;
    }
    let mut tau = 1.0;
    for k in 1..n / 2 {
        let ck = (0..n - k)
            .map(|i| (trace[i] - mean) * (trace[i + k] - mean))
            .sum::<f64>()
            / n as f64;
        tau += 2.0 * ck / c0;
        if k as f64 >= 5.0 * tau {
            break;
        }
    }
    Some(tau.max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::log_partition_torus;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn iid_frequency_within_binomial_ci() {
        let p = 0.3;
        let spec = SamplerSpec::new(
            Model::bernoulli(2, p).unwrap(),
            SampleDomain::Cube { side: 999 },
            11,
        );
        let s = sample(&spec).unwrap();
        let n = s.config.values().len() as f64;
        assert_eq!(n, 1e6);
        let freq = s.config.values().iter().filter(|&&v| v == 1).count() as f64 / n;
        assert!((freq - p).abs() < 4.0 * (p * (1.0 - p) / n).sqrt());
    }

    #[test]
    fn windows_are_prefix_consistent() {
        for model in [
            Model::bernoulli(2, 0.4).unwrap(),
            Model::markov_product(vec![vec![0.9, 0.1], vec![0.3, 0.7]]).unwrap(),
            Model::bernoulli(3, 0.5).unwrap(),
        ] {
            let f =
                ExactField::new(&model, Method::for_model(&model), 5, Purpose::Field, 2).unwrap();
            let small = f.window(4).unwrap();
            let big = f.window(9).unwrap();
            assert_eq!(
                big.restrict(&Cube::at_origin(model.dim(), 4)).unwrap(),
                small
            );
        }
    }

    #[test]
    fn identity_chain_rows_are_constant() {
        let m = Model::markov_product(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let s = sample(&SamplerSpec::new(m, SampleDomain::Cube { side: 30 }, 3)).unwrap();
        let v = s.config.values();
        assert!(v.chunks(31).all(|row| row.iter().all(|&x| x == row[0])));
        // Rows start from the uniform stationary law, so both symbols appear.
        assert!(v.contains(&0) && v.contains(&1));
    }

    #[test]
    fn seeds_are_deterministic() {
        let m = Model::ising(2, 0.2, 1.0, 0.0).unwrap();
        let mut spec = SamplerSpec::new(m, SampleDomain::Torus { len: 8 }, 99);
        spec.burn_in = Some(50);
        let a = sample(&spec).unwrap();
        let b = sample(&spec).unwrap();
        assert_eq!(a.config, b.config);
        assert_eq!(a.meta, b.meta);
        spec.replica = 1;
        assert_ne!(sample(&spec).unwrap().config, a.config);
    }

    #[test]
    fn glauber_at_zero_beta_is_uniform() {
        let m = Model::ising(2, 0.0, 1.0, 0.0).unwrap();
        let mut spec = SamplerSpec::new(m, SampleDomain::Torus { len: 100 }, 4);
        spec.burn_in = Some(3);
        let s = sample(&spec).unwrap();
        let n = s.config.values().len() as f64;
        let ones = s.config.values().iter().filter(|&&v| v == 1).count() as f64;
        let chi2 = (ones - n / 2.0).powi(2) / (n / 2.0) * 2.0;
        let p_value = 1.0 - ChiSquared::new(1.0).unwrap().cdf(chi2);
        assert!(p_value > 0.001, "p = {p_value}");
    }

    #[test]
    fn glauber_refuses_outside_dobrushin() {
        let m = Model::ising(2, 1.0, 1.0, 0.0).unwrap();
        let mut spec = SamplerSpec::new(m, SampleDomain::Torus { len: 4 }, 0);
        assert!(matches!(sample(&spec), Err(Error::DobrushinViolated(_))));
        spec.allow_non_dobrushin = true;
        spec.burn_in = Some(0);
        let s = sample(&spec).unwrap();
        assert_eq!(s.meta.warnings.len(), 2);
    }

    #[test]
    fn heat_bath_detailed_balance_two_sites() {
        // 1D torus of length 2: both bonds join the two sites.
        let m = Model::ising(1, 0.7, 1.0, 0.3).unwrap();
        let u = m.interaction();
        let mut chain = Glauber::new(u, 2, 0, 0).unwrap();
        let energy = |s: &[u8]| {
            let c = Configuration::new(Domain::Torus { dim: 1, len: 2 }, 2, s.to_vec()).unwrap();
            u.torus_energy(&c).unwrap()
        };
        let log_z = log_partition_torus(u, 2).unwrap();
        let pi = |s: &[u8]| (-energy(s) - log_z).exp();
        let states = [[0u8, 0], [0, 1], [1, 0], [1, 1]];
        for s in &states {
            for site in 0..2 {
                for a in 0..2u8 {
                    let mut t = *s;
                    t[site] = a;
                    chain.set_state(s).unwrap();
                    let k_st = chain.conditional(site)[a as usize];
                    chain.set_state(&t).unwrap();
                    let k_ts = chain.conditional(site)[s[site] as usize];
                    assert!((pi(s) * k_st - pi(&t) * k_ts).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn glauber_matches_small_torus() {
        let m = Model::ising(2, 0.2, 1.0, 0.0).unwrap();
        let u = m.interaction();
        let log_z = log_partition_torus(u, 3).unwrap();
        let mut chain = Glauber::new(u, 3, 1, 0).unwrap();
        chain.run(100);
        let sweeps = 100_000;
        let mut hist = vec![0u64; 512];
        for _ in 0..sweeps {
            chain.sweep();
            let code = chain
                .state()
                .iter()
                .fold(0usize, |acc, &s| acc * 2 + s as usize);
            hist[code] += 1;
        }
        let mut digits = vec![0u8; 9];
        let mut tv = 0.0;
        for (code, &h) in hist.iter().enumerate() {
            crate::exact::enumerate::decode(code as u64, 2, &mut digits);
            let c =
                Configuration::new(Domain::Torus { dim: 2, len: 3 }, 2, digits.clone()).unwrap();
            let p = (-u.torus_energy(&c).unwrap() - log_z).exp();
            tv += (p - h as f64 / sweeps as f64).abs();
        }
        assert!(tv / 2.0 < 0.05, "tv = {}", tv / 2.0);
    }

    #[test]
    fn pair_streams_are_independent() {
        let q = Model::bernoulli(2, 0.5).unwrap();
        let dom = SampleDomain::Cube { side: 299 };
        let (xi, sigma) = sample_pair(
            &SamplerSpec::new(q.clone(), dom, 8),
            &SamplerSpec::new(q, dom, 8),
        )
        .unwrap();
        let a = xi.config.values();
        let b = sigma.config.values();
        assert_ne!(a, b);
        let n = a.len() as f64;
        let (ma, mb) = (
            a.iter().map(|&x| x as f64).sum::<f64>() / n,
            b.iter().map(|&x| x as f64).sum::<f64>() / n,
        );
        let cov = a
            .iter()
            .zip(b)
            .map(|(&x, &y)| (x as f64 - ma) * (y as f64 - mb))
            .sum::<f64>()
            / n;
        let corr = cov / (ma * (1.0 - ma) * mb * (1.0 - mb)).sqrt();
        assert!(corr.abs() < 4.0 / n.sqrt());
    }

    #[test]
    fn autocorrelation_of_white_noise_is_near_one() {
        let mut g = rng::stream(0, Purpose::Field, 0);
        let trace: Vec<f64> = (0..5000).map(|_| rng::uniform(&mut g)).collect();
        let tau = autocorrelation_time(&trace).unwrap();
        assert!(tau < 1.5, "tau = {tau}");
    }
}
