//! Finite-range translation-invariant interactions, Hamiltonians, single-site
//! conditionals and the model presets.
//!
//! Inverse temperature is folded into the stored energies. Each term keeps
//! one shape, normalized so that its lexicographically smallest site is the
//! origin; the term acts at every translate of that shape.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Configuration, Cube, Domain, LatticeVector, MAX_DIM};
use crate::numerics::logsumexp;

/// Largest number of symbol assignments a single term table may hold.
pub const MAX_TABLE: usize = 1 << 20;

#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    shape: Vec<LatticeVector>,
    /// Energies indexed by the base-`q` number whose digits are the symbols
    /// on `shape` (first site most significant).
    table: Vec<f64>,
}

impl Term {
    /// Builds a term from a shape (any order, any translate) and its table
    /// indexed in the given shape order.
    pub fn new(shape: Vec<LatticeVector>, table: Vec<f64>, alphabet: usize) -> Result<Self> {
        let Some(first) = shape.first() else {
            return Err(Error::InvalidModel("empty term shape".into()));
        };
        for s in &shape {
            first.same_dim(s)?;
        }
        let k = shape.len();
        let expected = checked_pow(alphabet, k)
            .filter(|&t| t <= MAX_TABLE)
            .ok_or_else(|| Error::InvalidModel(format!("term table for {k} sites too large")))?;
        if table.len() != expected {
            return Err(Error::InvalidModel(format!(
                "term over {k} sites needs {expected} table entries, got {}",
                table.len()
            )));
        }
        if table.iter().any(|e| e.is_nan() || *e == f64::NEG_INFINITY) {
            return Err(Error::InvalidModel(
                "term energies must be finite or +inf".into(),
            ));
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| shape[a].cmp(&shape[b]));
        if order.windows(2).any(|w| shape[w[0]] == shape[w[1]]) {
            return Err(Error::InvalidModel("repeated site in term shape".into()));
        }
        let base = shape[order[0]];
        let sorted: Vec<LatticeVector> = order.iter().map(|&i| shape[i] - base).collect();
        // Re-index the table for the sorted order.
        let mut new_table = vec![0.0; expected];
        let mut digits = vec![0usize; k];
        for (old_idx, &e) in table.iter().enumerate() {
            let mut rem = old_idx;
            for d in digits.iter_mut().rev() {
                *d = rem % alphabet;
                rem /= alphabet;
            }
            let new_idx = order.iter().fold(0, |acc, &i| acc * alphabet + digits[i]);
            new_table[new_idx] = e;
        }
        Ok(Self {
            shape: sorted,
            table: new_table,
        })
    }

    pub fn shape(&self) -> &[LatticeVector] {
        &self.shape
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn size(&self) -> usize {
        self.shape.len()
    }

    /// Largest l1 distance between two sites of the shape.
    pub fn diameter(&self) -> i64 {
        let mut d = 0;
        for a in &self.shape {
            for b in &self.shape {
                d = d.max(a.l1_distance(b));
            }
        }
        d
    }

    /// `max U - min U` over finite entries.
    pub fn oscillation(&self) -> f64 {
        let (lo, hi) = self
            .table
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| {
                (lo.min(e), hi.max(e))
            });
        hi - lo
    }

    /// Energy of the placement at `offset` with symbols read from `lookup`.
    pub fn energy_at<F: Fn(&LatticeVector) -> Option<u8>>(
        &self,
        offset: &LatticeVector,
        alphabet: usize,
        lookup: F,
    ) -> Option<f64> {
        let mut idx = 0usize;
        for s in &self.shape {
            idx = idx * alphabet + lookup(&(*offset + *s))? as usize;
        }
        Some(self.table[idx])
    }
}

fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    let mut r = 1usize;
    for _ in 0..exp {
        r = r.checked_mul(base)?;
    }
    Some(r)
}

/// A translation-invariant interaction with finitely many term shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct Interaction {
    dim: usize,
    alphabet: usize,
    terms: Vec<Term>,
}

/// One placement of a term that covers a fixed site: the term index and the
/// placement offset relative to that site.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StarEntry {
    pub term: usize,
    pub offset: LatticeVector,
}

impl Interaction {
    pub fn new(dim: usize, alphabet: usize, terms: Vec<Term>) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        if !(1..=256).contains(&alphabet) {
            return Err(Error::InvalidModel(format!("alphabet size {alphabet}")));
        }
        for t in &terms {
            if t.shape[0].dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: t.shape[0].dim(),
                });
            }
            if t.table.len() != checked_pow(alphabet, t.size()).unwrap_or(0) {
                return Err(Error::InvalidModel(
                    "table size does not match alphabet".into(),
                ));
            }
        }
        Ok(Self {
            dim,
            alphabet,
            terms,
        })
    }

    /// The zero interaction.
    pub fn zero(dim: usize, alphabet: usize) -> Self {
        Self::new(dim, alphabet, Vec::new()).expect("valid zero interaction")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Range `R`: the largest term diameter.
    pub fn range(&self) -> usize {
        self.terms.iter().map(|t| t.diameter()).max().unwrap_or(0) as usize
    }

    /// `c U`.
    pub fn scaled(&self, c: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| Term {
                shape: t.shape.clone(),
                table: t
                    .table
                    .iter()
                    .map(|&e| if c == 0.0 { 0.0 } else { c * e })
                    .collect(),
            })
            .collect();
        Self {
            dim: self.dim,
            alphabet: self.alphabet,
            terms,
        }
    }

    /// `U + V`: the terms of both interactions, acting together.
    pub fn plus(&self, other: &Interaction) -> Result<Self> {
        if self.dim != other.dim || self.alphabet != other.alphabet {
            return Err(Error::InvalidModel(
                "interactions live on different spaces".into(),
            ));
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self::new(self.dim, self.alphabet, terms)
    }

    /// Whether every term acts on a single site.
    pub fn is_single_site(&self) -> bool {
        self.terms.iter().all(|t| t.size() == 1)
    }

    /// Whether every term is a single site or a nearest-neighbour pair.
    pub fn is_nearest_neighbour(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.size() == 1 || (t.size() == 2 && t.diameter() == 1))
    }

    /// Every term placement containing the origin.
    pub fn star(&self) -> Vec<StarEntry> {
        let mut out = Vec::new();
        for (ti, t) in self.terms.iter().enumerate() {
            for s in &t.shape {
                out.push(StarEntry {
                    term: ti,
                    offset: -*s,
                });
            }
        }
        out
    }

    /// Sites other than the origin that share a term placement with it.
    pub fn neighbourhood(&self) -> Vec<LatticeVector> {
        let mut sites: Vec<LatticeVector> = self
            .star()
            .iter()
            .flat_map(|e| self.terms[e.term].shape.iter().map(move |s| e.offset + *s))
            .filter(|v| !v.is_zero())
            .collect();
        sites.sort();
        sites.dedup();
        sites
    }

    /// Energy of the placements covering `x`, with `x` set to each symbol in
    /// turn; other symbols come from `context`.
    pub fn local_energies<F: Fn(&LatticeVector) -> Option<u8>>(
        &self,
        x: &LatticeVector,
        context: F,
    ) -> Result<Vec<f64>> {
        let star = self.star();
        let mut out = vec![0.0; self.alphabet];
        for (a, slot) in out.iter_mut().enumerate() {
            let lookup = |y: &LatticeVector| {
                if y == x {
                    Some(a as u8)
                } else {
                    context(y)
                }
            };
            for e in &star {
                let at = *x + e.offset;
                *slot += self.terms[e.term]
                    .energy_at(&at, self.alphabet, lookup)
                    .ok_or_else(|| Error::MissingContext(format!("near site {x}")))?;
            }
        }
        Ok(out)
    }

    /// Conditional law of the symbol at `x` given its neighbourhood.
    pub fn single_site_conditional<F: Fn(&LatticeVector) -> Option<u8>>(
        &self,
        x: &LatticeVector,
        context: F,
    ) -> Result<Vec<f64>> {
        let e = self.local_energies(x, context)?;
        Ok(boltzmann(&e))
    }

    /// `f_U = sum_{A contains 0} U(A) / |A|`.
    pub fn f_u<F: Fn(&LatticeVector) -> Option<u8>>(&self, context: F) -> Result<f64> {
        let origin = LatticeVector::zero(self.dim);
        let mut total = 0.0;
        for e in self.star() {
            let t = &self.terms[e.term];
            total += t
                .energy_at(&e.offset, self.alphabet, &context)
                .ok_or_else(|| Error::MissingContext(format!("near site {origin}")))?
                / t.size() as f64;
        }
        Ok(total)
    }

    /// `H^zeta_Lambda(sigma)`: energy of every placement meeting `volume`.
    /// With a free boundary only placements inside the volume count.
    pub fn hamiltonian(
        &self,
        volume: &Cube,
        sigma: &Configuration,
        boundary: &BoundaryCondition,
    ) -> Result<f64> {
        if volume.dim() != self.dim || sigma.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: volume.dim().min(sigma.dim()),
            });
        }
        let inside = |y: &LatticeVector| {
            if volume.contains(y) {
                sigma.get_with(y, crate::lattice::Wrap::None)
            } else {
                None
            }
        };
        for y in volume.sites() {
            if inside(&y).is_none() {
                return Err(Error::OutOfDomain(format!("sigma lacks site {y}")));
            }
        }
        let mut total = 0.0;
        for t in &self.terms {
            for offset in placements_meeting(t, volume) {
                let all_inside = t.shape.iter().all(|s| volume.contains(&(offset + *s)));
                let e = match boundary {
                    BoundaryCondition::Free => {
                        if !all_inside {
                            continue;
                        }
                        t.energy_at(&offset, self.alphabet, inside)
                    }
                    BoundaryCondition::Fixed(zeta) => t.energy_at(&offset, self.alphabet, |y| {
                        inside(y).or_else(|| zeta.get_with(y, crate::lattice::Wrap::None))
                    }),
                };
                total += e.ok_or_else(|| {
                    Error::MissingContext("boundary condition does not cover the R-annulus".into())
                })?;
            }
        }
        Ok(total)
    }

    /// Energy of a torus configuration: every placement with wrapped lookups,
    /// one placement per torus site and term.
    pub fn torus_energy(&self, sigma: &Configuration) -> Result<f64> {
        let Domain::Torus { dim, len } = *sigma.domain() else {
            return Err(Error::Unsupported("torus_energy needs a torus".into()));
        };
        let cube = Cube::at_origin(dim, len - 1);
        let mut total = 0.0;
        for t in &self.terms {
            for x in cube.sites() {
                total += t
                    .energy_at(&x, self.alphabet, |y| sigma.get(y))
                    .expect("torus lookups never fail");
            }
        }
        Ok(total)
    }
}

/// Offsets of every placement of `t` that meets `volume`.
fn placements_meeting<'a>(
    t: &'a Term,
    volume: &'a Cube,
) -> impl Iterator<Item = LatticeVector> + 'a {
    let dim = volume.dim();
    let mut lo = volume.origin;
    let mut hi_side = 0usize;
    for i in 0..dim {
        let max_s = t.shape.iter().map(|s| s.get(i)).max().unwrap_or(0);
        lo.set(i, volume.origin.get(i) - max_s);
        let min_s = t.shape.iter().map(|s| s.get(i)).min().unwrap_or(0);
        let hi = volume.origin.get(i) + volume.side as i64 - min_s;
        hi_side = hi_side.max((hi - lo.get(i)) as usize);
    }
    let bbox = Cube::new(lo, hi_side);
    (0..bbox.site_count())
        .map(move |i| bbox.site_at(i))
        .filter(move |p| t.shape.iter().any(|s| volume.contains(&(*p + *s))))
}

/// Normalized Boltzmann weights `exp(-e_a) / sum_b exp(-e_b)`.
pub fn boltzmann(energies: &[f64]) -> Vec<f64> {
    let neg: Vec<f64> = energies.iter().map(|e| -e).collect();
    let z = logsumexp(&neg);
    neg.iter().map(|x| (x - z).exp()).collect()
}

#[derive(Clone, Debug)]
pub enum BoundaryCondition {
    Free,
    /// A configuration covering at least the `R`-annulus of the volume.
    Fixed(Configuration),
}

/// A named model: the interaction plus whatever closed-form structure the
/// preset carries.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    kind: ModelKind,
    interaction: Interaction,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelKind {
    Iid {
        p: Vec<f64>,
    },
    Ising {
        beta: f64,
        j: f64,
        h: f64,
    },
    Potts {
        beta: f64,
        j: f64,
        q: usize,
    },
    /// Independent rows along axis 1, each a stationary chain.
    MarkovProduct {
        matrix: Vec<Vec<f64>>,
        stationary: Vec<f64>,
    },
    Custom,
}

impl Model {
    pub fn iid(dim: usize, p: &[f64]) -> Result<Self> {
        check_distribution(p, "iid probabilities")?;
        if p.iter().any(|&x| x <= 0.0) {
            return Err(Error::InvalidModel(
                "iid probabilities must be positive".into(),
            ));
        }
        let table = p.iter().map(|x| -x.ln()).collect();
        let term = Term::new(vec![LatticeVector::zero(dim)], table, p.len())?;
        Ok(Self {
            kind: ModelKind::Iid { p: p.to_vec() },
            interaction: Interaction::new(dim, p.len(), vec![term])?,
        })
    }

    /// Bernoulli(p) on `{0, 1}`: symbol 1 has probability `p`.
    pub fn bernoulli(dim: usize, p: f64) -> Result<Self> {
        Self::iid(dim, &[1.0 - p, p])
    }

    /// Ising model with spins `-1` (symbol 0) and `+1` (symbol 1).
    pub fn ising(dim: usize, beta: f64, j: f64, h: f64) -> Result<Self> {
        let spin = [-1.0, 1.0];
        let mut terms = Vec::new();
        if h != 0.0 {
            let table = spin.iter().map(|s| -beta * h * s).collect();
            terms.push(Term::new(vec![LatticeVector::zero(dim)], table, 2)?);
        }
        if j != 0.0 {
            let table: Vec<f64> = [(0, 0), (0, 1), (1, 0), (1, 1)]
                .iter()
                .map(|&(a, b)| -beta * j * spin[a] * spin[b])
                .collect();
            for axis in 0..dim {
                terms.push(Term::new(
                    vec![LatticeVector::zero(dim), LatticeVector::unit(dim, axis)],
                    table.clone(),
                    2,
                )?);
            }
        }
        Ok(Self {
            kind: ModelKind::Ising { beta, j, h },
            interaction: Interaction::new(dim, 2, terms)?,
        })
    }

    pub fn potts(dim: usize, beta: f64, j: f64, q: usize) -> Result<Self> {
        if q < 2 {
            return Err(Error::InvalidModel("Potts needs at least 2 states".into()));
        }
        let table: Vec<f64> = (0..q * q)
            .map(|i| if i / q == i % q { -beta * j } else { 0.0 })
            .collect();
        let terms = (0..dim)
            .map(|axis| {
                Term::new(
                    vec![LatticeVector::zero(dim), LatticeVector::unit(dim, axis)],
                    table.clone(),
                    q,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kind: ModelKind::Potts { beta, j, q },
            interaction: Interaction::new(dim, q, terms)?,
        })
    }

    /// Rows `x_0 = const` are independent stationary chains along axis 1.
    pub fn markov_product(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let q = matrix.len();
        if q == 0 || matrix.iter().any(|r| r.len() != q) {
            return Err(Error::InvalidModel(
                "transition matrix must be square".into(),
            ));
        }
        for row in &matrix {
            check_distribution(row, "transition matrix row")?;
        }
        let stationary = stationary_distribution(&matrix)?;
        let table: Vec<f64> = (0..q * q).map(|i| -matrix[i / q][i % q].ln()).collect();
        let term = Term::new(
            vec![LatticeVector::zero(2), LatticeVector::unit(2, 1)],
            table,
            q,
        )?;
        Ok(Self {
            kind: ModelKind::MarkovProduct { matrix, stationary },
            interaction: Interaction::new(2, q, vec![term])?,
        })
    }

    pub fn custom(interaction: Interaction) -> Self {
        Self {
            kind: ModelKind::Custom,
            interaction,
        }
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn interaction(&self) -> &Interaction {
        &self.interaction
    }

    pub fn dim(&self) -> usize {
        self.interaction.dim
    }

    pub fn alphabet(&self) -> usize {
        self.interaction.alphabet
    }

    pub fn is_iid(&self) -> bool {
        matches!(self.kind, ModelKind::Iid { .. })
    }

    /// Short label used in output records.
    pub fn label(&self) -> String {
        match &self.kind {
            ModelKind::Iid { p } => format!("iid{p:?}"),
            ModelKind::Ising { beta, j, h } => format!("ising(beta={beta},J={j},h={h})"),
            ModelKind::Potts { beta, j, q } => format!("potts(beta={beta},J={j},q={q})"),
            ModelKind::MarkovProduct { matrix, .. } => format!("markov_product{matrix:?}"),
            ModelKind::Custom => format!("custom({} terms)", self.interaction.terms.len()),
        }
    }
}

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() || p.len() > 256 {
        return Err(Error::InvalidModel(format!("{what}: need 1..=256 entries")));
    }
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidModel(format!(
            "{what}: entries must be nonnegative"
        )));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidModel(format!("{what}: sum {s} is not 1")));
    }
    Ok(())
}

/// Stationary law by power iteration on the Cesaro average, so periodic
/// chains converge too. Reducible chains get the law reached from uniform.
fn stationary_distribution(p: &[Vec<f64>]) -> Result<Vec<f64>> {
    let q = p.len();
    let mut v = vec![1.0 / q as f64; q];
    let mut avg = vec![0.0; q];
    let steps = 20_000;
    for _ in 0..steps {
        let mut next = vec![0.0; q];
        for a in 0..q {
            for b in 0..q {
                next[b] += v[a] * p[a][b];
            }
        }
        v = next;
        for (s, x) in avg.iter_mut().zip(&v) {
            *s += x;
        }
    }
    let total: f64 = avg.iter().sum();
    avg.iter_mut().for_each(|x| *x /= total);
    // A few plain iterations polish the averaged vector.
    for _ in 0..200 {
        let mut next = vec![0.0; q];
        for a in 0..q {
            for b in 0..q {
                next[b] += avg[a] * p[a][b];
            }
        }
        let moved: f64 = next.iter().zip(&avg).map(|(x, y)| (x - y).abs()).sum();
        if moved > 1e-3 {
            break;
        }
        avg = next;
    }
    Ok(avg)
}

/// Declarative model description used in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Iid {
        p: Vec<f64>,
    },
    Bernoulli {
        p: f64,
    },
    Ising {
        beta: f64,
        j: f64,
        #[serde(default)]
        h: f64,
    },
    Potts {
        beta: f64,
        j: f64,
        q: usize,
    },
    MarkovProduct {
        matrix: Vec<Vec<f64>>,
    },
    /// Custom interaction in the JSON term-list form, inline.
    Custom {
        alphabet: usize,
        terms: Vec<TermSpec>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub shape: Vec<Vec<i64>>,
    pub table: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomInteraction {
    pub dim: usize,
    pub alphabet: usize,
    pub terms: Vec<TermSpec>,
}

impl ModelSpec {
    pub fn build(&self, dim: usize) -> Result<Model> {
        match self {
            ModelSpec::Iid { p } => Model::iid(dim, p),
            ModelSpec::Bernoulli { p } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::InvalidModel(format!("Bernoulli p = {p}")));
                }
                Model::bernoulli(dim, *p)
            }
            ModelSpec::Ising { beta, j, h } => Model::ising(dim, *beta, *j, *h),
            ModelSpec::Potts { beta, j, q } => Model::potts(dim, *beta, *j, *q),
            ModelSpec::MarkovProduct { matrix } => {
                if dim != 2 {
                    return Err(Error::InvalidModel("markov_product needs d = 2".into()));
                }
                Model::markov_product(matrix.clone())
            }
            ModelSpec::Custom { alphabet, terms } => {
                Ok(Model::custom(build_custom(dim, *alphabet, terms)?))
            }
        }
    }
}

fn build_custom(dim: usize, alphabet: usize, terms: &[TermSpec]) -> Result<Interaction> {
    if !(1..=256).contains(&alphabet) {
        return Err(Error::InvalidModel(format!("alphabet size {alphabet}")));
    }
    let terms = terms
        .iter()
        .map(|t| {
            let shape = t
                .shape
                .iter()
                .map(|c| {
                    if c.len() != dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            got: c.len(),
                        });
                    }
                    if c.iter().any(|x| x.abs() > 64) {
                        return Err(Error::InvalidModel(
                            "shape sites must lie within 64 of the origin".into(),
                        ));
                    }
                    LatticeVector::new(c)
                })
                .collect::<Result<Vec<_>>>()?;
            Term::new(shape, t.table.clone(), alphabet)
        })
        .collect::<Result<Vec<_>>>()?;
    Interaction::new(dim, alphabet, terms)
}

/// Parses the JSON term-list form `{"dim":..,"alphabet":..,"terms":[{"shape":[[..]],"table":[..]}]}`.
pub fn interaction_from_json(text: &str) -> Result<Interaction> {
    let spec: CustomInteraction = serde_json::from_str(text)?;
    if !(1..=MAX_DIM).contains(&spec.dim) {
        return Err(Error::UnsupportedDimension(spec.dim));
    }
    build_custom(spec.dim, spec.alphabet, &spec.terms)
}
