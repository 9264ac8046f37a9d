//! Deterministic random corpora.

use std::f64::consts::TAU;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::atoms::{random_atom, Atom};
use crate::circfun::{Arc, CircleFun, Partition};
use crate::error::{invalid, Result};
use crate::opalg::ComplexMatrix;
use crate::Complex64;

pub const MAX_DIM: usize = 16;
pub const MAX_DEGREE: usize = 64;

/// Item generator. `d` is the largest dimension: item `i` has dimension
/// `1 + i mod d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CorpusKind {
    /// Modes `0..=deg` with `deg` uniform in `1..=n`.
    AnalyticBandlimited { d: usize, n: usize },
    /// Modes `-deg..=deg`.
    GeneralBandlimited { d: usize, n: usize },
    /// Random partition into `cells` cells.
    Piecewise { d: usize, cells: usize },
    /// Random atoms on random arcs.
    Atoms { d: usize, cells: usize },
}

impl CorpusKind {
    pub fn max_dim(&self) -> usize {
        match *self {
            CorpusKind::AnalyticBandlimited { d, .. }
            | CorpusKind::GeneralBandlimited { d, .. }
            | CorpusKind::Piecewise { d, .. }
            | CorpusKind::Atoms { d, .. } => d,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub seed: u64,
    pub count: usize,
    #[serde(flatten)]
    pub kind: CorpusKind,
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(invalid("count", "corpus must be non-empty"));
        }
        let d = self.kind.max_dim();
        if d == 0 || d > MAX_DIM {
            return Err(invalid("d", format!("must lie in 1..={MAX_DIM}, got {d}")));
        }
        match self.kind {
            CorpusKind::AnalyticBandlimited { n, .. } | CorpusKind::GeneralBandlimited { n, .. } => {
                if n == 0 || n > MAX_DEGREE {
                    return Err(invalid("n", format!("must lie in 1..={MAX_DEGREE}, got {n}")));
                }
            }
            CorpusKind::Piecewise { cells, .. } => {
                if cells == 0 {
                    return Err(invalid("cells", "need at least one cell"));
                }
            }
            CorpusKind::Atoms { cells, .. } => {
                if cells < 2 {
                    return Err(invalid("cells", "atoms need at least two cells"));
                }
            }
        }
        Ok(())
    }

    /// Same generator and count under a different seed.
    pub fn with_seed(&self, seed: u64) -> CorpusSpec {
        CorpusSpec { seed, ..*self }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusItem {
    pub function: CircleFun,
    /// Set for atom corpora.
    pub atom: Option<Atom>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub spec: CorpusSpec,
    pub items: Vec<CorpusItem>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn functions(&self) -> impl Iterator<Item = &CircleFun> {
        self.items.iter().map(|i| &i.function)
    }

    /// JSON document of item `i`: an atom document for atom corpora, a
    /// function document otherwise.
    pub fn item_json(&self, i: usize) -> String {
        let item = &self.items[i];
        match &item.atom {
            Some(a) => a.to_json(),
            None => item.function.to_json(),
        }
    }
}

/// Per-item stream: the corpus seed selects the key, the item index the stream.
pub fn item_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn gaussian_c(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn gaussian_matrix(rng: &mut impl Rng, d: usize, scale: f64) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, |_, _| gaussian_c(rng) * scale)
}

/// Band-limited function with modes `lo..=hi`, entries scaled by `1/(1+|n|)`.
pub fn random_band_limited(rng: &mut impl Rng, d: usize, lo: i64, hi: i64) -> Result<CircleFun> {
    let modes: Vec<(i64, ComplexMatrix)> = (lo..=hi)
        .map(|n| (n, gaussian_matrix(rng, d, 1.0 / (1.0 + n.unsigned_abs() as f64))))
        .collect();
    CircleFun::from_modes(d, &modes)
}

fn random_partition(rng: &mut impl Rng, cells: usize) -> Result<Partition> {
    if cells == 1 {
        return Ok(Partition::full());
    }
    let widths: Vec<f64> = (0..cells).map(|_| 0.5 + rng.random::<f64>()).collect();
    let total: f64 = widths.iter().sum();
    let offset = TAU * rng.random::<f64>();
    let mut breaks = Vec::with_capacity(cells);
    let mut acc = 0.0;
    for w in &widths {
        breaks.push((offset + TAU * acc / total).rem_euclid(TAU));
        acc += w;
    }
    breaks.sort_by(f64::total_cmp);
    Partition::new(breaks)
}

/// Random support arc: uniform center, chordal radius log-uniform in `[2⁻⁶, 2)`.
fn random_arc(rng: &mut impl Rng) -> Result<Arc> {
    let center = TAU * rng.random::<f64>();
    let radius = 2.0 * 0.5f64.powf(1.0 + 5.0 * rng.random::<f64>());
    Arc::new(center, radius)
}

fn generate_item(spec: &CorpusSpec, index: usize) -> Result<CorpusItem> {
    let mut rng = item_rng(spec.seed, index);
    let d = 1 + index % spec.kind.max_dim();
    let plain = |function| Ok(CorpusItem { function, atom: None });
    match spec.kind {
        CorpusKind::AnalyticBandlimited { n, .. } => {
            let deg = rng.random_range(1..=n) as i64;
            plain(random_band_limited(&mut rng, d, 0, deg)?)
        }
        CorpusKind::GeneralBandlimited { n, .. } => {
            let deg = rng.random_range(1..=n) as i64;
            plain(random_band_limited(&mut rng, d, -deg, deg)?)
        }
        CorpusKind::Piecewise { cells, .. } => {
            let partition = random_partition(&mut rng, cells)?;
            let values = (0..partition.len()).map(|_| gaussian_matrix(&mut rng, d, 1.0)).collect();
            plain(CircleFun::piecewise(partition, values)?)
        }
        CorpusKind::Atoms { cells, .. } => {
            let arc = random_arc(&mut rng)?;
            let atom = random_atom(rng.next_u64(), d, &arc, cells)?;
            Ok(CorpusItem {
                function: atom.data().clone(),
                atom: Some(atom),
            })
        }
    }
}

pub fn corpus_generate(spec: &CorpusSpec) -> Result<Corpus> {
    spec.validate()?;
    let items = (0..spec.count)
        .map(|i| generate_item(spec, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus { spec: *spec, items })
}
