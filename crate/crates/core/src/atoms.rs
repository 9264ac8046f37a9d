//! `M_c`-atoms, atomic decompositions and two-sided bounds for the `H¹_c`
//! norm.
//!
//! An atom is supported in an arc `I`, has zero mean and satisfies
//! `‖a‖_{L¹_c} ≤ |I|^{-1/2}`. The `H¹_c` norm is an infimum over
//! decompositions, so it is only ever bracketed: an explicit decomposition
//! gives the upper end, BMO witnesses paired against `f` give the lower end.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::circfun::{lp_c_norm, matrix_from_doc, matrix_to_doc, Arc, CircleFun, FunctionDoc, MatrixDoc, Partition, Repr};
use crate::error::{invalid, Error, Result};
use crate::norms::{bmo_c_norm, NormSearchGrid};
use crate::opalg::{schatten_norm, ComplexMatrix};
use crate::verify::pairing;

/// Tolerance on the mean-zero clause.
pub const MEAN_TOL: f64 = 1e-12;
/// Relative slack on the size clause.
pub const SIZE_TOL: f64 = 1e-12;
/// Slack on the `∫‖a‖_{L¹(M)} dm ≤ 1` consequence.
pub const L1_TOL: f64 = 1e-10;

/// Trapezoid nodes used for `t ↦ ‖a(t)‖_1` on band-limited data.
const TRACE_NORM_NODES: usize = 2048;

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    support: Arc,
    data: CircleFun,
}

impl Atom {
    /// Wraps data and support without checking the atom clauses; see
    /// [`validate_atom`]. Band-limited data is only accepted on the whole
    /// circle, since it cannot vanish on an arc.
    pub fn new(support: Arc, data: CircleFun) -> Result<Self> {
        if data.is_band_limited() && !support.is_full() {
            return Err(Error::InvalidRepresentation(
                "band-limited atoms must be supported on the whole circle".into(),
            ));
        }
        Ok(Atom { support, data })
    }

    pub fn support(&self) -> &Arc {
        &self.support
    }

    pub fn data(&self) -> &CircleFun {
        &self.data
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    /// Whether the support is all of `𝕋`.
    pub fn is_global(&self) -> bool {
        self.support.is_full()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomClause {
    Support,
    MeanZero,
    Size,
    L1Bound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomReport {
    pub ok: bool,
    pub violated: Vec<AtomClause>,
    /// Support is the whole circle, so the size clause reads `‖a‖ ≤ 1`.
    pub global: bool,
    /// Largest operator norm of a value on a cell not contained in `I`.
    pub off_support: f64,
    pub mean_norm: f64,
    /// `‖a‖_{L¹_c}`.
    pub size: f64,
    /// `|I|^{-1/2}`.
    pub size_bound: f64,
    /// `∫ ‖a(t)‖_1 dm`.
    pub l1_norm: f64,
    /// `(∫ ‖a(t)‖_1² dm)^{1/2}`.
    pub l2_l1_norm: f64,
}

impl AtomReport {
    pub fn size_margin(&self) -> f64 {
        self.size_bound - self.size
    }

    pub fn l1_margin(&self) -> f64 {
        1.0 - self.l1_norm
    }
}

/// `(∫ ‖f‖_1 dm, (∫ ‖f‖_1² dm)^{1/2})`; exact for piecewise-constant data.
fn trace_norm_moments(f: &CircleFun) -> Result<(f64, f64)> {
    let (mut l1, mut l2) = (0.0, 0.0);
    match f.repr() {
        Repr::PiecewiseConst { partition, values } => {
            for (k, v) in values.iter().enumerate() {
                let m = partition.cell_measure(k);
                let s = schatten_norm(v, 1.0)?;
                l1 += m * s;
                l2 += m * s * s;
            }
        }
        Repr::BandLimited { .. } => {
            let n = TRACE_NORM_NODES;
            for k in 0..n {
                let s = schatten_norm(&f.eval(TAU * k as f64 / n as f64), 1.0)?;
                l1 += s / n as f64;
                l2 += s * s / n as f64;
            }
        }
    }
    Ok((l1, l2.sqrt()))
}

/// Largest value norm on cells that stick out of the arc.
fn off_support_norm(f: &CircleFun, support: &Arc) -> f64 {
    let Repr::PiecewiseConst { partition, values } = f.repr() else {
        return 0.0;
    };
    if support.is_full() {
        return 0.0;
    }
    let (lo, hi) = support.bounds();
    let mut worst: f64 = 0.0;
    for (k, v) in values.iter().enumerate() {
        let (a, b) = partition.cell(k);
        if (b - a) - partition.cell_overlap(k, lo, hi) > 1e-12 {
            worst = worst.max(v.op_norm());
        }
    }
    worst
}

/// Checks the three atom clauses and the `L¹(L¹(M))` consequence. Never
/// fails: numerical trouble shows up as a violated clause.
pub fn validate_atom(a: &Atom) -> AtomReport {
    let f = &a.data;
    let off_support = off_support_norm(f, &a.support);
    let mean_norm = f.mean().op_norm();
    let size = lp_c_norm(f, 1.0).unwrap_or(f64::INFINITY);
    let size_bound = a.support.measure().powf(-0.5);
    let (l1_norm, l2_l1_norm) = trace_norm_moments(f).unwrap_or((f64::INFINITY, f64::INFINITY));
    let mut violated = Vec::new();
    if off_support > 0.0 {
        violated.push(AtomClause::Support);
    }
    if !(mean_norm <= MEAN_TOL) {
        violated.push(AtomClause::MeanZero);
    }
    if !(size <= (1.0 + SIZE_TOL) * size_bound) {
        violated.push(AtomClause::Size);
    }
    if !(l1_norm <= 1.0 + L1_TOL) {
        violated.push(AtomClause::L1Bound);
    }
    AtomReport {
        ok: violated.is_empty(),
        violated,
        global: a.support.is_full(),
        off_support,
        mean_norm,
        size,
        size_bound,
        l1_norm,
        l2_l1_norm,
    }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(scale * re, scale * im)
    })
}

/// Random atom supported in `support`: Gaussian values on `cells` cells of
/// random width, mean removed and scaled to `‖a‖_{L¹_c} = |I|^{-1/2}`.
pub fn random_atom(seed: u64, d: usize, support: &Arc, cells: usize) -> Result<Atom> {
    if cells < 2 {
        return Err(invalid("cells", "an atom needs at least two cells"));
    }
    if d == 0 {
        return Err(invalid("d", "dimension must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let widths: Vec<f64> = (0..cells).map(|_| 0.5 + rng.random::<f64>()).collect();
    let total: f64 = widths.iter().sum();
    let span = TAU * support.measure();
    let start = if support.is_full() {
        0.0
    } else {
        support.bounds().0.rem_euclid(TAU)
    };
    let mut breaks = Vec::with_capacity(cells + 1);
    let mut at = start;
    for w in &widths {
        breaks.push(at);
        at += span * w / total;
    }
    let mut values: Vec<ComplexMatrix> = (0..cells).map(|_| gaussian_matrix(&mut rng, d, 1.0)).collect();
    let mut mean = ComplexMatrix::zeros(d);
    for (v, w) in values.iter().zip(&widths) {
        mean.axpy(Complex64::new(w / total, 0.0), v);
    }
    for v in &mut values {
        *v -= &mean;
    }
    if !support.is_full() {
        breaks.push(start + span);
        values.push(ComplexMatrix::zeros(d));
    }
    let partition = Partition::new(breaks)?;
    let raw = CircleFun::piecewise(partition, values)?;
    let norm = lp_c_norm(&raw, 1.0)?;
    if !(norm > 0.0) {
        return Err(Error::InvalidRepresentation("random atom degenerated to zero".into()));
    }
    let data = raw.scale_real(support.measure().powf(-0.5) / norm);
    Atom::new(*support, data)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Piece {
    Atom(Atom),
    /// Constant with `‖c‖_1 ≤ 1`.
    Constant(ComplexMatrix),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub lambda: Complex64,
    pub piece: Piece,
}

/// `f = Σ_k λ_k a_k` with atoms and small constants.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub dim: usize,
    pub terms: Vec<Term>,
}

impl Decomposition {
    pub fn empty(dim: usize) -> Self {
        Decomposition { dim, terms: Vec::new() }
    }

    /// `Σ |λ_k|`.
    pub fn coefficient_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.lambda.norm()).sum()
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.terms.iter().filter_map(|t| match &t.piece {
            Piece::Atom(a) => Some(a),
            Piece::Constant(_) => None,
        })
    }

    /// Supports of the atoms, e.g. to add them to a BMO search grid.
    pub fn support_arcs(&self) -> Vec<Arc> {
        self.atoms().map(|a| a.support).collect()
    }

    /// `Σ λ_k a_k`. Constants adopt the representation of the atoms.
    pub fn reconstruct(&self) -> Result<CircleFun> {
        let piecewise = self.atoms().any(|a| a.data.is_piecewise());
        let lift = |c: &ComplexMatrix| -> Result<CircleFun> {
            if piecewise {
                CircleFun::piecewise(Partition::full(), vec![c.clone()])
            } else {
                Ok(CircleFun::constant(c.clone()))
            }
        };
        let mut acc = lift(&ComplexMatrix::zeros(self.dim))?;
        for t in &self.terms {
            let piece = match &t.piece {
                Piece::Atom(a) => a.data.clone(),
                Piece::Constant(c) => lift(c)?,
            };
            acc = acc.combine(&piece, t.lambda)?;
        }
        Ok(acc)
    }

    /// `‖Σ λ_k a_k − f‖_{L¹_c}`.
    pub fn residual(&self, f: &CircleFun) -> Result<f64> {
        let mut rec = self.reconstruct()?;
        if f.is_piecewise() && rec.is_band_limited() {
            // Only constants: lift them to match.
            rec = CircleFun::piecewise(Partition::full(), vec![rec.mean()])?;
        }
        lp_c_norm(&rec.sub(f)?, 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "scheme", content = "levels")]
pub enum Scheme {
    Global,
    /// Martingale differences over dyadic arcs down to `2^K` arcs.
    Dyadic(u32),
}

/// Constant term `∫ f dm` written as `‖c‖_1 · (c/‖c‖_1)`.
fn mean_term(f: &CircleFun) -> Result<Option<Term>> {
    let c = f.mean();
    let n = schatten_norm(&c, 1.0)?;
    Ok((n > 0.0).then(|| Term {
        lambda: Complex64::new(n, 0.0),
        piece: Piece::Constant(c.scale_real(1.0 / n)),
    }))
}

fn global_decomposition(f: &CircleFun) -> Result<Decomposition> {
    let mut dec = Decomposition::empty(f.dim());
    dec.terms.extend(mean_term(f)?);
    let g = f.mean_removed();
    let n = lp_c_norm(&g, 1.0)?;
    if n > 0.0 {
        dec.terms.push(Term {
            lambda: Complex64::new(n, 0.0),
            piece: Piece::Atom(Atom::new(Arc::full(), g.scale_real(1.0 / n))?),
        });
    }
    Ok(dec)
}

/// Decomposition at dyadic level `k`: the level-`k` local oscillations
/// plus one two-child difference per arc of every coarser level.
fn dyadic_decomposition(f: &CircleFun, k: u32) -> Result<Decomposition> {
    let Repr::PiecewiseConst { partition, .. } = f.repr() else {
        return Err(Error::Unsupported("dyadic atoms need piecewise-constant data".into()));
    };
    let d = f.dim();
    let p = partition.merge(&Partition::uniform(1 << k)?);
    let cells: Vec<(f64, f64)> = p.cells().collect();
    let g = f.mean_removed();
    let vals: Vec<ComplexMatrix> = cells.iter().map(|&(a, b)| g.eval(0.5 * (a + b))).collect();
    let arc_of = |level: u32, c: usize| -> usize {
        let (a, b) = cells[c];
        ((0.5 * (a + b)).rem_euclid(TAU) / TAU * (1u64 << level) as f64) as usize
    };
    // Conditional expectations E_j g on the 2^j arcs of each level.
    let expectations: Vec<Vec<ComplexMatrix>> = (0..=k)
        .map(|level| {
            let n = 1usize << level;
            let mut sums = vec![ComplexMatrix::zeros(d); n];
            let mut mass = vec![0.0; n];
            for (c, v) in vals.iter().enumerate() {
                let j = arc_of(level, c);
                let m = cells[c].1 - cells[c].0;
                sums[j].axpy(Complex64::new(m, 0.0), v);
                mass[j] += m;
            }
            sums.into_iter()
                .zip(mass)
                .map(|(s, m)| if m > 0.0 { s.scale_real(1.0 / m) } else { s })
                .collect()
        })
        .collect();

    let mut dec = Decomposition::empty(d);
    dec.terms.extend(mean_term(f)?);
    // Piece on arc `j` of `level`: cell values from `value(c)`.
    let mut push_piece = |level: u32, value: &dyn Fn(usize) -> ComplexMatrix| -> Result<()> {
        let n = 1usize << level;
        for j in 0..n {
            let members: Vec<usize> = (0..cells.len()).filter(|&c| arc_of(level, c) == j).collect();
            if members.is_empty() {
                continue;
            }
            let mut breaks: Vec<f64> = members.iter().map(|&c| cells[c].0).collect();
            let mut values: Vec<ComplexMatrix> = members.iter().map(|&c| value(c)).collect();
            let (start, end) = (cells[members[0]].0, cells[*members.last().unwrap()].1);
            let support = if n == 1 {
                Arc::full()
            } else {
                breaks.push(end);
                values.push(ComplexMatrix::zeros(d));
                Arc::from_interval(start, end)?
            };
            let piece = CircleFun::piecewise(Partition::new(breaks)?, values)?;
            let norm = lp_c_norm(&piece, 1.0)?;
            if norm <= 0.0 {
                continue;
            }
            let lambda = norm * support.measure().sqrt();
            dec.terms.push(Term {
                lambda: Complex64::new(lambda, 0.0),
                piece: Piece::Atom(Atom::new(support, piece.scale_real(1.0 / lambda))?),
            });
        }
        Ok(())
    };
    let finest = &expectations[k as usize];
    push_piece(k, &|c| &vals[c] - &finest[arc_of(k, c)])?;
    for level in 1..=k {
        let fine = &expectations[level as usize];
        let coarse = &expectations[level as usize - 1];
        push_piece(level - 1, &|c| &fine[arc_of(level, c)] - &coarse[arc_of(level - 1, c)])?;
    }
    Ok(dec)
}

/// Upper bound `Σ|λ_k|` from an explicit decomposition. The dyadic scheme
/// returns the best level `≤ K`; band-limited data only has level 0, which
/// is the global decomposition.
pub fn h1c_upper_bound(f: &CircleFun, scheme: Scheme) -> Result<(f64, Decomposition)> {
    let mut best = global_decomposition(f)?;
    if let (Scheme::Dyadic(k), true) = (scheme, f.is_piecewise()) {
        for level in 1..=k {
            let dec = dyadic_decomposition(f, level)?;
            if dec.coefficient_sum() < best.coefficient_sum() {
                best = dec;
            }
        }
    }
    Ok((best.coefficient_sum(), best))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    pub value: f64,
    /// Index of the witness attaining the bound.
    pub witness: usize,
}

/// `max_g |⟨f, g⟩| / ‖g‖_{BMO_c}` over witnesses with positive grid BMO
/// norm. The grid norm underestimates the true one, so for the bound to be
/// certified the grid should contain the supports of the atoms involved.
pub fn h1c_lower_bound(f: &CircleFun, witnesses: &[CircleFun], grid: &NormSearchGrid) -> Result<LowerBound> {
    let normed = witnesses
        .iter()
        .map(|g| Ok((g, bmo_c_norm(g, grid)?.value)))
        .collect::<Result<Vec<_>>>()?;
    lower_bound_from_norms(f, &normed)
}

/// As [`h1c_lower_bound`] with the BMO norms of the witnesses supplied.
pub fn lower_bound_from_norms(f: &CircleFun, witnesses: &[(&CircleFun, f64)]) -> Result<LowerBound> {
    let mut best: Option<LowerBound> = None;
    for (i, &(g, bmo)) in witnesses.iter().enumerate() {
        if !(bmo > 0.0) {
            continue;
        }
        let value = pairing(f, g)?.norm() / bmo;
        if best.is_none_or(|b| value > b.value) {
            best = Some(LowerBound { value, witness: i });
        }
    }
    best.ok_or(Error::DegenerateWitnesses)
}

// Serialization --------------------------------------------------------------

/// On-disk atom: the function document plus its support arc.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AtomDoc {
    pub support: Arc,
    #[serde(flatten)]
    pub function: FunctionDoc,
}

impl From<&Atom> for AtomDoc {
    fn from(a: &Atom) -> Self {
        AtomDoc {
            support: a.support,
            function: FunctionDoc::from(&a.data),
        }
    }
}

impl TryFrom<AtomDoc> for Atom {
    type Error = Error;

    fn try_from(doc: AtomDoc) -> Result<Self> {
        let support = Arc::new(doc.support.center, doc.support.radius)?;
        Atom::new(support, CircleFun::try_from(doc.function)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PieceDoc {
    Atom(AtomDoc),
    Constant { value: MatrixDoc },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermDoc {
    pub lambda: [f64; 2],
    pub piece: PieceDoc,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecompositionDoc {
    pub dim: usize,
    pub terms: Vec<TermDoc>,
}

impl From<&Decomposition> for DecompositionDoc {
    fn from(dec: &Decomposition) -> Self {
        let terms = dec
            .terms
            .iter()
            .map(|t| TermDoc {
                lambda: [t.lambda.re, t.lambda.im],
                piece: match &t.piece {
                    Piece::Atom(a) => PieceDoc::Atom(AtomDoc::from(a)),
                    Piece::Constant(c) => PieceDoc::Constant { value: matrix_to_doc(c) },
                },
            })
            .collect();
        DecompositionDoc { dim: dec.dim, terms }
    }
}

impl TryFrom<DecompositionDoc> for Decomposition {
    type Error = Error;

    fn try_from(doc: DecompositionDoc) -> Result<Self> {
        let mut terms = Vec::with_capacity(doc.terms.len());
        for t in doc.terms {
            let piece = match t.piece {
                PieceDoc::Atom(a) => Piece::Atom(Atom::try_from(a)?),
                PieceDoc::Constant { value } => Piece::Constant(matrix_from_doc(&value)?),
            };
            let dim = match &piece {
                Piece::Atom(a) => a.dim(),
                Piece::Constant(c) => c.dim(),
            };
            if dim != doc.dim {
                return Err(Error::DimensionMismatch { left: doc.dim, right: dim });
            }
            terms.push(Term {
                lambda: Complex64::new(t.lambda[0], t.lambda[1]),
                piece,
            });
        }
        Ok(Decomposition { dim: doc.dim, terms })
    }
}

impl Atom {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&AtomDoc::from(self)).expect("atom documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: AtomDoc = serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        Atom::try_from(doc)
    }
}
