//! Candidate libraries, their combinations, and column elimination.
//!
//! A [`Library`] keeps only the triangular factor of `[Ω | ṅ]` over the rows
//! in use: `(q + 1) × (q + 1)` numbers regardless of `p`. Residuals, least
//! squares and rank decisions on any column subset are exact through it.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DensityField, DerivativeVector, RowMask};
use crate::linalg::{self, RowCompressor};
use crate::operators::{BasisFunction, CandidateColumn, ColumnDescriptor, Family, Process, SliceEvaluator};

/// Default relative rank tolerance on unit-norm columns.
pub const RANK_TOLERANCE: f64 = 1e-8;
/// Members whose normalized null coefficient is below this fraction of the
/// largest are weak.
pub const WEAK_THRESHOLD: f64 = 0.1;
/// Normalized null coefficients below this are not group members.
const MEMBER_FLOOR: f64 = 1e-6;

/// Candidate kernels per operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisCatalog {
    pub agg_birth: Vec<BasisFunction>,
    pub agg_death: Vec<BasisFunction>,
    pub bkg_birth: Vec<BasisFunction>,
    pub bkg_death: Vec<BasisFunction>,
    pub growth: Vec<BasisFunction>,
}

/// Exponents of the power and reciprocal-power bases up to order 3.
pub const POWER_EXPONENTS: [i32; 7] = [0, 1, 2, 3, -1, -2, -3];

impl Default for BasisCatalog {
    /// The 41-column benchmark catalog.
    fn default() -> Self {
        let agg: Vec<BasisFunction> = [
            (0, 0),
            (1, 0),
            (2, 0),
            (3, 0),
            (0, 1),
            (0, 2),
            (0, 3),
            (1, 1),
            (2, 1),
            (1, 2),
        ]
        .iter()
        .map(|&(a, b)| BasisFunction::new(a, b))
        .collect();
        Self {
            agg_birth: agg.clone(),
            agg_death: agg,
            bkg_birth: POWER_EXPONENTS.iter().map(|&e| BasisFunction::y(e)).collect(),
            bkg_death: POWER_EXPONENTS.iter().map(|&e| BasisFunction::x(e)).collect(),
            growth: POWER_EXPONENTS.iter().map(|&e| BasisFunction::x(e)).collect(),
        }
    }
}

impl BasisCatalog {
    /// Columns of one family: birth block, then death block.
    pub fn descriptors(&self, family: Family) -> Vec<ColumnDescriptor> {
        let blocks: Vec<(Process, &Vec<BasisFunction>)> = match family {
            Family::Aggregation => vec![
                (Process::AggBirth, &self.agg_birth),
                (Process::AggDeath, &self.agg_death),
            ],
            Family::Breakage => vec![
                (Process::BkgBirth, &self.bkg_birth),
                (Process::BkgDeath, &self.bkg_death),
            ],
            Family::Growth => vec![(Process::Growth, &self.growth)],
        };
        blocks
            .into_iter()
            .flat_map(|(p, list)| list.iter().map(move |&b| ColumnDescriptor::new(p, b)))
            .collect()
    }

    /// Columns of every family in `combination`, in master order.
    pub fn master_descriptors(&self, combination: Combination) -> Vec<ColumnDescriptor> {
        combination
            .families()
            .into_iter()
            .flat_map(|f| self.descriptors(f))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.agg_birth.len()
            + self.agg_death.len()
            + self.bkg_birth.len()
            + self.bkg_death.len()
            + self.growth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks admissibility and uniqueness of every entry.
    pub fn validate(&self) -> Result<()> {
        let all = self.master_descriptors(Combination::ALL);
        for (k, d) in all.iter().enumerate() {
            d.check()?;
            if all[..k].iter().any(|e| e == d) {
                return Err(Error::Config(format!("duplicate catalog entry {}", d.name())));
            }
        }
        Ok(())
    }
}

/// A nonempty subset of the three process families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Combination {
    pub aggregation: bool,
    pub breakage: bool,
    pub growth: bool,
}

impl Combination {
    pub const ALL: Combination = Combination {
        aggregation: true,
        breakage: true,
        growth: true,
    };

    pub fn new(growth: bool, breakage: bool, aggregation: bool) -> Self {
        Self {
            aggregation,
            breakage,
            growth,
        }
    }

    /// The seven nonempty subsets: G, bkg, agg, G+bkg, G+agg, bkg+agg, all.
    pub fn all_seven() -> Vec<Combination> {
        vec![
            Self::new(true, false, false),
            Self::new(false, true, false),
            Self::new(false, false, true),
            Self::new(true, true, false),
            Self::new(true, false, true),
            Self::new(false, true, true),
            Self::new(true, true, true),
        ]
    }

    pub fn from_families(families: &[Family]) -> Self {
        Self::new(
            families.contains(&Family::Growth),
            families.contains(&Family::Breakage),
            families.contains(&Family::Aggregation),
        )
    }

    pub fn contains(&self, f: Family) -> bool {
        match f {
            Family::Aggregation => self.aggregation,
            Family::Breakage => self.breakage,
            Family::Growth => self.growth,
        }
    }

    /// Families in master-library order.
    pub fn families(&self) -> Vec<Family> {
        Family::ALL.into_iter().filter(|&f| self.contains(f)).collect()
    }

    pub fn is_empty(&self) -> bool {
        !(self.aggregation || self.breakage || self.growth)
    }

    pub fn tag(&self) -> String {
        let mut parts = Vec::new();
        if self.growth {
            parts.push("G");
        }
        if self.breakage {
            parts.push("bkg");
        }
        if self.aggregation {
            parts.push("agg");
        }
        if parts.is_empty() {
            "none".into()
        } else {
            parts.join("+")
        }
    }
}

impl fmt::Display for Combination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

impl From<Combination> for String {
    fn from(c: Combination) -> String {
        c.tag()
    }
}

impl TryFrom<String> for Combination {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        let mut c = Combination::new(false, false, false);
        for part in s.split('+').map(str::trim) {
            match part {
                "G" | "growth" => c.growth = true,
                "bkg" | "breakage" => c.breakage = true,
                "agg" | "aggregation" => c.aggregation = true,
                other => {
                    return Err(Error::Config(format!("unknown family {other:?} in {s:?}")))
                }
            }
        }
        if c.is_empty() {
            return Err(Error::Config("empty combination".into()));
        }
        Ok(c)
    }
}

impl std::str::FromStr for Combination {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Combination::try_from(s.to_string())
    }
}

/// Evaluates every column of one family.
pub fn build_sublibrary(
    field: &DensityField,
    family: Family,
    catalog: &BasisCatalog,
) -> Result<Vec<CandidateColumn>> {
    let descriptors = catalog.descriptors(family);
    if descriptors.is_empty() {
        return Err(Error::EmptyCatalog(family.tag().into()));
    }
    descriptors
        .into_par_iter()
        .map(|d| crate::operators::evaluate_column(field, d))
        .collect()
}

/// A regression system `Ω ξ ≈ ṅ` held through the triangular factor of
/// `[Ω | ṅ]` over the rows in use.
#[derive(Debug, Clone, PartialEq)]
pub struct Library {
    descriptors: Vec<ColumnDescriptor>,
    combination: Combination,
    curated: bool,
    factor: DMatrix<f64>,
    rows: usize,
}

/// Concatenates sub-libraries column-wise and compresses them with the target.
pub fn assemble_master(
    sublibs: Vec<Vec<CandidateColumn>>,
    target: &DerivativeVector,
    mask: &RowMask,
) -> Result<Library> {
    let columns: Vec<CandidateColumn> = sublibs.into_iter().flatten().collect();
    Library::from_columns(columns, target, mask)
}

impl Library {
    /// Compresses explicitly evaluated columns.
    pub fn from_columns(
        columns: Vec<CandidateColumn>,
        target: &DerivativeVector,
        mask: &RowMask,
    ) -> Result<Library> {
        let p = target.len();
        if mask.total() != p {
            return Err(Error::LengthMismatch {
                expected: p,
                found: mask.total(),
            });
        }
        for c in &columns {
            if c.values.len() != p {
                return Err(Error::LengthMismatch {
                    expected: p,
                    found: c.values.len(),
                });
            }
        }
        let descriptors: Vec<ColumnDescriptor> = columns.iter().map(|c| c.descriptor).collect();
        check_unique(&descriptors)?;
        let q = descriptors.len();
        let mut comp = RowCompressor::new(q + 1);
        let mut row = vec![0.0; q + 1];
        for &r in mask.indices() {
            for (k, c) in columns.iter().enumerate() {
                row[k] = c.values[r];
            }
            row[q] = target.entries()[r];
            comp.push_row(&row);
        }
        let families: Vec<Family> = descriptors.iter().map(|d| d.process.family()).collect();
        Ok(Library {
            descriptors,
            combination: Combination::from_families(&families),
            curated: false,
            factor: comp.finish(),
            rows: mask.len(),
        })
    }

    /// Evaluates and compresses the `combination` library slice by slice,
    /// never materializing `Ω`.
    pub fn from_field(
        field: &DensityField,
        target: &DerivativeVector,
        catalog: &BasisCatalog,
        combination: Combination,
        mask: &RowMask,
    ) -> Result<Library> {
        let descriptors = catalog.master_descriptors(combination);
        if descriptors.is_empty() {
            return Err(Error::EmptyCatalog(combination.tag()));
        }
        Self::from_descriptors(field, target, descriptors, combination, mask)
    }

    pub fn from_descriptors(
        field: &DensityField,
        target: &DerivativeVector,
        descriptors: Vec<ColumnDescriptor>,
        combination: Combination,
        mask: &RowMask,
    ) -> Result<Library> {
        let (j, k) = (field.nx(), field.nt());
        if target.nx() != j || target.nt() != k {
            return Err(Error::LengthMismatch {
                expected: field.len(),
                found: target.len(),
            });
        }
        if mask.total() != field.len() {
            return Err(Error::LengthMismatch {
                expected: field.len(),
                found: mask.total(),
            });
        }
        for d in &descriptors {
            d.check()?;
        }
        check_unique(&descriptors)?;
        if descriptors.iter().any(|d| d.process == Process::Growth) && j < 3 {
            return Err(Error::InsufficientPoints {
                axis: "x",
                needed: 3,
                found: j,
            });
        }
        let q = descriptors.len();
        let x = field.xgrid().points();
        let h = field.xgrid().spacing();
        let mut comp = RowCompressor::new(q + 1);
        let selected = mask_flags(mask);
        // Slices are evaluated in parallel chunks and compressed in order.
        let chunk = (200_000 / (j * (q + 1)).max(1)).clamp(1, k.max(1));
        let mut row = vec![0.0; q + 1];
        for start in (0..k).step_by(chunk) {
            let end = (start + chunk).min(k);
            let blocks: Vec<Vec<f64>> = (start..end)
                .into_par_iter()
                .map(|m| {
                    let mut ev = SliceEvaluator::new(x, h, field.slice(m));
                    let mut block = vec![0.0; q * j];
                    for (c, d) in descriptors.iter().enumerate() {
                        ev.evaluate_into(d, &mut block[c * j..(c + 1) * j]);
                    }
                    block
                })
                .collect();
            for (offset, block) in blocks.iter().enumerate() {
                let m = start + offset;
                for i in 0..j {
                    let r = m * j + i;
                    if !selected.as_ref().is_none_or(|s| s[r]) {
                        continue;
                    }
                    for c in 0..q {
                        row[c] = block[c * j + i];
                    }
                    row[q] = target.entries()[r];
                    comp.push_row(&row);
                }
            }
        }
        Ok(Library {
            descriptors,
            combination,
            curated: false,
            factor: comp.finish(),
            rows: mask.len(),
        })
    }

    pub fn descriptors(&self) -> &[ColumnDescriptor] {
        &self.descriptors
    }

    pub fn names(&self) -> Vec<String> {
        self.descriptors.iter().map(|d| d.name()).collect()
    }

    /// Number of columns `q`.
    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    pub fn combination(&self) -> Combination {
        self.combination
    }

    pub fn is_curated(&self) -> bool {
        self.curated
    }

    /// Number of data rows represented.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Triangular factor of `[Ω | ṅ]`.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// `R_Ω`: a `(q + 1) × q` stand-in for `Ω` with identical inner products.
    pub fn design(&self) -> DMatrix<f64> {
        self.factor.columns(0, self.len()).into_owned()
    }

    /// Stand-in for `ṅ` matching [`Library::design`].
    pub fn target(&self) -> DVector<f64> {
        self.factor.column(self.len()).into_owned()
    }

    /// `‖ṅ‖₂²` over the rows in use.
    pub fn target_norm_squared(&self) -> f64 {
        self.factor.column(self.len()).norm_squared()
    }

    /// `‖Ω_c‖₂` for every column.
    pub fn column_norms(&self) -> Vec<f64> {
        (0..self.len()).map(|c| self.factor.column(c).norm()).collect()
    }

    /// `‖Ω ξ − ṅ‖₂²` for a full-length coefficient vector.
    pub fn residual(&self, coefficients: &[f64]) -> f64 {
        assert_eq!(coefficients.len(), self.len());
        let mut v = self.target();
        v.neg_mut();
        for (c, &xi) in coefficients.iter().enumerate() {
            if xi != 0.0 {
                v.axpy(xi, &self.factor.column(c), 1.0);
            }
        }
        v.norm_squared()
    }

    pub fn position(&self, d: &ColumnDescriptor) -> Option<usize> {
        self.descriptors.iter().position(|e| e == d)
    }

    /// The sub-system on `columns` (indices into this library, kept in order).
    pub fn restrict(&self, columns: &[usize]) -> Library {
        let q = self.len();
        let mut picked: Vec<usize> = columns.to_vec();
        picked.push(q);
        let sub = DMatrix::from_fn(self.factor.nrows(), picked.len(), |r, c| self.factor[(r, picked[c])]);
        let descriptors: Vec<ColumnDescriptor> = columns.iter().map(|&c| self.descriptors[c]).collect();
        Library {
            combination: self.combination,
            curated: self.curated,
            factor: linalg::triangular_factor(&sub),
            rows: self.rows,
            descriptors,
        }
    }

    /// The columns belonging to the families of `combination`.
    pub fn restrict_to(&self, combination: Combination) -> Library {
        let cols: Vec<usize> = (0..self.len())
            .filter(|&c| combination.contains(self.descriptors[c].process.family()))
            .collect();
        let mut lib = self.restrict(&cols);
        lib.combination = combination;
        lib
    }

    /// Recomputes the full `p × q` matrix from the field, for export.
    pub fn materialize(&self, field: &DensityField) -> Result<DMatrix<f64>> {
        let cols = self
            .descriptors
            .iter()
            .map(|&d| crate::operators::evaluate_column(field, d))
            .collect::<Result<Vec<_>>>()?;
        Ok(DMatrix::from_fn(field.len(), cols.len(), |r, c| cols[c].values[r]))
    }
}

fn check_unique(descriptors: &[ColumnDescriptor]) -> Result<()> {
    for (k, d) in descriptors.iter().enumerate() {
        if descriptors[..k].contains(d) {
            return Err(Error::Config(format!("duplicate library column {}", d.name())));
        }
    }
    Ok(())
}

fn mask_flags(mask: &RowMask) -> Option<Vec<bool>> {
    if mask.is_full() {
        return None;
    }
    let mut flags = vec![false; mask.total()];
    for &i in mask.indices() {
        flags[i] = true;
    }
    Some(flags)
}

/// One retained-to-eliminated link: `primary OR scale × alternate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equivalence {
    pub alternate: ColumnDescriptor,
    /// `primary ≈ scale × alternate` (ignoring weak members).
    pub scale: f64,
    /// Exact relation `alternate = Σ coefficient × retained`.
    pub relation: Vec<RelationTerm>,
    /// Relative norm of what the relation fails to reproduce.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationTerm {
    pub column: ColumnDescriptor,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolEntry {
    pub column: ColumnDescriptor,
    pub equivalences: Vec<Equivalence>,
}

impl SymbolEntry {
    /// `B_agg(y) OR 0.5·B_agg(x)`.
    pub fn describe(&self) -> String {
        let mut s = self.column.name();
        for e in &self.equivalences {
            s.push_str(&format!(" OR {}·{}", fmt_sig(e.scale, 4), e.alternate.name()));
        }
        s
    }
}

fn fmt_sig(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let mag = v.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - mag).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// The interpretability ledger: one entry per retained column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SymbolicVector {
    pub entries: Vec<SymbolEntry>,
    /// Columns dropped because they vanish identically on the data.
    pub null_columns: Vec<ColumnDescriptor>,
}

impl SymbolicVector {
    pub fn identity(descriptors: &[ColumnDescriptor]) -> Self {
        Self {
            entries: descriptors
                .iter()
                .map(|&column| SymbolEntry {
                    column,
                    equivalences: Vec::new(),
                })
                .collect(),
            null_columns: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&SymbolEntry> {
        self.entries.get(index)
    }

    pub fn find(&self, d: &ColumnDescriptor) -> Option<&SymbolEntry> {
        self.entries.iter().find(|e| &e.column == d)
    }

    /// Every recorded equivalence, as `(retained, equivalence)`.
    pub fn equivalences(&self) -> impl Iterator<Item = (&ColumnDescriptor, &Equivalence)> {
        self.entries
            .iter()
            .flat_map(|e| e.equivalences.iter().map(move |q| (&e.column, q)))
    }
}

/// Columns tied by one linear relation, found during elimination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependencyGroup {
    /// Indices into the uncurated library.
    pub members: Vec<usize>,
    /// Null-space coefficients on unit-norm columns, scaled to max |·| = 1.
    pub null_vector: Vec<f64>,
    pub weak: Vec<usize>,
    pub strong: Vec<usize>,
    pub removed: usize,
}

/// Result of [`eliminate_dependent_columns`].
#[derive(Debug, Clone, PartialEq)]
pub struct Curation {
    pub library: Library,
    pub symbols: SymbolicVector,
    pub groups: Vec<DependencyGroup>,
    /// Indices (into the uncurated library) of the retained columns.
    pub kept: Vec<usize>,
    /// Indices of eliminated columns, including null columns.
    pub removed: Vec<usize>,
}

/// Orthonormal basis of the span of selected unit vectors.
fn orthonormal(cols: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(cols.len());
    for v in cols {
        let mut r = v.clone();
        for _ in 0..2 {
            for u in &out {
                let d = u.dot(&r);
                r.axpy(-d, u, 1.0);
            }
        }
        let n = r.norm();
        if n > 0.0 {
            out.push(r / n);
        }
    }
    out
}

fn projection_residual(basis: &[DVector<f64>], v: &DVector<f64>) -> f64 {
    let mut r = v.clone();
    for _ in 0..2 {
        for u in basis {
            let d = u.dot(&r);
            r.axpy(-d, u, 1.0);
        }
    }
    r.norm()
}

fn columns_matrix(cols: &[DVector<f64>], idx: &[usize]) -> DMatrix<f64> {
    let rows = cols.first().map_or(0, |c| c.len());
    DMatrix::from_fn(rows, idx.len(), |r, c| cols[idx[c]][r])
}

/// Builds a group from a null vector over `members`, picks the column to drop.
fn classify(members: Vec<usize>, null: Vec<f64>) -> DependencyGroup {
    let max = null.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scaled: Vec<f64> = null.iter().map(|v| v / max).collect();
    let (mut kept_m, mut kept_v) = (Vec::new(), Vec::new());
    for (&m, &v) in members.iter().zip(&scaled) {
        if v.abs() >= MEMBER_FLOOR {
            kept_m.push(m);
            kept_v.push(v);
        }
    }
    let mut order: Vec<usize> = (0..kept_m.len()).collect();
    order.sort_by_key(|&k| kept_m[k]);
    let members: Vec<usize> = order.iter().map(|&k| kept_m[k]).collect();
    let null_vector: Vec<f64> = order.iter().map(|&k| kept_v[k]).collect();
    let weak: Vec<usize> = members
        .iter()
        .zip(&null_vector)
        .filter(|(_, v)| v.abs() < WEAK_THRESHOLD)
        .map(|(&m, _)| m)
        .collect();
    let strong: Vec<usize> = members.iter().copied().filter(|m| !weak.contains(m)).collect();
    let removed = strong[0];
    DependencyGroup {
        members,
        null_vector,
        weak,
        strong,
        removed,
    }
}

/// Removes linearly dependent columns, recording what each removal means.
///
/// Columns are scanned in library order on unit-norm scaling. A column whose
/// distance from the span of the columns kept so far is below `tolerance`
/// closes a dependency group. Within the group, the lowest-indexed strong
/// member is dropped and the rest stay, so the span never shrinks. Each
/// dropped column is then re-expressed through the final retained set and
/// attached, as an equivalence, to the retained column carrying the largest
/// share of it.
pub fn eliminate_dependent_columns(lib: &Library, tolerance: f64) -> Result<Curation> {
    if !(tolerance > 0.0) {
        return Err(Error::invalid(format!("rank tolerance must be > 0, got {tolerance}")));
    }
    let q = lib.len();
    let norms = lib.column_norms();
    let max_norm = norms.iter().fold(0.0f64, |m, &v| m.max(v));
    let unit: Vec<DVector<f64>> = (0..q)
        .map(|c| {
            let col = lib.factor.column(c).into_owned();
            if norms[c] > 0.0 {
                col / norms[c]
            } else {
                col
            }
        })
        .collect();

    let mut kept: Vec<usize> = Vec::new();
    let mut removed: Vec<usize> = Vec::new();
    let mut nulls: Vec<usize> = Vec::new();
    let mut groups = Vec::new();
    let mut basis: Vec<DVector<f64>> = Vec::new();

    for c in 0..q {
        if norms[c] <= max_norm * f64::EPSILON || norms[c] == 0.0 {
            nulls.push(c);
            removed.push(c);
            continue;
        }
        if projection_residual(&basis, &unit[c]) >= tolerance {
            kept.push(c);
            basis = orthonormal(&kept.iter().map(|&k| unit[k].clone()).collect::<Vec<_>>());
            continue;
        }
        let a = columns_matrix(&unit, &kept);
        let alpha = linalg::least_squares(&a, &unit[c]);
        let mut members = kept.clone();
        members.push(c);
        let mut null: Vec<f64> = alpha.iter().copied().collect();
        null.push(-1.0);
        let group = classify(members, null);
        let victim = group.removed;
        removed.push(victim);
        if victim != c {
            kept.retain(|&k| k != victim);
            kept.push(c);
            kept.sort_unstable();
        }
        groups.push(group);
    }

    // Safety net: sequential distances can all clear the tolerance while the
    // retained set is still ill-conditioned as a whole.
    loop {
        if kept.len() < 2 {
            break;
        }
        let a = columns_matrix(&unit, &kept);
        let svd = a.clone().svd(false, true);
        let (kmin, smin) = svd
            .singular_values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (k, &s)| if s < acc.1 { (k, s) } else { acc });
        if smin >= tolerance {
            break;
        }
        let v_t = svd.v_t.expect("right singular vectors");
        let null: Vec<f64> = v_t.row(kmin).iter().copied().collect();
        let group = classify(kept.clone(), null);
        removed.push(group.removed);
        kept.retain(|&k| k != group.removed);
        groups.push(group);
    }

    let mut symbols = SymbolicVector {
        entries: kept
            .iter()
            .map(|&k| SymbolEntry {
                column: lib.descriptors[k],
                equivalences: Vec::new(),
            })
            .collect(),
        null_columns: nulls.iter().map(|&k| lib.descriptors[k]).collect(),
    };

    if !kept.is_empty() {
        let a = columns_matrix(&unit, &kept);
        for &e in removed.iter().filter(|e| !nulls.contains(e)) {
            let alpha = linalg::least_squares(&a, &unit[e]);
            let fit = &a * &alpha;
            let residual = (&unit[e] - fit).norm();
            let (pos, _) = alpha
                .iter()
                .enumerate()
                .fold((0, -1.0), |acc, (k, v)| if v.abs() > acc.1 { (k, v.abs()) } else { acc });
            let relation: Vec<RelationTerm> = kept
                .iter()
                .zip(alpha.iter())
                .map(|(&k, &al)| RelationTerm {
                    column: lib.descriptors[k],
                    coefficient: al * norms[e] / norms[k],
                })
                .collect();
            let partner_coef = relation[pos].coefficient;
            symbols.entries[pos].equivalences.push(Equivalence {
                alternate: lib.descriptors[e],
                scale: 1.0 / partner_coef,
                relation,
                residual,
            });
        }
    }

    removed.sort_unstable();
    let mut library = if removed.is_empty() {
        lib.clone()
    } else {
        lib.restrict(&kept)
    };
    library.curated = true;
    Ok(Curation {
        library,
        symbols,
        groups,
        kept,
        removed,
    })
}
