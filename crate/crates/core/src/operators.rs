//! The five operator families applied to candidate kernels:
//!
//! - `B_agg(f) = ½ ∫₀ˣ f(x, y) n(x − y) n(y) dy`
//! - `D_agg(f) = n(x) ∫₀^∞ f(x, y) n(y) dy`
//! - `B_bkg(f) = ∫ₓ^∞ f(y) n(y) dy`
//! - `D_bkg(f) = f(x) n(x)`
//! - `G(f) = ∂[f(x) n(x)]/∂x`
//!
//! Integrals use the composite trapezoid rule on the sampling grid and are
//! truncated to `[x₁, x_j]`.
//!
//! The aggregation-birth convolution pairs node `l` with node `i − l`
//! (0-based), so the two partners always sit on grid nodes. Their sizes add
//! to `x_i + x₁` rather than `x_i`; the resulting shift of `x₁` is far below
//! the library's resolving power on every benchmark grid, and keeps the
//! columns in exact linear relations such as `2 B_agg(y) = B_agg(x) + x₁ B_agg(1)`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::DensityField;

/// Process families, in master-library order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Aggregation,
    Breakage,
    Growth,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Aggregation, Family::Breakage, Family::Growth];

    pub fn tag(self) -> &'static str {
        match self {
            Family::Aggregation => "agg",
            Family::Breakage => "bkg",
            Family::Growth => "G",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Process {
    AggBirth,
    AggDeath,
    BkgBirth,
    BkgDeath,
    Growth,
}

impl Process {
    pub const ALL: [Process; 5] = [
        Process::AggBirth,
        Process::AggDeath,
        Process::BkgBirth,
        Process::BkgDeath,
        Process::Growth,
    ];

    pub fn family(self) -> Family {
        match self {
            Process::AggBirth | Process::AggDeath => Family::Aggregation,
            Process::BkgBirth | Process::BkgDeath => Family::Breakage,
            Process::Growth => Family::Growth,
        }
    }

    pub fn is_birth(self) -> bool {
        matches!(self, Process::AggBirth | Process::BkgBirth)
    }

    pub fn is_death(self) -> bool {
        matches!(self, Process::AggDeath | Process::BkgDeath)
    }

    /// Sign with which the term enters `ṅ` in the conventional equation:
    /// births add, deaths and the growth divergence subtract.
    pub fn natural_sign(self) -> f64 {
        if self.is_birth() {
            1.0
        } else {
            -1.0
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Process::AggBirth => "B_agg",
            Process::AggDeath => "D_agg",
            Process::BkgBirth => "B_bkg",
            Process::BkgDeath => "D_bkg",
            Process::Growth => "G",
        }
    }
}

impl fmt::Display for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Candidate kernel `multiplier · x^a · y^b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisFunction {
    #[serde(rename = "x")]
    pub x_pow: i32,
    #[serde(rename = "y")]
    pub y_pow: i32,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub multiplier: f64,
}

fn one() -> f64 {
    1.0
}

fn is_one(v: &f64) -> bool {
    *v == 1.0
}

impl BasisFunction {
    pub const fn new(x_pow: i32, y_pow: i32) -> Self {
        Self {
            x_pow,
            y_pow,
            multiplier: 1.0,
        }
    }

    pub const fn constant() -> Self {
        Self::new(0, 0)
    }

    pub const fn x(p: i32) -> Self {
        Self::new(p, 0)
    }

    pub const fn y(p: i32) -> Self {
        Self::new(0, p)
    }

    pub fn with_multiplier(mut self, m: f64) -> Self {
        self.multiplier = m;
        self
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.multiplier * x.powi(self.x_pow) * y.powi(self.y_pow)
    }

    pub fn monomial(&self) -> Monomial {
        Monomial::new(self.x_pow, self.y_pow)
    }

    /// Display name, e.g. `1`, `x²y`, `1/x³`, `10`, `2y`.
    pub fn name(&self) -> String {
        let mono = self.monomial().to_string();
        if self.multiplier == 1.0 {
            mono
        } else if mono == "1" {
            format_number(self.multiplier)
        } else {
            format!("{}{}", format_number(self.multiplier), mono)
        }
    }
}

impl fmt::Display for BasisFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Exponent pair of `x^a y^b`, ordered by total degree, then by `x` power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Monomial {
    pub x: i32,
    pub y: i32,
}

impl Monomial {
    pub const ONE: Monomial = Monomial { x: 0, y: 0 };

    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn degree(&self) -> i32 {
        self.x + self.y
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.degree(), std::cmp::Reverse(self.x)).cmp(&(other.degree(), std::cmp::Reverse(other.x)))
    }
}

fn superscript(p: u32) -> String {
    if p == 1 {
        return String::new();
    }
    const DIGITS: [char; 10] = ['⁰', '¹', '²', '³', '⁴', '⁵', '⁶', '⁷', '⁸', '⁹'];
    p.to_string()
        .chars()
        .map(|c| DIGITS[c.to_digit(10).unwrap() as usize])
        .collect()
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut num = String::new();
        let mut den = String::new();
        for (var, p) in [('x', self.x), ('y', self.y)] {
            let target = if p > 0 { &mut num } else { &mut den };
            if p != 0 {
                target.push(var);
                target.push_str(&superscript(p.unsigned_abs()));
            }
        }
        match (num.is_empty(), den.is_empty()) {
            (true, true) => f.write_str("1"),
            (false, true) => f.write_str(&num),
            (true, false) => write!(f, "1/{den}"),
            (false, false) => write!(f, "{num}/{den}"),
        }
    }
}

/// Compact decimal rendering: integers without a fraction, others trimmed.
pub fn format_number(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        let s = format!("{v:.6}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// A library column identity: which operator, applied to which kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnDescriptor {
    pub process: Process,
    pub basis: BasisFunction,
}

impl ColumnDescriptor {
    pub fn new(process: Process, basis: BasisFunction) -> Self {
        Self { process, basis }
    }

    pub fn name(&self) -> String {
        format!("{}({})", self.process.symbol(), self.basis.name())
    }

    /// Rejects kernels whose variables the operator cannot carry.
    pub fn check(&self) -> Result<()> {
        let bad = match self.process {
            Process::BkgBirth => self.basis.x_pow != 0,
            Process::BkgDeath | Process::Growth => self.basis.y_pow != 0,
            Process::AggBirth | Process::AggDeath => false,
        };
        if bad || !self.basis.multiplier.is_finite() {
            return Err(Error::BasisNotAllowed {
                process: self.process.symbol().to_string(),
                basis: self.basis.name(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for ColumnDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// One evaluated library column, ordered like [`crate::grid::DerivativeVector`].
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateColumn {
    pub descriptor: ColumnDescriptor,
    pub values: Vec<f64>,
}

impl CandidateColumn {
    pub fn process(&self) -> Process {
        self.descriptor.process
    }

    pub fn basis(&self) -> BasisFunction {
        self.descriptor.basis
    }

    pub fn name(&self) -> String {
        self.descriptor.name()
    }
}

/// Composite trapezoid rule on uniformly spaced samples. Fewer than two
/// samples span no interval and integrate to 0.
pub fn trapz(values: &[f64], spacing: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            spacing * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// `½ trapz_l g_l n_{i−k−l} Δx` over `l = 0..=i−k`, where `k = x₁/Δx`, so the
/// partner sizes `x_l` and `x_{i−k−l}` sum to `x_i` and `y` runs over
/// `[x₁, x_i − x₁]`.
fn convolution(g: &[f64], n: &[f64], x1: f64, h: f64) -> Vec<f64> {
    let j = n.len();
    let k = (x1 / h).round() as usize;
    let mut out = vec![0.0; j];
    for i in (k + 1)..j {
        let top = i - k;
        let s: f64 = g[..=top]
            .iter()
            .zip(n[..=top].iter().rev())
            .map(|(a, b)| a * b)
            .sum();
        let ends = 0.5 * (g[0] * n[top] + g[top] * n[0]);
        out[i] = 0.5 * h * (s - ends);
    }
    out
}

/// Reverse cumulative trapezoid: `out[i] = ∫_{x_i}^{x_j} g`.
fn tail_integral(g: &[f64], h: f64) -> Vec<f64> {
    let j = g.len();
    let mut out = vec![0.0; j];
    for i in (0..j.saturating_sub(1)).rev() {
        out[i] = out[i + 1] + 0.5 * h * (g[i] + g[i + 1]);
    }
    out
}

/// Second-order derivative: central inside, one-sided three-point at the ends.
pub(crate) fn gradient(f: &[f64], h: f64) -> Vec<f64> {
    let j = f.len();
    let mut out = vec![0.0; j];
    if j < 3 {
        return out;
    }
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    out[j - 1] = (3.0 * f[j - 1] - 4.0 * f[j - 2] + f[j - 3]) / (2.0 * h);
    for i in 1..j - 1 {
        out[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
    }
    out
}

fn powers(x: &[f64], p: i32) -> Vec<f64> {
    x.iter().map(|v| v.powi(p)).collect()
}

/// Evaluates many columns on one time slice, sharing the convolutions and
/// moments between kernels that differ only in their `x` power.
pub struct SliceEvaluator<'a> {
    x: &'a [f64],
    h: f64,
    n: &'a [f64],
    conv: BTreeMap<i32, Vec<f64>>,
    moments: BTreeMap<i32, f64>,
    tails: BTreeMap<i32, Vec<f64>>,
}

impl<'a> SliceEvaluator<'a> {
    pub fn new(x: &'a [f64], h: f64, n: &'a [f64]) -> Self {
        Self {
            x,
            h,
            n,
            conv: BTreeMap::new(),
            moments: BTreeMap::new(),
            tails: BTreeMap::new(),
        }
    }

    fn weighted(&self, p: i32) -> Vec<f64> {
        self.x.iter().zip(self.n).map(|(x, n)| x.powi(p) * n).collect()
    }

    /// Writes column `d` for this slice into `out` (length `j`).
    pub fn evaluate_into(&mut self, d: &ColumnDescriptor, out: &mut [f64]) {
        let BasisFunction {
            x_pow: a,
            y_pow: b,
            multiplier: c,
        } = d.basis;
        let (x, n, h) = (self.x, self.n, self.h);
        match d.process {
            Process::AggBirth => {
                if !self.conv.contains_key(&b) {
                    let g = self.weighted(b);
                    self.conv.insert(b, convolution(&g, n, x[0], h));
                }
                let s = &self.conv[&b];
                for i in 0..x.len() {
                    out[i] = c * x[i].powi(a) * s[i];
                }
            }
            Process::AggDeath => {
                if !self.moments.contains_key(&b) {
                    let g = self.weighted(b);
                    self.moments.insert(b, trapz(&g, h));
                }
                let m = self.moments[&b];
                for i in 0..x.len() {
                    out[i] = c * x[i].powi(a) * n[i] * m;
                }
            }
            Process::BkgBirth => {
                if !self.tails.contains_key(&b) {
                    let g = self.weighted(b);
                    self.tails.insert(b, tail_integral(&g, h));
                }
                for (o, t) in out.iter_mut().zip(&self.tails[&b]) {
                    *o = c * t;
                }
            }
            Process::BkgDeath => {
                for i in 0..x.len() {
                    out[i] = c * x[i].powi(a) * n[i];
                }
            }
            Process::Growth => {
                let f: Vec<f64> = powers(x, a).iter().zip(n).map(|(p, n)| c * p * n).collect();
                out.copy_from_slice(&gradient(&f, h));
            }
        }
    }

    pub fn evaluate(&mut self, d: &ColumnDescriptor) -> Vec<f64> {
        let mut out = vec![0.0; self.x.len()];
        self.evaluate_into(d, &mut out);
        out
    }
}

/// Evaluates column `d` over the whole field.
pub fn evaluate_column(field: &DensityField, d: ColumnDescriptor) -> Result<CandidateColumn> {
    d.check()?;
    if d.process == Process::Growth && field.nx() < 3 {
        return Err(Error::InsufficientPoints {
            axis: "x",
            needed: 3,
            found: field.nx(),
        });
    }
    let (x, h, j) = (field.xgrid().points(), field.xgrid().spacing(), field.nx());
    let mut values = vec![0.0; field.len()];
    for m in 0..field.nt() {
        let mut ev = SliceEvaluator::new(x, h, field.slice(m));
        ev.evaluate_into(&d, &mut values[m * j..(m + 1) * j]);
    }
    Ok(CandidateColumn {
        descriptor: d,
        values,
    })
}

pub fn agg_birth_column(field: &DensityField, basis: BasisFunction) -> Result<CandidateColumn> {
    evaluate_column(field, ColumnDescriptor::new(Process::AggBirth, basis))
}

pub fn agg_death_column(field: &DensityField, basis: BasisFunction) -> Result<CandidateColumn> {
    evaluate_column(field, ColumnDescriptor::new(Process::AggDeath, basis))
}

pub fn bkg_birth_column(field: &DensityField, basis: BasisFunction) -> Result<CandidateColumn> {
    evaluate_column(field, ColumnDescriptor::new(Process::BkgBirth, basis))
}

pub fn bkg_death_column(field: &DensityField, basis: BasisFunction) -> Result<CandidateColumn> {
    evaluate_column(field, ColumnDescriptor::new(Process::BkgDeath, basis))
}

pub fn growth_column(field: &DensityField, basis: BasisFunction) -> Result<CandidateColumn> {
    evaluate_column(field, ColumnDescriptor::new(Process::Growth, basis))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{InternalGrid, TemporalGrid};

    fn exp_field(x0: f64, xmax: f64, h: f64) -> DensityField {
        DensityField::from_fn(
            InternalGrid::from_range(x0, xmax, h).unwrap(),
            TemporalGrid::from_range(0.0, 0.1, 0.1).unwrap(),
            |x, _| (-x).exp(),
        )
        .unwrap()
    }

    fn index_of(field: &DensityField, x: f64) -> usize {
        field
            .xgrid()
            .points()
            .iter()
            .position(|&p| (p - x).abs() < 1e-9)
            .unwrap()
    }

    #[test]
    fn trapz_basics() {
        assert_eq!(trapz(&[0.0, 1.0, 2.0], 1.0), 2.0);
        assert_eq!(trapz(&[0.0; 5], 0.1), 0.0);
        assert_eq!(trapz(&[3.0], 0.1), 0.0);
        let g: Vec<f64> = (0..=1000).map(|i| (-(i as f64) * 0.01).exp()).collect();
        assert!((trapz(&g, 0.01) - (1.0 - (-10.0f64).exp())).abs() < 1e-4);
    }

    #[test]
    fn names_render() {
        assert_eq!(BasisFunction::new(2, 1).name(), "x²y");
        assert_eq!(BasisFunction::new(1, 2).name(), "xy²");
        assert_eq!(BasisFunction::x(-3).name(), "1/x³");
        assert_eq!(BasisFunction::constant().with_multiplier(10.0).name(), "10");
        assert_eq!(BasisFunction::y(1).with_multiplier(2.0).name(), "2y");
        assert_eq!(
            ColumnDescriptor::new(Process::BkgDeath, BasisFunction::x(2)).name(),
            "D_bkg(x²)"
        );
    }

    #[test]
    fn rejects_inadmissible_kernels() {
        let f = exp_field(0.1, 1.0, 0.1);
        assert!(matches!(
            bkg_birth_column(&f, BasisFunction::x(1)),
            Err(Error::BasisNotAllowed { .. })
        ));
        assert!(bkg_death_column(&f, BasisFunction::y(1)).is_err());
        assert!(growth_column(&f, BasisFunction::new(1, 1)).is_err());
    }

    #[test]
    fn zero_field_gives_zero_columns() {
        let f = DensityField::from_fn(
            InternalGrid::from_range(0.1, 2.0, 0.1).unwrap(),
            TemporalGrid::from_range(0.0, 0.2, 0.1).unwrap(),
            |_, _| 0.0,
        )
        .unwrap();
        for p in Process::ALL {
            let basis = match p {
                Process::BkgBirth => BasisFunction::y(1),
                Process::AggBirth | Process::AggDeath => BasisFunction::new(1, 1),
                _ => BasisFunction::x(2),
            };
            let col = evaluate_column(&f, ColumnDescriptor::new(p, basis)).unwrap();
            assert!(col.values.iter().all(|&v| v == 0.0), "{p}");
        }
    }

    #[test]
    fn agg_birth_on_exponential() {
        let f = exp_field(0.01, 10.0, 0.01);
        let col = agg_birth_column(&f, BasisFunction::constant()).unwrap();
        let i = index_of(&f, 2.0);
        let x1 = 0.01;
        let truncated = 0.5 * (-2.0f64).exp() * (2.0 - 2.0 * x1);
        assert!((col.values[i] - truncated).abs() < 1e-12);
        assert!((col.values[i] - (-2.0f64).exp()).abs() / (-2.0f64).exp() < 2.0 * x1);
        assert_eq!(col.values[0], 0.0);
    }

    #[test]
    fn agg_death_and_breakage_on_exponential() {
        let f = exp_field(0.01, 10.0, 0.01);
        let d = agg_death_column(&f, BasisFunction::constant()).unwrap();
        let exact = (-0.01f64).exp() * ((-0.01f64).exp() - (-10.0f64).exp());
        assert!((d.values[0] - exact).abs() < 1e-5);

        let b = bkg_birth_column(&f, BasisFunction::constant()).unwrap();
        let i = index_of(&f, 1.0);
        assert!((b.values[i] - ((-1.0f64).exp() - (-10.0f64).exp())).abs() < 1e-5);

        let dd = bkg_death_column(&f, BasisFunction::x(2)).unwrap();
        assert_eq!(dd.values[i], 1.0 * (-1.0f64).exp());
    }

    #[test]
    fn growth_on_exponential() {
        let f = exp_field(0.01, 10.0, 0.01);
        let g = growth_column(&f, BasisFunction::constant()).unwrap();
        let i = index_of(&f, 1.0);
        assert!((g.values[i] + (-1.0f64).exp()).abs() < 1e-4);
        let c = DensityField::from_fn(
            InternalGrid::from_range(0.1, 2.0, 0.1).unwrap(),
            TemporalGrid::from_range(0.0, 0.1, 0.1).unwrap(),
            |_, _| 4.0,
        )
        .unwrap();
        let g = growth_column(&c, BasisFunction::constant()).unwrap();
        assert!(g.values.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn exact_flip_relation_between_birth_columns() {
        let f = DensityField::from_fn(
            InternalGrid::from_range(0.01, 5.01, 0.1).unwrap(),
            TemporalGrid::from_range(0.0, 0.3, 0.1).unwrap(),
            |x, t| (1.0 + t) * (-x * (1.0 + t)).exp(),
        )
        .unwrap();
        let b1 = agg_birth_column(&f, BasisFunction::constant()).unwrap();
        let bx = agg_birth_column(&f, BasisFunction::x(1)).unwrap();
        let by = agg_birth_column(&f, BasisFunction::y(1)).unwrap();
        for k in 0..f.len() {
            let lhs = 0.01 * b1.values[k] + bx.values[k];
            assert!((lhs - 2.0 * by.values[k]).abs() <= 1e-13 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn columns_are_deterministic() {
        let f = exp_field(0.01, 3.0, 0.01);
        let d = ColumnDescriptor::new(Process::AggBirth, BasisFunction::new(1, 2));
        assert_eq!(evaluate_column(&f, d).unwrap(), evaluate_column(&f, d).unwrap());
    }

    #[test]
    fn monomial_order_is_by_degree() {
        let mut m = vec![Monomial::new(0, 1), Monomial::new(1, 0), Monomial::ONE, Monomial::new(1, 1)];
        m.sort();
        assert_eq!(m, vec![Monomial::ONE, Monomial::new(1, 0), Monomial::new(0, 1), Monomial::new(1, 1)]);
    }
}
