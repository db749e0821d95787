//! Identified equations: kernels, term formulation, rewriting through recorded
//! equivalences, breakage stoichiometry, and coefficient-error metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::library::{Equivalence, SymbolicVector};
use crate::operators::{format_number, BasisFunction, ColumnDescriptor, Monomial, Process};
use crate::stls::SparseSolution;

/// What a kernel expression stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelRole {
    /// Aggregation frequency `Q(x, y)`.
    Aggregation,
    /// Breakage rate `Γ(x)`.
    BreakageRate,
    /// Breakage birth kernel `b(y) = β(x, y) Γ(y)`.
    BreakageBirth,
    /// Stoichiometric function `β(x, y)`.
    Stoichiometry,
    /// Growth rate `R(x)`.
    Growth,
    /// Kernel as it appears inside one operator, e.g. `Q(x − y, y)`.
    Operator,
}

/// Linear combination of monomials `Σ c · x^a y^b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelExpression {
    pub role: KernelRole,
    #[serde(with = "term_map")]
    pub terms: BTreeMap<Monomial, f64>,
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    x: i32,
    y: i32,
    c: f64,
}

mod term_map {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<Monomial, f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<TermRepr> = m.iter().map(|(k, &c)| TermRepr { x: k.x, y: k.y, c }).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BTreeMap<Monomial, f64>, D::Error> {
        let v: Vec<TermRepr> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|t| (Monomial::new(t.x, t.y), t.c)).collect())
    }
}

impl KernelExpression {
    pub fn new(role: KernelRole) -> Self {
        Self {
            role,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_terms(role: KernelRole, terms: &[(i32, i32, f64)]) -> Self {
        let mut k = Self::new(role);
        for &(a, b, c) in terms {
            k.add(Monomial::new(a, b), c);
        }
        k
    }

    pub fn constant(role: KernelRole, c: f64) -> Self {
        Self::from_terms(role, &[(0, 0, c)])
    }

    /// Adds `c · m`, dropping the monomial if it cancels exactly.
    pub fn add(&mut self, m: Monomial, c: f64) {
        let e = self.terms.entry(m).or_insert(0.0);
        *e += c;
        if *e == 0.0 {
            self.terms.remove(&m);
        }
    }

    pub fn coefficient(&self, m: Monomial) -> f64 {
        self.terms.get(&m).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.values().all(|&c| c == 0.0)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| c * x.powi(m.x) * y.powi(m.y))
            .sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            role: self.role,
            terms: self.terms.iter().map(|(&m, &c)| (m, c * s)).collect(),
        }
    }

    pub fn with_role(mut self, role: KernelRole) -> Self {
        self.role = role;
        self
    }

    /// Depends on `x` only.
    pub fn is_univariate_x(&self) -> bool {
        self.terms.keys().all(|m| m.y == 0)
    }

    /// Depends on `y` only.
    pub fn is_univariate_y(&self) -> bool {
        self.terms.keys().all(|m| m.x == 0)
    }

    /// Renames `x` to `y` (for a univariate rate evaluated at the parent size).
    pub fn x_as_y(&self) -> Self {
        Self {
            role: self.role,
            terms: self.terms.iter().map(|(&m, &c)| (Monomial::new(m.y, m.x), c)).collect(),
        }
    }

    /// `K(x − y, y)` expanded, when every `x` power is non-negative.
    pub fn shift_birth(&self) -> Option<KernelExpression> {
        let mut out = KernelExpression::new(KernelRole::Operator);
        for (m, &c) in &self.terms {
            if m.x < 0 {
                return None;
            }
            let a = m.x as u32;
            for k in 0..=a {
                let coef = c * binomial(a, k) * if (a - k) % 2 == 1 { -1.0 } else { 1.0 };
                out.add(Monomial::new(k as i32, m.y + (a - k) as i32), coef);
            }
        }
        Some(out)
    }

    /// L1 distance between coefficient vectors over the union of monomials.
    pub fn distance(&self, other: &KernelExpression) -> f64 {
        let keys: BTreeSet<Monomial> = self.terms.keys().chain(other.terms.keys()).copied().collect();
        keys.iter()
            .map(|&m| (self.coefficient(m) - other.coefficient(m)).abs())
            .sum()
    }

    /// Rendering with coefficients rounded to `digits` significant digits.
    pub fn render(&self, digits: usize) -> String {
        render_polynomial(&self.terms, digits)
    }
}

impl fmt::Display for KernelExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(6))
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Rounds to `digits` significant digits.
pub fn round_sig(v: f64, digits: usize) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    let mag = v.abs().log10().floor() as i32;
    let factor = 10f64.powi(digits as i32 - 1 - mag);
    (v * factor).round() / factor
}

fn fmt_coefficient(v: f64, digits: usize) -> String {
    format_number(round_sig(v, digits))
}

fn is_unit(v: f64, digits: usize) -> bool {
    round_sig(v, digits) == 1.0
}

fn render_polynomial(terms: &BTreeMap<Monomial, f64>, digits: usize) -> String {
    let mut s = String::new();
    for (k, (m, &c)) in terms.iter().enumerate() {
        let mag = c.abs();
        let body = if *m == Monomial::ONE {
            fmt_coefficient(mag, digits)
        } else if is_unit(mag, digits) {
            m.to_string()
        } else {
            format!("{}{}", fmt_coefficient(mag, digits), m)
        };
        if k == 0 {
            if c < 0.0 {
                s.push('−');
            }
        } else {
            s.push_str(if c < 0.0 { " − " } else { " + " });
        }
        s.push_str(&body);
    }
    if s.is_empty() {
        s.push('0');
    }
    s
}

/// An alternate representation of a term, from a recorded equivalence:
/// `primary ≈ scale × alternate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alternate {
    pub column: ColumnDescriptor,
    pub scale: f64,
}

/// One active library column in operator form. Its contribution to `ṅ` is
/// `natural_sign(process) · coefficient · Op(monomial)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelTerm {
    pub process: Process,
    pub monomial: Monomial,
    pub coefficient: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alternates: Vec<Alternate>,
}

impl ModelTerm {
    pub fn new(process: Process, monomial: Monomial, coefficient: f64) -> Self {
        Self {
            process,
            monomial,
            coefficient,
            alternates: Vec::new(),
        }
    }

    /// Regression coefficient on the unit-multiplier column.
    pub fn column_coefficient(&self) -> f64 {
        self.process.natural_sign() * self.coefficient
    }

    pub fn descriptor(&self) -> ColumnDescriptor {
        ColumnDescriptor::new(self.process, BasisFunction::new(self.monomial.x, self.monomial.y))
    }
}

fn process_rank(p: Process) -> usize {
    match p {
        Process::Growth => 0,
        Process::BkgBirth => 1,
        Process::BkgDeath => 2,
        Process::AggBirth => 3,
        Process::AggDeath => 4,
    }
}

/// Where a formulated model came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ModelProvenance {
    pub case: Option<String>,
    pub combination: Option<String>,
    pub lambda: Option<f64>,
    pub cost: Option<f64>,
    pub penalty: Option<u32>,
    pub residual: Option<f64>,
}

/// A population balance equation `ṅ = Σ terms`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PBEModel {
    pub terms: Vec<ModelTerm>,
    #[serde(default)]
    pub provenance: ModelProvenance,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl PBEModel {
    pub fn null() -> Self {
        Self::default()
    }

    pub fn is_null(&self) -> bool {
        self.terms.is_empty()
    }

    /// Builds a model from kernels: aggregation `Q`, breakage rate `Γ` with
    /// birth kernel `b(y)`, and growth rate `R`.
    pub fn from_kernels(
        aggregation: Option<&KernelExpression>,
        breakage: Option<(&KernelExpression, &KernelExpression)>,
        growth: Option<&KernelExpression>,
    ) -> Result<Self> {
        let mut m = PBEModel::null();
        if let Some(r) = growth {
            for (&mono, &c) in &r.terms {
                m.terms.push(ModelTerm::new(Process::Growth, mono, c));
            }
        }
        if let Some((rate, birth)) = breakage {
            for (&mono, &c) in &birth.terms {
                m.terms.push(ModelTerm::new(Process::BkgBirth, mono, c));
            }
            for (&mono, &c) in &rate.terms {
                m.terms.push(ModelTerm::new(Process::BkgDeath, mono, c));
            }
        }
        if let Some(q) = aggregation {
            let birth = q
                .shift_birth()
                .ok_or_else(|| Error::invalid("aggregation kernel must be polynomial in x"))?;
            for (&mono, &c) in &birth.terms {
                m.terms.push(ModelTerm::new(Process::AggBirth, mono, c));
            }
            for (&mono, &c) in &q.terms {
                m.terms.push(ModelTerm::new(Process::AggDeath, mono, c));
            }
        }
        m.canonicalize();
        Ok(m)
    }

    /// Sorts terms (growth, breakage, aggregation; births before deaths; then
    /// by monomial) and merges duplicates. Idempotent.
    pub fn canonicalize(&mut self) {
        let mut merged: BTreeMap<(usize, Monomial), ModelTerm> = BTreeMap::new();
        for t in self.terms.drain(..) {
            let key = (process_rank(t.process), t.monomial);
            match merged.get_mut(&key) {
                Some(e) => {
                    e.coefficient += t.coefficient;
                    e.alternates.extend(t.alternates);
                }
                None => {
                    merged.insert(key, t);
                }
            }
        }
        self.terms = merged.into_values().filter(|t| t.coefficient != 0.0).collect();
    }

    /// Kernel carried by one operator, coefficients in the natural-sign convention.
    pub fn kernel(&self, process: Process) -> KernelExpression {
        let role = match process {
            Process::AggDeath => KernelRole::Aggregation,
            Process::AggBirth => KernelRole::Operator,
            Process::BkgBirth => KernelRole::BreakageBirth,
            Process::BkgDeath => KernelRole::BreakageRate,
            Process::Growth => KernelRole::Growth,
        };
        let mut k = KernelExpression::new(role);
        for t in self.terms.iter().filter(|t| t.process == process) {
            k.add(t.monomial, t.coefficient);
        }
        k
    }

    pub fn has(&self, process: Process) -> bool {
        self.terms.iter().any(|t| t.process == process)
    }

    /// `(process, monomial)` pairs: the structure a success is judged on.
    pub fn term_set(&self) -> BTreeSet<(Process, Monomial)> {
        self.terms.iter().map(|t| (t.process, t.monomial)).collect()
    }

    /// Number of unpaired birth/death processes.
    pub fn penalty(&self) -> u32 {
        crate::selector::penalty_from_processes(|p| self.has(p))
    }

    pub fn is_realizable(&self) -> bool {
        self.penalty() == 0
    }

    /// Canonical one-line form with 2 significant digits, e.g.
    /// `ṅ = 2B_bkg(y) − D_bkg(x²) + B_agg(1) − D_agg(1)`.
    pub fn render(&self) -> String {
        self.render_with(2, false)
    }

    /// Same form with 6 significant digits.
    pub fn render_precise(&self) -> String {
        self.render_with(6, false)
    }

    /// Variant with breakage-birth coefficients folded into the kernel.
    pub fn render_folded(&self) -> String {
        self.render_with(2, true)
    }

    fn render_with(&self, digits: usize, fold_breakage: bool) -> String {
        if self.is_null() {
            return "ṅ = 0".into();
        }
        let mut parts: Vec<(bool, String)> = Vec::new();
        for p in [
            Process::Growth,
            Process::BkgBirth,
            Process::BkgDeath,
            Process::AggBirth,
            Process::AggDeath,
        ] {
            let k = self.kernel(p);
            if k.is_empty() {
                continue;
            }
            let lead = *k.terms.values().next().unwrap();
            let negative = (p.natural_sign() * lead.signum()) < 0.0;
            let inner = k.scaled(lead.signum());
            let body = if p == Process::BkgBirth && !fold_breakage && inner.len() == 1 {
                let (m, &c) = inner.terms.iter().next().unwrap();
                let prefix = if is_unit(c, digits) {
                    String::new()
                } else {
                    fmt_coefficient(c, digits)
                };
                format!("{prefix}{}({m})", p.symbol())
            } else {
                format!("{}({})", p.symbol(), inner.render(digits))
            };
            parts.push((negative, body));
        }
        let mut s = String::from("ṅ = ");
        for (k, (neg, body)) in parts.iter().enumerate() {
            if k == 0 {
                if *neg {
                    s.push('−');
                }
            } else {
                s.push_str(if *neg { " − " } else { " + " });
            }
            s.push_str(body);
        }
        s
    }
}

impl fmt::Display for PBEModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// One model term per active column, with the column's recorded alternates.
pub fn formulate_pbe(solution: &SparseSolution, symbols: &SymbolicVector) -> Result<PBEModel> {
    let mut model = PBEModel::null();
    for &c in &solution.support {
        let entry = symbols
            .get(c)
            .ok_or_else(|| Error::UnresolvableColumn(format!("support index {c}")))?;
        let d = entry.column;
        let xi = solution.coefficients[c];
        let coefficient = d.process.natural_sign() * xi * d.basis.multiplier;
        let mut term = ModelTerm::new(d.process, d.basis.monomial(), coefficient);
        term.alternates = entry.equivalences.iter().map(alternate_of).collect();
        model.terms.push(term);
    }
    model.canonicalize();
    model.provenance = ModelProvenance {
        case: None,
        combination: solution.combination.map(|c| c.tag()),
        lambda: Some(solution.lambda),
        cost: solution.cost,
        penalty: solution.penalty,
        residual: Some(solution.residual),
    };
    Ok(model)
}

fn alternate_of(e: &Equivalence) -> Alternate {
    Alternate {
        column: e.alternate,
        scale: e.scale,
    }
}

/// What [`resolve_dependent_terms`] did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Resolution {
    /// `(from, to)` term renderings for every rewrite.
    pub rewrites: Vec<(String, String)>,
    /// Alternates left in place because no consistency test applied.
    pub unresolved: Vec<String>,
}

/// Rewrites aggregation-birth terms through their alternates so that the birth
/// kernel agrees with `Q(x − y, y)` derived from the identified death kernel.
pub fn resolve_dependent_terms(model: &PBEModel) -> (PBEModel, Resolution) {
    let mut report = Resolution::default();
    let mut out = model.clone();
    let births: Vec<usize> = (0..out.terms.len())
        .filter(|&k| out.terms[k].process == Process::AggBirth)
        .collect();
    let target = if out.has(Process::AggDeath) {
        out.kernel(Process::AggDeath).shift_birth()
    } else {
        None
    };
    let with_alts: Vec<usize> = births
        .iter()
        .copied()
        .filter(|&k| out.terms[k].alternates.iter().any(|a| a.column.process == Process::AggBirth))
        .collect();

    if let Some(target) = target.filter(|_| !with_alts.is_empty()) {
        // Each birth term with alternates is kept (choice 0) or swapped for
        // one of its aggregation-birth alternates.
        let options: Vec<Vec<Option<Alternate>>> = with_alts
            .iter()
            .map(|&k| {
                let mut v = vec![None];
                v.extend(
                    out.terms[k]
                        .alternates
                        .iter()
                        .filter(|a| a.column.process == Process::AggBirth)
                        .cloned()
                        .map(Some),
                );
                v
            })
            .collect();
        let mut best: Option<(f64, Vec<usize>)> = None;
        let mut choice = vec![0usize; options.len()];
        loop {
            let mut kernel = KernelExpression::new(KernelRole::Operator);
            for &b in &births {
                let pos = with_alts.iter().position(|&k| k == b);
                let t = &out.terms[b];
                match pos.and_then(|p| options[p][choice[p]].as_ref()) {
                    Some(alt) => kernel.add(alt.column.basis.monomial(), t.coefficient * alt.scale * alt.column.basis.multiplier),
                    None => kernel.add(t.monomial, t.coefficient),
                }
            }
            let d = kernel.distance(&target);
            if best.as_ref().is_none_or(|(bd, _)| d < *bd * (1.0 - 1e-9)) {
                best = Some((d, choice.clone()));
            }
            // next combination
            let mut i = 0;
            loop {
                if i == options.len() {
                    break;
                }
                choice[i] += 1;
                if choice[i] < options[i].len() {
                    break;
                }
                choice[i] = 0;
                i += 1;
            }
            if i == options.len() {
                break;
            }
        }
        let (_, pick) = best.expect("at least the identity choice");
        for (p, &k) in with_alts.iter().enumerate() {
            if let Some(alt) = &options[p][pick[p]] {
                let old = out.terms[k].clone();
                let coefficient = old.coefficient * alt.scale * alt.column.basis.multiplier;
                let from = format!("{}{}", format_number(round_sig(old.coefficient, 4)), old.descriptor().name());
                let mut new = ModelTerm::new(Process::AggBirth, alt.column.basis.monomial(), coefficient);
                // the swapped-out form stays available as an alternate
                new.alternates.push(Alternate {
                    column: old.descriptor(),
                    scale: 1.0 / alt.scale,
                });
                let to = format!("{}{}", format_number(round_sig(coefficient, 4)), new.descriptor().name());
                report.rewrites.push((from, to));
                out.terms[k] = new;
            }
        }
        out.canonicalize();
    }

    for t in &out.terms {
        for a in &t.alternates {
            if !(t.process == Process::AggBirth && out.has(Process::AggDeath)) {
                report
                    .unresolved
                    .push(format!("{} OR {}·{}", t.descriptor().name(), format_number(round_sig(a.scale, 4)), a.column.name()));
            }
        }
    }
    (out, report)
}

/// Stoichiometry deduced from a breakage birth kernel and rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stoichiometry {
    /// Birth kernel `b(y)` including its coefficient.
    pub birth: KernelExpression,
    /// Rate `Γ(x)`.
    pub rate: KernelExpression,
    /// `β(x, y) = b(y) / Γ(y)` when the ratio reduces to monomials.
    pub beta: Option<KernelExpression>,
    /// `ν(y) = ∫₀^y β dx`.
    pub daughters: Option<KernelExpression>,
    /// `ν` when it is constant.
    pub daughter_count: Option<f64>,
    pub note: Option<String>,
}

impl Stoichiometry {
    pub fn describe(&self) -> String {
        match (&self.beta, self.daughter_count) {
            (Some(b), Some(n)) => format!("β(x, y) = {}, ν = {}", b.render(3), format_number(round_sig(n, 3))),
            (Some(b), None) => format!("β(x, y) = {}", b.render(3)),
            _ => format!(
                "β(x, y) = ({}) / ({})",
                self.birth.render(3),
                self.rate.x_as_y().render(3)
            ),
        }
    }
}

/// `β = b(y)/Γ(y)` and `ν = ∫₀^y β dx`, simplified for monomial rates.
pub fn deduce_breakage_stoichiometry(model: &PBEModel) -> Result<Option<Stoichiometry>> {
    let birth = model.kernel(Process::BkgBirth);
    let rate = model.kernel(Process::BkgDeath);
    if birth.is_empty() && rate.is_empty() {
        return Ok(None);
    }
    if !birth.is_empty() && rate.is_zero() {
        return Err(Error::ZeroBreakageRate);
    }
    let mut st = Stoichiometry {
        birth: birth.clone(),
        rate: rate.clone(),
        beta: None,
        daughters: None,
        daughter_count: None,
        note: None,
    };
    if birth.is_empty() {
        st.note = Some("breakage death without a birth term".into());
        return Ok(Some(st));
    }
    if rate.len() != 1 {
        st.note = Some("rate is not a single monomial; β is a rational function".into());
        return Ok(Some(st));
    }
    let (rm, &rc) = rate.terms.iter().next().unwrap();
    let mut beta = KernelExpression::new(KernelRole::Stoichiometry);
    let mut nu = KernelExpression::new(KernelRole::Stoichiometry);
    for (m, &c) in &birth.terms {
        // b(y) = c y^k over Γ(y) = rc y^g; β has no x dependence, so ν = y β.
        let p = m.y - rm.x;
        beta.add(Monomial::new(0, p), c / rc);
        nu.add(Monomial::new(0, p + 1), c / rc);
    }
    if nu.len() == 1 && nu.terms.keys().next() == Some(&Monomial::ONE) {
        st.daughter_count = Some(nu.coefficient(Monomial::ONE));
    }
    st.beta = Some(beta);
    st.daughters = Some(nu);
    Ok(Some(st))
}

/// Structural match and coefficient accuracy against a reference model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientError {
    pub matched: bool,
    /// Mean of `100 |ĉ − c| / |c|` over shared terms, when any exist.
    pub average_percent: Option<f64>,
    pub per_term: Vec<(String, f64)>,
    /// Reference terms the model lacks.
    pub missing: Vec<String>,
    /// Model terms the reference lacks.
    pub extra: Vec<String>,
    pub warnings: Vec<String>,
}

/// Compares term sets and the coefficients of shared terms.
pub fn coefficient_error(model: &PBEModel, reference: &PBEModel) -> CoefficientError {
    let mut a = model.clone();
    a.canonicalize();
    let mut r = reference.clone();
    r.canonicalize();
    let (sa, sr) = (a.term_set(), r.term_set());
    let name = |p: Process, m: Monomial| format!("{}({})", p.symbol(), m);
    let missing: Vec<String> = sr.difference(&sa).map(|&(p, m)| name(p, m)).collect();
    let extra: Vec<String> = sa.difference(&sr).map(|&(p, m)| name(p, m)).collect();
    let mut per_term = Vec::new();
    let mut warnings = Vec::new();
    for t in &r.terms {
        if let Some(u) = a.terms.iter().find(|u| u.process == t.process && u.monomial == t.monomial) {
            if t.coefficient == 0.0 {
                warnings.push(format!("reference coefficient of {} is zero; excluded", name(t.process, t.monomial)));
                continue;
            }
            per_term.push((
                name(t.process, t.monomial),
                100.0 * (u.coefficient - t.coefficient).abs() / t.coefficient.abs(),
            ));
        }
    }
    let average_percent = if per_term.is_empty() {
        None
    } else {
        Some(per_term.iter().map(|(_, e)| e).sum::<f64>() / per_term.len() as f64)
    };
    CoefficientError {
        matched: missing.is_empty() && extra.is_empty(),
        average_percent,
        per_term,
        missing,
        extra,
        warnings,
    }
}
