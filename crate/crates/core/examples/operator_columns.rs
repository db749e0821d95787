//! Evaluates one column of each operator family on `n = e^(-x)` and compares
//! with the closed forms at `x = 1`.

use pbe_discovery::grid::{DensityField, InternalGrid, TemporalGrid};
use pbe_discovery::operators::{evaluate_column, BasisFunction, ColumnDescriptor, Process};

fn main() -> pbe_discovery::Result<()> {
    let x = InternalGrid::from_range(0.01, 10.0, 0.01)?;
    let t = TemporalGrid::from_range(0.0, 0.02, 0.01)?;
    let field = DensityField::from_fn(x, t, |x, _| (-x).exp())?;
    let i = field.xgrid().points().iter().position(|&v| (v - 1.0).abs() < 1e-9).unwrap();
    let e1 = (-1f64).exp();
    let cases = [
        (Process::AggBirth, BasisFunction::new(0, 0), 0.5 * (1.0 - 0.02) * e1, "½(x − 2x₁)e^(−x)"),
        (Process::AggDeath, BasisFunction::new(0, 0), e1 * ((-0.01f64).exp() - (-10f64).exp()), "e^(−x)·∫n"),
        (Process::BkgBirth, BasisFunction::new(0, 0), e1 - (-10f64).exp(), "∫ₓ n dy"),
        (Process::BkgDeath, BasisFunction::new(2, 0), e1, "x²·e^(−x)"),
        (Process::Growth, BasisFunction::new(0, 0), -e1, "d/dx e^(−x)"),
    ];
    for (process, basis, exact, label) in cases {
        let c = evaluate_column(&field, ColumnDescriptor::new(process, basis))?;
        let v = c.values[i];
        println!("{:<12} {:<14} {:.8} vs {:.8} (rel {:.1e})", c.name(), label, v, exact, ((v - exact) / exact).abs());
    }
    Ok(())
}
