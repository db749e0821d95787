//! Sequential thresholded least squares on a small synthetic system.

use nalgebra::{DMatrix, DVector};
use pbe_discovery::stls::{stls, StlsConfig};

fn main() -> pbe_discovery::Result<()> {
    let rows = 200;
    let a = DMatrix::from_fn(rows, 6, |i, j| ((i + 1) as f64 * 0.37 * (j + 1) as f64).sin());
    let truth = DVector::from_vec(vec![1.5, 0.0, -2.0, 0.0, 0.0, 0.05]);
    let b = &a * &truth;
    for lambda in [0.0, 0.01, 0.1, 1.0, 1.8] {
        let s = stls(&a, &b, StlsConfig::new(lambda))?;
        let coef: Vec<String> = s.coefficients.iter().map(|c| format!("{c:+.3}")).collect();
        println!("λ = {lambda:<5} support {:?} [{}] residual {:.2e}", s.support, coef.join(" "), s.residual);
    }
    Ok(())
}
