//! Sweeps all sub-library combinations on case (c) and shows the lowest-cost
//! entries of the solution pool with their cost breakdown.

use pbe_discovery::pipeline::{build_pool, preprocess, select_model, Preprocessing};
use pbe_discovery::library::BasisCatalog;
use pbe_discovery::selector::CombinationPlan;
use pbe_discovery::solver::generate_case;

fn main() -> pbe_discovery::Result<()> {
    let (field, spec) = generate_case("c")?;
    let data = preprocess(&field, &Preprocessing::clean())?;
    let mut pool = build_pool(&data, &BasisCatalog::default(), &CombinationPlan::default())?.expect("dynamics");
    let (best, _, model, _) = select_model(&mut pool, &spec.weights)?;
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| pool.entries[a].solution.cost.unwrap().total_cmp(&pool.entries[b].solution.cost.unwrap()));
    for &k in order.iter().take(5) {
        let e = &pool.entries[k];
        let s = &e.solution;
        println!(
            "{} cost {:.4} (residual {:.3e}, {} terms, Φ = {}) {:?}",
            if k == best { "*" } else { " " },
            s.cost.unwrap(),
            s.residual,
            s.terms(),
            s.penalty.unwrap_or(0),
            pool.support_names(e)
        );
    }
    println!("selected: {}", model.render());
    Ok(())
}
