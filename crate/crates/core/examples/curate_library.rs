//! Column elimination on the sum-aggregation library: dependent groups,
//! weak and strong members, and the recorded equivalences.

use pbe_discovery::grid::{time_derivative, FiniteDifference, RowMask};
use pbe_discovery::library::{eliminate_dependent_columns, BasisCatalog, Combination, Library, RANK_TOLERANCE};
use pbe_discovery::solver::generate_case;

fn main() -> pbe_discovery::Result<()> {
    let (field, _) = generate_case("b")?;
    let target = time_derivative(&field, FiniteDifference::Second)?;
    let agg = Combination::new(false, false, true);
    let lib = Library::from_field(&field, &target, &BasisCatalog::default(), agg, &RowMask::full(target.len()))?;
    let names = lib.names();
    let curation = eliminate_dependent_columns(&lib, RANK_TOLERANCE)?;
    println!("{} columns, {} retained", lib.len(), curation.library.len());
    for g in &curation.groups {
        let show = |ix: &[usize]| ix.iter().map(|&k| names[k].clone()).collect::<Vec<_>>().join(", ");
        println!(
            "group [{}]: weak [{}], strong [{}], removed {}",
            show(&g.members),
            show(&g.weak),
            show(&g.strong),
            names[g.removed]
        );
    }
    for e in curation.symbols.entries.iter().filter(|e| !e.equivalences.is_empty()) {
        println!("  {}", e.describe());
    }
    Ok(())
}
