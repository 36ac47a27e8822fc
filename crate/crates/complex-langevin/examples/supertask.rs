//! The moment series seen as a supertask chain f_n(s): values, leading terms,
//! and the chain relation checked internally.

use complex_langevin::moments::{supertask_map, SeriesTable, SupertaskMap};

fn main() -> complex_langevin::Result<()> {
    let alpha = 0.5;
    let table = SeriesTable::via_recursion(10, 40)?;
    let map = SupertaskMap::new(alpha)?;
    for &t in &[1e-3, 1e-2, 0.05] {
        let s = (4.0 * alpha).sqrt() * t;
        for n in 1..=5 {
            let f = supertask_map(2 * n, t, alpha, &table)?;
            println!("t={t:<6} n={n}  f_n = {f:.6e}  leading = {:.6e}", map.leading_term(n, s));
        }
    }
    Ok(())
}
