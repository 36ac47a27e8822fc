//! Exact coefficients c_{p,n} of the short-time moment series, by recursion and
//! by iterating the Langevin operator, plus the factorial growth fit.

use complex_langevin::moments::{growth_fit, SeriesTable};

fn main() -> complex_langevin::Result<()> {
    let rec = SeriesTable::via_recursion(12, 40)?;
    let op = SeriesTable::via_operator(12, 40)?;
    println!("recursion and operator tables identical: {}", rec == op);
    for (n, c) in rec.row(2).take(6) {
        println!("c[2,{n:2}] = {c}");
    }
    let big = SeriesTable::via_recursion(4, 400)?;
    for p in [2, 4] {
        let fit = growth_fit(p, &big)?;
        println!("p={p}: alpha_p = {:.4}, beta_p = {:.4} over {} points", fit.alpha_p, fit.beta_p, fit.points);
    }
    Ok(())
}
