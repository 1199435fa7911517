//! Times a single-sector eigensolve and compares the staircase to Weyl.
//!
//! Usage: `sector_timing [count] [spacing] [five|fourth]`

use std::time::Instant;

use chaoseq_core::billiard::{sector_weyl_count, solve_sector, BilliardMesh, Sector, SolveOptions, Stencil};
use chaoseq_core::models::RippleBilliard;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let count: usize = args.get(1).map_or(150, |s| s.parse().unwrap());
    let spacing: f64 = args.get(2).map_or(0.1, |s| s.parse().unwrap());
    let stencil = match args.get(3).map(String::as_str) {
        Some("fourth") => Stencil::FourthOrder,
        _ => Stencil::FivePoint,
    };
    let billiard = RippleBilliard::new(6.0, 15.0).unwrap();
    let mesh = BilliardMesh::new(billiard, spacing).unwrap();
    let opts = SolveOptions { stencil, ..SolveOptions::default() };
    let start = Instant::now();
    let basis = solve_sector(&mesh, Sector::EVEN_EVEN, count, &opts).unwrap();
    println!("dim {} solve {:.1?}", basis.dim(), start.elapsed());
    for k in (count / 10..=count).step_by(count / 10) {
        let e = basis.energies[k - 1];
        let w = sector_weyl_count(&billiard, Sector::EVEN_EVEN, e);
        println!("n {k:5} E {e:9.4} weyl {w:9.2} rel {:+.4}", (k as f64 - w) / w);
    }
}
