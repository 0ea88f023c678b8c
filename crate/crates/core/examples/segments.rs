//! Splits three overlapping observation squares into segments and reports
//! each UAV's shared coverage degree.

use semcov::geometry::{decompose, shared_coverage_degree, union_area, ObservationSquare};

fn main() -> semcov::Result<()> {
    let squares = [
        ObservationSquare::new(0, (10.0, 10.0), 20.0),
        ObservationSquare::new(1, (22.0, 12.0), 20.0),
        ObservationSquare::new(2, (15.0, 22.0), 20.0),
    ];
    let decomp = decompose(&squares);
    for s in decomp.iter() {
        println!("{:?}: {:.1} m^2", s.members, s.area);
    }
    println!("union: {:.1} m^2", union_area(&decomp));
    for sq in &squares {
        let z = shared_coverage_degree(sq.owner, &decomp, sq.side)?;
        println!("UAV {} shared coverage degree {z:.3}", sq.owner);
    }
    Ok(())
}
