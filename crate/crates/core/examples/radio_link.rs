//! Path gains, association and per-UAV rates for a hand-picked allocation.

use semcov::radio::{associate_all, rates, sinr, PathGainTable, Position3D, PowerAllocation};

fn main() -> semcov::Result<()> {
    let uavs = [
        Position3D::new(30.0, 50.0, 20.0),
        Position3D::new(70.0, 50.0, 20.0),
    ];
    let stations = [
        Position3D::new(25.0, 50.0, 0.0),
        Position3D::new(75.0, 50.0, 0.0),
    ];
    let gains = PathGainTable::compute(&uavs, &stations, 2.0)?;
    let assoc = associate_all(&gains);
    println!("association: {assoc:?}");

    // UAV 0 spreads over both channels, UAV 1 puts everything on channel 1.
    let alloc = PowerAllocation::new(vec![vec![5.0, 5.0], vec![0.0, 10.0]])?;
    let noise = 1e-9;
    for i in 0..2 {
        for c in 0..2 {
            println!(
                "UAV {i} channel {c}: SINR {:.3e}",
                sinr(i, c, &alloc, &gains, &assoc, noise)
            );
        }
    }
    let r = rates(&alloc, &gains, &assoc, noise);
    println!(
        "rates (bits/s/Hz): {:?}, total {:.3}",
        r.as_slice(),
        r.total()
    );
    Ok(())
}
