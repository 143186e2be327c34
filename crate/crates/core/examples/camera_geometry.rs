//! Pinhole unprojection, projection and BEV cell lookup.

use rgbdkit::geometry::{bev_cell_of, project, unproject, BEVGridSpec};
use rgbdkit::model::CameraIntrinsics;

fn main() -> rgbdkit::Result<()> {
    let k = CameraIntrinsics::new(212.0, 212.0, 128.0, 96.0, 256, 192)?;
    let grid = BEVGridSpec::new([-4.0, 4.0], [0.0, 8.0], 0.25)?;
    println!("grid {} x {} cells of {} m", grid.rows(), grid.cols(), grid.cell());

    for (u, v, d) in [(128.0, 96.0, 2.0), (0.0, 0.0, 1.5), (255.0, 150.0, 6.0)] {
        let p = unproject((u, v), d, &k)?;
        let back = project(&p, &k)?;
        println!(
            "pixel ({u}, {v}) at {d} m -> ({:.3}, {:.3}, {:.3}) -> ({:.3}, {:.3}), cell {:?}",
            p.x,
            p.y,
            p.z,
            back.0,
            back.1,
            bev_cell_of(&p, &grid)
        );
    }

    // intrinsics follow a feature map at a quarter of the resolution
    let q = k.scaled_to(64, 48)?;
    println!("quarter resolution: fx={} cx={}", q.fx(), q.cx());
    Ok(())
}
