use std::io::{BufWriter, Write};

use crate::error::Result;
use crate::planner::FingerTrajectory;
use crate::scalar::{to_f64, Real};

/// One row per waypoint: `finger_id,waypoint_index,x,y,z`.
pub fn write_trajectory_csv<T: Real, W: Write>(trajectories: &[&FingerTrajectory<T>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["finger_id", "waypoint_index", "x", "y", "z"])?;
    for t in trajectories {
        for (i, p) in t.waypoints.iter().enumerate() {
            w.write_record([t.finger_id.to_string(), i.to_string(), to_f64(p.x).to_string(), to_f64(p.y).to_string(), to_f64(p.z).to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// ASCII PLY polyline: every waypoint is a vertex tagged with its finger,
/// consecutive waypoints of a trajectory are joined by an edge.
pub fn write_trajectory_ply<T: Real, W: Write>(trajectories: &[&FingerTrajectory<T>], out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    let vertices: usize = trajectories.iter().map(|t| t.waypoints.len()).sum();
    let edges: usize = trajectories.iter().map(|t| t.waypoints.len().saturating_sub(1)).sum();
    writeln!(w, "ply\nformat ascii 1.0\ncomment graspkit fingertip trajectories\nelement vertex {vertices}")?;
    writeln!(w, "property double x\nproperty double y\nproperty double z\nproperty int finger_id")?;
    writeln!(w, "element edge {edges}\nproperty int vertex1\nproperty int vertex2\nend_header")?;
    for t in trajectories {
        for p in &t.waypoints {
            writeln!(w, "{} {} {} {}", to_f64(p.x), to_f64(p.y), to_f64(p.z), t.finger_id)?;
        }
    }
    let mut base = 0;
    for t in trajectories {
        for i in 1..t.waypoints.len() {
            writeln!(w, "{} {}", base + i - 1, base + i)?;
        }
        base += t.waypoints.len();
    }
    w.flush()?;
    Ok(())
}
