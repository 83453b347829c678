use std::io::{self, Write};

use crate::geometry::RigidPose;

/// One sampled controller step. Poses serialize as x, y, z, qw, qx, qy, qz.
#[derive(Debug, Clone)]
pub struct TrajectoryRow {
    pub time: f64,
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    pub tau: Vec<f64>,
    pub ee: RigidPose,
    pub target: RigidPose,
    pub err_trans: f64,
    pub err_rot: f64,
}

/// Column schema (stable): time, q0..q{n-1}, qd0..qd{n-1}, tau0..tau{n-1},
/// ee_x, ee_y, ee_z, ee_qw, ee_qx, ee_qy, ee_qz, tg_x, tg_y, tg_z, tg_qw,
/// tg_qx, tg_qy, tg_qz, err_trans, err_rot. Floats print with Rust's
/// shortest round-trip formatting, so identical runs give identical bytes.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryLog {
    n_joints: usize,
    pub rows: Vec<TrajectoryRow>,
}

impl TrajectoryLog {
    pub fn new(n_joints: usize) -> Self {
        Self { n_joints, rows: Vec::new() }
    }

    pub fn push(&mut self, row: TrajectoryRow) {
        debug_assert_eq!(row.q.len(), self.n_joints);
        self.rows.push(row);
    }

    pub fn n_joints(&self) -> usize {
        self.n_joints
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        let mut header = vec!["time".to_string()];
        for prefix in ["q", "qd", "tau"] {
            for i in 0..self.n_joints {
                header.push(format!("{prefix}{i}"));
            }
        }
        for prefix in ["ee", "tg"] {
            for suffix in ["x", "y", "z", "qw", "qx", "qy", "qz"] {
                header.push(format!("{prefix}_{suffix}"));
            }
        }
        header.push("err_trans".to_string());
        header.push("err_rot".to_string());
        writeln!(w, "{}", header.join(","))?;
        for row in &self.rows {
            let mut cells = vec![row.time.to_string()];
            cells.extend(row.q.iter().map(f64::to_string));
            cells.extend(row.qdot.iter().map(f64::to_string));
            cells.extend(row.tau.iter().map(f64::to_string));
            for pose in [&row.ee, &row.target] {
                let t = pose.translation();
                let q = pose.rotation();
                for v in [t.x, t.y, t.z, q.w, q.i, q.j, q.k] {
                    cells.push(v.to_string());
                }
            }
            cells.push(row.err_trans.to_string());
            cells.push(row.err_rot.to_string());
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{UnitQuaternion, Vector3};

    #[test]
    fn csv_round_trips_values_exactly() {
        let mut log = TrajectoryLog::new(2);
        log.push(TrajectoryRow {
            time: 0.001,
            q: vec![0.1, -0.77215],
            qdot: vec![1.5e-9, 2.0],
            tau: vec![-3.25, 0.0],
            ee: RigidPose::new(
                UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3),
                Vector3::new(0.4, 0.5, 0.6),
            ),
            target: RigidPose::identity(),
            err_trans: 0.025,
            err_rot: 1e-3,
        });
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        let cells: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(header.len(), 1 + 3 * 2 + 14 + 2);
        assert_eq!(header.len(), cells.len());
        assert_eq!(header[0], "time");
        assert_eq!(header[1], "q0");
        // Shortest round-trip formatting parses back to the same bits.
        assert_eq!(cells[2].parse::<f64>().unwrap(), -0.77215);
        assert_eq!(cells[3].parse::<f64>().unwrap(), 1.5e-9);
        let reprinted = {
            let mut b = Vec::new();
            log.write_csv(&mut b).unwrap();
            String::from_utf8(b).unwrap()
        };
        assert_eq!(text, reprinted);
    }
}
