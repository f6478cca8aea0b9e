use serde::Serialize;

use crate::error::{Error, Result};

/// Position, velocity and time at which they were recorded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Triplet {
    pub w: f64,
    pub v: f64,
    pub t: f64,
}

/// Piecewise-linear path of every variable, one triplet list per variable.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    lists: Vec<Vec<Triplet>>,
    end_time: f64,
}

impl Trajectory {
    pub fn new(w0: &[f64], v0: &[f64]) -> Self {
        let lists = w0.iter().zip(v0).map(|(&w, &v)| vec![Triplet { w, v, t: 0.0 }]).collect();
        Trajectory { lists, end_time: 0.0 }
    }

    pub(crate) fn push(&mut self, k: usize, triplet: Triplet) {
        debug_assert!(self.lists[k].last().is_none_or(|p| p.t <= triplet.t));
        self.end_time = self.end_time.max(triplet.t);
        self.lists[k].push(triplet);
    }

    /// Keeps only the first and the given triplet for variable `k`.
    pub(crate) fn set_latest(&mut self, k: usize, triplet: Triplet) {
        self.end_time = self.end_time.max(triplet.t);
        let list = &mut self.lists[k];
        list.truncate(1);
        list.push(triplet);
    }

    pub fn dim(&self) -> usize {
        self.lists.len()
    }

    pub fn end_time(&self) -> f64 {
        self.end_time
    }

    pub fn triplets(&self, k: usize) -> &[Triplet] {
        &self.lists[k]
    }

    pub fn num_triplets(&self) -> usize {
        self.lists.iter().map(Vec::len).sum()
    }

    /// Position of variable `k` at time `t` by linear interpolation.
    pub fn position_at(&self, k: usize, t: f64) -> Result<f64> {
        let list = self
            .lists
            .get(k)
            .ok_or_else(|| Error::arg(format!("unknown variable {k}")))?;
        if !(t >= 0.0 && t <= self.end_time) {
            return Err(Error::arg(format!("time {t} outside [0, {}]", self.end_time)));
        }
        let i = list.partition_point(|p| p.t <= t).max(1) - 1;
        let p = list[i];
        Ok(p.w + p.v * (t - p.t))
    }

    /// Final position of every variable.
    pub fn endpoint(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|k| self.position_at(k, self.end_time).expect("end time is in range"))
            .collect()
    }

    /// Positions at `mesh_count` equally spaced times over `[0, end]`, one row per time.
    pub fn discretize(&self, mesh_count: usize) -> Result<Vec<Vec<f64>>> {
        if mesh_count == 0 {
            return Err(Error::arg("mesh count must be at least 1"));
        }
        let step = if mesh_count == 1 { 0.0 } else { self.end_time / (mesh_count - 1) as f64 };
        (0..mesh_count)
            .map(|j| {
                let t = if j + 1 == mesh_count && mesh_count > 1 { self.end_time } else { j as f64 * step };
                (0..self.dim()).map(|k| self.position_at(k, t)).collect()
            })
            .collect()
    }

    /// Delimited dump with columns `variable,time,position,velocity`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("variable,time,position,velocity\n");
        for (k, list) in self.lists.iter().enumerate() {
            for p in list {
                out.push_str(&format!("{k},{},{},{}\n", p.t, p.w, p.v));
            }
        }
        out
    }
}

/// Same as [`Trajectory::discretize`].
pub fn trajectory_discretize(traj: &Trajectory, mesh_count: usize) -> Result<Vec<Vec<f64>>> {
    traj.discretize(mesh_count)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Trajectory {
        let mut tr = Trajectory::new(&[0.0, 1.0], &[1.0, -1.0]);
        tr.push(0, Triplet { w: 0.5, v: -2.0, t: 0.5 });
        tr.push(0, Triplet { w: -1.5, v: 1.0, t: 1.5 });
        tr.push(1, Triplet { w: -1.0, v: -1.0, t: 2.0 });
        tr.push(0, Triplet { w: -1.0, v: 1.0, t: 2.0 });
        tr
    }

    #[test]
    fn interpolation() {
        let tr = sample();
        assert_eq!(tr.position_at(0, 0.5).unwrap(), 0.5);
        assert_eq!(tr.position_at(0, 1.0).unwrap(), -0.5);
        assert_eq!(tr.position_at(0, 0.25).unwrap(), 0.25);
        assert_eq!(tr.position_at(1, 2.0).unwrap(), -1.0);
        assert!(tr.position_at(0, 2.5).is_err());
        assert!(tr.position_at(0, -0.1).is_err());
        assert!(tr.position_at(3, 0.0).is_err());
        assert_eq!(tr.endpoint(), vec![-1.0, -1.0]);
    }

    #[test]
    fn discretization() {
        let tr = sample();
        assert_eq!(tr.discretize(1).unwrap(), vec![vec![0.0, 1.0]]);
        let rows = tr.discretize(5).unwrap();
        assert_eq!(rows.len(), 5);
        assert_eq!(rows[4], vec![-1.0, -1.0]);
        assert!(tr.discretize(0).is_err());
    }

    #[test]
    fn dense_mesh_mean_matches_segment_integrals() {
        let tr = sample();
        // Exact time average of variable 0 over [0, 2] from its three linear pieces.
        let exact = (0.125 + (0.5 + -1.5) / 2.0 + (-1.5 + -1.0) / 2.0 * 0.5) / 2.0;
        let rows = tr.discretize(2_000_001).unwrap();
        // Trapezoid rule on the mesh integrates each piece exactly except at kinks.
        let n = rows.len();
        let trap: f64 = rows.windows(2).map(|w| 0.5 * (w[0][0] + w[1][0])).sum::<f64>() / (n - 1) as f64;
        assert_close!(trap, exact, 1e-6);
    }
}
