use serde::Serialize;

use crate::model::{EventKind, StateSpaces, UnitHistory};
use crate::simulate::Cohort;

/// `n` equally spaced points on `[0, horizon]`.
pub fn mesh(horizon: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..n).map(|k| horizon * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Default mesh: 61 points on `[0, 3]`.
pub fn default_mesh() -> Vec<f64> {
    mesh(3.0, 61)
}

/// Element-wise mean over cohorts of per-cohort Pearson correlation matrices
/// of the state vector `Z(s)`. Undefined entries (a constant column, fewer
/// than two units under observation) are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationCurves {
    pub labels: Vec<String>,
    pub mesh: Vec<f64>,
    /// `values[k][a][b]` at `mesh[k]`.
    pub values: Vec<Vec<Vec<Option<f64>>>>,
}

impl CorrelationCurves {
    pub fn get(&self, k: usize, a: &str, b: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        self.values[k][i][j]
    }
}

/// Labels of `Z(s)`: indicators of every transient health state but the last,
/// indicators of every marker state but the first, then the recurrent counts.
pub fn z_labels(spaces: &StateSpaces) -> Vec<String> {
    let tr = spaces.transient();
    let mut out: Vec<String> = tr[..tr.len() - 1].iter().map(|&v| format!("V={}", spaces.hs_labels()[v])).collect();
    out.extend(spaces.lm_labels()[1..].iter().map(|w| format!("W={w}")));
    out.extend((1..=spaces.q()).map(|q| format!("N{q}")));
    out
}

/// `Z(s)` of a unit, with states and counts taken right-continuously.
pub fn z_vector(spaces: &StateSpaces, u: &UnitHistory, s: f64) -> Vec<f64> {
    let (lm, hs) = u.states_at(s);
    let tr = spaces.transient();
    let mut z: Vec<f64> = tr[..tr.len() - 1].iter().map(|&v| (hs == v) as u8 as f64).collect();
    z.extend((1..spaces.n_lm()).map(|w| (lm == w) as u8 as f64));
    let mut n = vec![0.0; spaces.q()];
    for e in u.events.iter().take_while(|e| e.time <= s) {
        if let EventKind::Rcr(q) = e.kind {
            n[q] += 1.0;
        }
    }
    z.extend(n);
    z
}

/// Pearson correlation matrix of the columns of `rows`.
pub fn pearson(rows: &[Vec<f64>], dim: usize) -> Vec<Vec<Option<f64>>> {
    let n = rows.len();
    let mut out = vec![vec![None; dim]; dim];
    if n < 2 {
        return out;
    }
    let mean: Vec<f64> = (0..dim).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let mut c = vec![vec![0.0; dim]; dim];
    for r in rows {
        for a in 0..dim {
            for b in 0..dim {
                c[a][b] += (r[a] - mean[a]) * (r[b] - mean[b]);
            }
        }
    }
    for a in 0..dim {
        for b in 0..dim {
            if c[a][a] > 0.0 && c[b][b] > 0.0 {
                out[a][b] = Some(if a == b { 1.0 } else { c[a][b] / (c[a][a] * c[b][b]).sqrt() });
            }
        }
    }
    out
}

/// Correlation trajectories over `mesh`. At each time only units still under
/// observation (`tau* >= s`) enter.
pub fn correlation_trajectories(cohorts: &[Cohort], spaces: &StateSpaces, mesh: &[f64]) -> CorrelationCurves {
    let labels = z_labels(spaces);
    let dim = labels.len();
    let values = mesh
        .iter()
        .map(|&s| {
            let mut sum = vec![vec![0.0; dim]; dim];
            let mut cnt = vec![vec![0usize; dim]; dim];
            for c in cohorts {
                let rows: Vec<Vec<f64>> =
                    c.units.iter().filter(|u| u.end_time >= s).map(|u| z_vector(spaces, u, s)).collect();
                for (a, row) in pearson(&rows, dim).into_iter().enumerate() {
                    for (b, v) in row.into_iter().enumerate() {
                        if let Some(v) = v {
                            sum[a][b] += v;
                            cnt[a][b] += 1;
                        }
                    }
                }
            }
            (0..dim)
                .map(|a| (0..dim).map(|b| (cnt[a][b] > 0).then(|| sum[a][b] / cnt[a][b] as f64)).collect())
                .collect()
        })
        .collect();
    CorrelationCurves { labels, mesh: mesh.to_vec(), values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EndReason, Event};

    fn unit(x: u32, end: f64) -> UnitHistory {
        UnitHistory {
            covariates: vec![],
            initial_lm: 0,
            initial_hs: 1,
            events: (0..x).map(|k| Event { time: 0.1 * (k + 1) as f64, kind: EventKind::Rcr(0) }).collect(),
            end_time: end,
            end_reason: EndReason::Censored,
        }
    }

    #[test]
    fn mesh_endpoints() {
        let m = default_mesh();
        assert_eq!(m.len(), 61);
        assert_eq!(m[0], 0.0);
        assert_eq!(m[60], 3.0);
        assert!((m[1] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn labels_of_illustration_spaces() {
        let sp = StateSpaces::numbered(3, 3, &[0], 3).unwrap();
        assert_eq!(z_labels(&sp), vec!["V=2", "W=2", "W=3", "N1", "N2", "N3"]);
    }

    #[test]
    fn constant_columns_are_undefined() {
        let sp = StateSpaces::numbered(3, 3, &[0], 3).unwrap();
        let c = Cohort::new(vec![unit(1, 1.0), unit(3, 1.0), unit(2, 1.0)]);
        let cc = correlation_trajectories(&[c], &sp, &[0.0, 0.5]);
        assert_eq!(cc.get(0, "N1", "N1"), None);
        assert_eq!(cc.get(1, "N1", "N1"), Some(1.0));
        assert_eq!(cc.get(1, "N1", "N2"), None);
        assert_eq!(cc.get(1, "V=2", "N1"), None);
    }

    #[test]
    fn pearson_known_value() {
        let rows = vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 5.0]];
        let r = pearson(&rows, 2);
        let expect = 3.0 / (2.0f64 * (14.0 / 3.0)).sqrt();
        assert!((r[0][1].unwrap() - expect).abs() < 1e-12);
        assert_eq!(r[0][1], r[1][0]);
    }
}
