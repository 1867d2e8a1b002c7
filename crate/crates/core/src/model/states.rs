use crate::error::{Error, Result};

/// Dummy coding of `state` against every element of `space` except the first.
///
/// The first element maps to the zero vector.
pub fn iota<T: PartialEq + std::fmt::Debug>(space: &[T], state: &T) -> Result<Vec<f64>> {
    let pos = space
        .iter()
        .position(|s| s == state)
        .ok_or_else(|| Error::Domain(format!("state {state:?} not in space {space:?}")))?;
    Ok(dummy(space.len(), pos))
}

/// Index-based form of [`iota`]: indicator of position `pos` among `len`
/// ordered elements, first element dropped.
pub(crate) fn dummy(len: usize, pos: usize) -> Vec<f64> {
    let mut out = vec![0.0; len.saturating_sub(1)];
    if pos > 0 {
        out[pos - 1] = 1.0;
    }
    out
}

/// Ordered state spaces of the marker (LM) and health-status (HS) processes
/// together with the number of recurrent event types.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaces {
    lm: Vec<String>,
    hs: Vec<String>,
    absorbing: Vec<bool>,
    transient: Vec<usize>,
    q: usize,
}

impl StateSpaces {
    /// `absorbing[v]` flags the HS states that are absorbing.
    pub fn new(lm: Vec<String>, hs: Vec<String>, absorbing: Vec<bool>, q: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::Config("at least one recurrent event type is required".into()));
        }
        if lm.len() < 2 {
            return Err(Error::Config("marker state space needs at least two states".into()));
        }
        if hs.len() != absorbing.len() {
            return Err(Error::Config("absorbing flags must match the HS states".into()));
        }
        if !absorbing.iter().any(|&a| a) {
            return Err(Error::Config("at least one absorbing HS state is required".into()));
        }
        let transient: Vec<usize> = (0..hs.len()).filter(|&v| !absorbing[v]).collect();
        if transient.is_empty() {
            return Err(Error::Config("at least one transient HS state is required".into()));
        }
        for (name, labels) in [("LM", &lm), ("HS", &hs)] {
            for (i, a) in labels.iter().enumerate() {
                if a.is_empty() || a.chars().any(char::is_whitespace) {
                    return Err(Error::Config(format!("{name} label {a:?} must be a non-empty token")));
                }
                if labels[..i].contains(a) {
                    return Err(Error::Config(format!("duplicate {name} state {a}")));
                }
            }
        }
        Ok(Self { lm, hs, absorbing, transient, q })
    }

    /// Convenience constructor with labels "1", "2", ...
    pub fn numbered(n_lm: usize, n_hs: usize, absorbing: &[usize], q: usize) -> Result<Self> {
        let lm = (1..=n_lm).map(|i| i.to_string()).collect();
        let hs = (1..=n_hs).map(|i| i.to_string()).collect();
        let mut flags = vec![false; n_hs];
        for &a in absorbing {
            if a >= n_hs {
                return Err(Error::Config(format!("absorbing index {a} out of range")));
            }
            flags[a] = true;
        }
        Self::new(lm, hs, flags, q)
    }

    pub fn q(&self) -> usize {
        self.q
    }
    pub fn n_lm(&self) -> usize {
        self.lm.len()
    }
    pub fn n_hs(&self) -> usize {
        self.hs.len()
    }
    pub fn lm_labels(&self) -> &[String] {
        &self.lm
    }
    pub fn hs_labels(&self) -> &[String] {
        &self.hs
    }
    pub fn is_absorbing(&self, v: usize) -> bool {
        self.absorbing[v]
    }
    pub fn absorbing_flags(&self) -> &[bool] {
        &self.absorbing
    }
    /// Transient HS states, in declared order.
    pub fn transient(&self) -> &[usize] {
        &self.transient
    }
    pub fn lm_index(&self, label: &str) -> Option<usize> {
        self.lm.iter().position(|l| l == label)
    }
    pub fn hs_index(&self, label: &str) -> Option<usize> {
        self.hs.iter().position(|l| l == label)
    }

    /// Ordered pairs `(w1, w2)`, `w1 != w2`.
    pub fn lm_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.n_lm();
        (0..n).flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b))).collect()
    }

    /// Pairs `(v1, v)` with `v1` transient and `v != v1`.
    pub fn hs_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.n_hs();
        self.transient.iter().flat_map(|&a| (0..n).filter(move |&b| b != a).map(move |b| (a, b))).collect()
    }

    /// Width of the marker dummy block.
    pub fn lm_dummy_len(&self) -> usize {
        self.n_lm() - 1
    }
    /// Width of the health-status dummy block (coded over transient states).
    pub fn hs_dummy_len(&self) -> usize {
        self.transient.len() - 1
    }

    pub fn lm_dummy(&self, w: usize) -> Result<Vec<f64>> {
        if w >= self.n_lm() {
            return Err(Error::Domain(format!("LM state index {w} out of range")));
        }
        Ok(dummy(self.n_lm(), w))
    }

    /// Dummy coding of a transient HS state against the ordered transient set.
    pub fn hs_dummy(&self, v: usize) -> Result<Vec<f64>> {
        let pos = self
            .transient
            .iter()
            .position(|&t| t == v)
            .ok_or_else(|| Error::Domain(format!("HS state index {v} is not transient")))?;
        Ok(dummy(self.transient.len(), pos))
    }

    pub fn dim_theta_r(&self, p: usize) -> usize {
        p + self.hs_dummy_len() + self.lm_dummy_len()
    }
    pub fn dim_theta_w(&self, p: usize) -> usize {
        p + self.hs_dummy_len() + self.q
    }
    pub fn dim_theta_v(&self, p: usize) -> usize {
        p + self.lm_dummy_len() + self.q
    }

    /// Coordinate names of `theta^R`, `theta^W` and `theta^V`, e.g. `beta_R1`,
    /// `gamma_W1`, `nu_V3`.
    pub fn theta_names(&self, p: usize) -> [Vec<String>; 3] {
        fn block(sym: &str, comp: &str, n: usize) -> impl Iterator<Item = String> {
            let tag = format!("{sym}_{comp}");
            (1..=n).map(move |k| format!("{tag}{k}"))
        }
        let (nv, nw, q) = (self.hs_dummy_len(), self.lm_dummy_len(), self.q);
        [
            block("beta", "R", p).chain(block("gamma", "R", nv)).chain(block("kappa", "R", nw)).collect(),
            block("beta", "W", p).chain(block("gamma", "W", nv)).chain(block("nu", "W", q)).collect(),
            block("beta", "V", p).chain(block("kappa", "V", nw)).chain(block("nu", "V", q)).collect(),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iota_examples() {
        let space = [1, 2, 3];
        assert_eq!(iota(&space, &1).unwrap(), vec![0.0, 0.0]);
        assert_eq!(iota(&space, &2).unwrap(), vec![1.0, 0.0]);
        assert_eq!(iota(&space, &3).unwrap(), vec![0.0, 1.0]);
        assert!(iota(&space, &4).is_err());
    }

    #[test]
    fn index_set_sizes() {
        let s = StateSpaces::numbered(3, 3, &[0], 3).unwrap();
        assert_eq!(s.lm_pairs().len(), 3 * 2);
        // |V1||V| - |V1|
        assert_eq!(s.hs_pairs().len(), 2 * 3 - 2);
        assert_eq!(s.dim_theta_r(2), 5);
        assert_eq!(s.dim_theta_w(2), 6);
        assert_eq!(s.dim_theta_v(2), 7);
    }

    #[test]
    fn rejects_degenerate_spaces() {
        assert!(StateSpaces::numbered(3, 3, &[0], 0).is_err());
        assert!(StateSpaces::numbered(1, 3, &[0], 1).is_err());
        assert!(StateSpaces::numbered(3, 3, &[], 1).is_err());
        assert!(StateSpaces::numbered(3, 1, &[0], 1).is_err());
    }
}
