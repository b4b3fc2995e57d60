use crate::error::{Error, Result};

/// Observed exposure, mediators, outcome and covariates for `n` subjects.
///
/// Matrices are stored column-major: mediator `j` is the contiguous slice
/// `m[j * n..(j + 1) * n]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MediationDataset {
    n: usize,
    p: usize,
    q: usize,
    a: Vec<f64>,
    m: Vec<f64>,
    y: Vec<f64>,
    c: Vec<f64>,
}

impl MediationDataset {
    /// `m` and `c` are column-major (`n * p` and `n * q` values).
    pub fn new(a: Vec<f64>, m: Vec<f64>, y: Vec<f64>, c: Vec<f64>, q: usize) -> Result<Self> {
        let n = a.len();
        if n < 2 {
            return Err(Error::InvalidData(format!(
                "need at least 2 subjects, got {n}"
            )));
        }
        if y.len() != n {
            return Err(Error::Dimension(format!(
                "exposure has {n} rows but outcome has {}",
                y.len()
            )));
        }
        if m.is_empty() || !m.len().is_multiple_of(n) {
            return Err(Error::Dimension(format!(
                "mediator matrix has {} values, not a positive multiple of n = {n}",
                m.len()
            )));
        }
        if c.len() != n * q {
            return Err(Error::Dimension(format!(
                "covariate matrix has {} values, expected n * q = {}",
                c.len(),
                n * q
            )));
        }
        let p = m.len() / n;
        let check = |name: &str, v: &[f64]| -> Result<()> {
            match v.iter().position(|x| !x.is_finite()) {
                Some(i) => Err(Error::InvalidData(format!(
                    "{name} has a non-finite value at flat index {i}"
                ))),
                None => Ok(()),
            }
        };
        check("exposure", &a)?;
        check("mediators", &m)?;
        check("outcome", &y)?;
        check("covariates", &c)?;
        for w in 0..q {
            if c[w * n..(w + 1) * n].iter().all(|&x| x == 0.0) {
                return Err(Error::InvalidData(format!(
                    "covariate column {w} is identically zero"
                )));
            }
        }
        Ok(MediationDataset {
            n,
            p,
            q,
            a,
            m,
            y,
            c,
        })
    }

    /// Builds from row-major mediator rows (`n` rows of `p` values).
    pub fn from_rows(
        a: Vec<f64>,
        m_rows: &[Vec<f64>],
        y: Vec<f64>,
        c_rows: Option<&[Vec<f64>]>,
    ) -> Result<Self> {
        let n = m_rows.len();
        let p = m_rows.first().map_or(0, |r| r.len());
        if m_rows.iter().any(|r| r.len() != p) {
            return Err(Error::Dimension("ragged mediator rows".into()));
        }
        let mut m = vec![0.0; n * p];
        for (i, row) in m_rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                m[j * n + i] = v;
            }
        }
        let (c, q) = match c_rows {
            Some(rows) if !rows.is_empty() => {
                let q = rows[0].len();
                if rows.len() != n || rows.iter().any(|r| r.len() != q) {
                    return Err(Error::Dimension("covariate rows do not match".into()));
                }
                let mut c = vec![0.0; n * q];
                for (i, row) in rows.iter().enumerate() {
                    for (w, &v) in row.iter().enumerate() {
                        c[w * n + i] = v;
                    }
                }
                (c, q)
            }
            _ => (Vec::new(), 0),
        };
        Self::new(a, m, y, c, q)
    }

    /// Every variable shifted to zero sample mean.
    pub fn centered(&self) -> Result<Self> {
        let n = self.n;
        let center = |v: &[f64]| -> Vec<f64> {
            let mut out = Vec::with_capacity(v.len());
            for col in v.chunks(n) {
                let mean = col.iter().sum::<f64>() / n as f64;
                out.extend(col.iter().map(|x| x - mean));
            }
            out
        };
        Self::new(
            center(&self.a),
            center(&self.m),
            center(&self.y),
            center(&self.c),
            self.q,
        )
    }

    /// Centered and scaled to unit sample variance. Constant columns are
    /// rejected.
    pub fn standardized(&self) -> Result<Self> {
        let n = self.n;
        let scale = |name: &str, v: &[f64]| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(v.len());
            for (k, col) in v.chunks(n).enumerate() {
                let mean = col.iter().sum::<f64>() / n as f64;
                let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
                if var <= 0.0 {
                    return Err(Error::InvalidData(format!("{name} column {k} is constant")));
                }
                let sd = var.sqrt();
                out.extend(col.iter().map(|x| (x - mean) / sd));
            }
            Ok(out)
        };
        Self::new(
            scale("exposure", &self.a)?,
            scale("mediator", &self.m)?,
            scale("outcome", &self.y)?,
            scale("covariate", &self.c)?,
            self.q,
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn exposure(&self) -> &[f64] {
        &self.a
    }

    pub fn outcome(&self) -> &[f64] {
        &self.y
    }

    #[inline]
    pub fn mediator(&self, j: usize) -> &[f64] {
        &self.m[j * self.n..(j + 1) * self.n]
    }

    pub fn mediators_col_major(&self) -> &[f64] {
        &self.m
    }

    #[inline]
    pub fn covariate(&self, w: usize) -> &[f64] {
        &self.c[w * self.n..(w + 1) * self.n]
    }

    pub fn covariates_col_major(&self) -> &[f64] {
        &self.c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(MediationDataset::new(vec![1.0], vec![1.0], vec![1.0], vec![], 0).is_err());
        assert!(MediationDataset::new(
            vec![1.0, 2.0],
            vec![1.0, 2.0, 3.0],
            vec![1.0, 2.0],
            vec![],
            0
        )
        .is_err());
        assert!(MediationDataset::new(
            vec![1.0, 2.0],
            vec![1.0, f64::NAN],
            vec![1.0, 2.0],
            vec![],
            0
        )
        .is_err());
        assert!(MediationDataset::new(
            vec![1.0, 2.0],
            vec![1.0, 2.0],
            vec![1.0, 2.0],
            vec![0.0, 0.0],
            1
        )
        .is_err());
        let ok = MediationDataset::new(
            vec![1.0, 2.0],
            vec![1.0, 2.0, 3.0, 4.0],
            vec![1.0, 2.0],
            vec![],
            0,
        )
        .unwrap();
        assert_eq!((ok.n(), ok.p(), ok.q()), (2, 2, 0));
        assert_eq!(ok.mediator(1), &[3.0, 4.0]);
    }

    #[test]
    fn centering_zeroes_means() {
        let d = MediationDataset::from_rows(
            vec![1.0, 2.0, 6.0],
            &[vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 8.0]],
            vec![0.0, 1.0, 5.0],
            None,
        )
        .unwrap()
        .centered()
        .unwrap();
        assert!(d.exposure().iter().sum::<f64>().abs() < 1e-12);
        assert!(d.mediator(1).iter().sum::<f64>().abs() < 1e-12);
        assert!(d.outcome().iter().sum::<f64>().abs() < 1e-12);
    }
}
