//! Inverse and direct systems of finite-dimensional `Q`-vector spaces,
//! finitely presented as a prefix of maps plus a periodic square tail.
//!
//! For the periodic tail `T`, the limit of the inverse system is the
//! eventual image `im T^dim` (where `T` restricts to an isomorphism), and
//! the colimit of the direct system is the eventual coimage `V / ker T^dim`.
//! Derived limits vanish with an explicit stabilization index as the
//! certificate.

use crate::qlin::{QMatrix, QVec};
use crate::report::Report;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TowerError {
    #[error("dimension chain broken at prefix map {0}")]
    DimMismatch(usize),
}

/// An inverse system `W_1 <- W_2 <- ... <- W_n <- W_n <- ...` with prefix
/// maps `i_j : W_{j+1} -> W_j` and the square tail repeating from index `n`.
#[derive(Clone, Debug)]
pub struct QTower {
    pub prefix: Vec<QMatrix>,
    pub tail: QMatrix,
}

/// A direct system `V_1 -> V_2 -> ...` with a periodic square tail.
#[derive(Clone, Debug)]
pub struct DirectQTower {
    pub prefix: Vec<QMatrix>,
    pub tail: QMatrix,
}

impl QTower {
    pub fn tail_only(t: QMatrix) -> Self {
        assert_eq!(t.rows, t.cols);
        QTower {
            prefix: Vec::new(),
            tail: t,
        }
    }

    pub fn check_dims(&self) -> Result<(), TowerError> {
        if self.tail.rows != self.tail.cols {
            return Err(TowerError::DimMismatch(self.prefix.len()));
        }
        for (k, w) in self.prefix.windows(2).enumerate() {
            if w[0].cols != w[1].rows {
                return Err(TowerError::DimMismatch(k));
            }
        }
        if let Some(last) = self.prefix.last() {
            if last.cols != self.tail.rows {
                return Err(TowerError::DimMismatch(self.prefix.len() - 1));
            }
        }
        Ok(())
    }
}

/// The limit of an inverse tower: intrinsic dimension (the eventual image of
/// the tail) plus the representation at index 1 (coherent sequences
/// evaluated at their first coordinate).
pub struct LimResult {
    pub dim: usize,
    /// Basis of the eventual image inside the tail space.
    pub tail_basis: Vec<QVec>,
    /// The same vectors pushed to `W_1` through the prefix.
    pub basis_at_1: Vec<QVec>,
    /// Dimension of the span of `basis_at_1` (evaluation may collapse).
    pub dim_at_1: usize,
}

pub fn lim(t: &QTower) -> Result<LimResult, TowerError> {
    t.check_dims()?;
    let d = t.tail.rows;
    let eventual = t.tail.pow(d);
    let tail_basis = eventual.image();
    let to_first = t
        .prefix
        .iter()
        .fold(None::<QMatrix>, |acc, m| {
            Some(match acc {
                None => m.clone(),
                Some(a) => a.mul(m),
            })
        });
    let basis_at_1: Vec<QVec> = tail_basis
        .iter()
        .map(|v| match &to_first {
            None => v.clone(),
            Some(p) => p.apply(v),
        })
        .collect();
    let w1_dim = t.prefix.first().map_or(d, |m| m.rows);
    let dim_at_1 = QMatrix::span_dim(&basis_at_1, w1_dim);
    Ok(LimResult {
        dim: tail_basis.len(),
        tail_basis,
        basis_at_1,
        dim_at_1,
    })
}

/// The derived limit of a finite-dimensional tower is zero; the certificate
/// is the index at which every image filtration stabilizes.
pub struct Lim1Result {
    pub dim: usize,
    pub certificate_index: usize,
}

pub fn lim1(t: &QTower) -> Result<Lim1Result, TowerError> {
    t.check_dims()?;
    // Tail stabilization: smallest k >= 1 with rank T^k = rank T^{k+1}.
    let mut k = 1;
    let mut pw = t.tail.clone();
    loop {
        let next = pw.mul(&t.tail);
        if pw.rank() == next.rank() {
            break;
        }
        pw = next;
        k += 1;
    }
    let mut cert = k;
    // Prefix chains: for each j, the images im(i_j i_{j+1} ... ) stabilize.
    for j in 0..t.prefix.len() {
        let mut comp = t.prefix[j].clone();
        let mut steps = 1;
        let mut rank = comp.rank();
        for m in &t.prefix[j + 1..] {
            comp = comp.mul(m);
            steps += 1;
            let r = comp.rank();
            if r == rank {
                break;
            }
            rank = r;
        }
        loop {
            let next = comp.mul(&t.tail);
            let r = next.rank();
            if r == rank {
                break;
            }
            comp = next;
            rank = r;
            steps += 1;
        }
        cert = cert.max(steps);
    }
    Ok(Lim1Result {
        dim: 0,
        certificate_index: cert,
    })
}

/// The dual inverse tower of a direct tower: transposed maps, one per index.
pub fn dualize(d: &DirectQTower) -> QTower {
    QTower {
        prefix: d.prefix.iter().map(QMatrix::transpose).collect(),
        tail: d.tail.transpose(),
    }
}

/// Colimit dimension: the eventual coimage of the tail (everything
/// eventually killed is identified away; prefix spaces map cofinally into
/// the tail).
pub fn colim(d: &DirectQTower) -> usize {
    let n = d.tail.rows;
    d.tail.pow(n).rank()
}

/// The duality report: `dim lim(dual) = dim colim` and `lim1(dual) = 0`
/// with a bounded certificate.
pub fn check_dual_iso(d: &DirectQTower) -> Report {
    let mut rep = Report::new();
    let dual = dualize(d);
    match (lim(&dual), lim1(&dual)) {
        (Ok(l), Ok(l1)) => {
            let c = colim(d);
            rep.check(
                "lim-dual-equals-colim",
                (l.dim != c).then(|| format!("lim* = {} vs colim = {}", l.dim, c)),
            );
            rep.check("lim1-dual-vanishes", (l1.dim != 0).then(|| format!("{}", l1.dim)));
            let bound = d.tail.rows + d.prefix.len();
            rep.check(
                "certificate-bounded",
                (l1.certificate_index > bound.max(1)).then(|| {
                    format!("index {} exceeds {}", l1.certificate_index, bound.max(1))
                }),
            );
        }
        (Err(e), _) | (_, Err(e)) => rep.fail("tower-dims", e.to_string()),
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::gen_tail;
    use crate::qlin::rat_int;

    fn nilpotent2() -> QMatrix {
        QMatrix::from_i64(&[&[0, 0], &[1, 0]])
    }

    fn projector2() -> QMatrix {
        QMatrix::from_i64(&[&[1, 0], &[0, 0]])
    }

    #[test]
    fn named_tail_fixtures() {
        assert_eq!(lim(&QTower::tail_only(QMatrix::identity(2))).unwrap().dim, 2);
        assert_eq!(lim(&QTower::tail_only(nilpotent2())).unwrap().dim, 0);
        assert_eq!(lim(&QTower::tail_only(projector2())).unwrap().dim, 1);
    }

    #[test]
    fn lim1_certificates() {
        assert_eq!(
            lim1(&QTower::tail_only(QMatrix::identity(2)))
                .unwrap()
                .certificate_index,
            1
        );
        // Nilpotent of index 2 stabilizes at 2.
        assert_eq!(
            lim1(&QTower::tail_only(nilpotent2()))
                .unwrap()
                .certificate_index,
            2
        );
    }

    #[test]
    fn colim_of_identity_and_nilpotent() {
        assert_eq!(colim(&DirectQTower { prefix: vec![], tail: QMatrix::identity(3) }), 3);
        assert_eq!(colim(&DirectQTower { prefix: vec![], tail: nilpotent2() }), 0);
    }

    #[test]
    fn transpose_is_involution() {
        let t = gen_tail(7, 4);
        assert_eq!(t.transpose().transpose(), t);
    }

    #[test]
    fn dual_iso_on_fixtures_and_random_tails() {
        for t in [QMatrix::identity(3), nilpotent2(), projector2()] {
            let d = DirectQTower { prefix: vec![], tail: t };
            let rep = check_dual_iso(&d);
            assert!(rep.passed(), "{:?}", rep.first_failure());
        }
        for seed in 0..100 {
            let d = DirectQTower {
                prefix: vec![],
                tail: gen_tail(seed, 4),
            };
            let rep = check_dual_iso(&d);
            assert!(rep.passed(), "seed {seed}: {:?}", rep.first_failure());
        }
    }

    #[test]
    fn prefix_towers() {
        // W_1 = Q^1 <- W_2 = Q^2 by summing, tail = projector on Q^2.
        let t = QTower {
            prefix: vec![QMatrix::from_i64(&[&[1, 1]])],
            tail: projector2(),
        };
        let l = lim(&t).unwrap();
        assert_eq!(l.dim, 1);
        assert_eq!(l.basis_at_1.len(), 1);
        assert_eq!(l.basis_at_1[0], QVec(vec![rat_int(1)]));
        assert_eq!(l.dim_at_1, 1);
        let l1 = lim1(&t).unwrap();
        assert_eq!(l1.dim, 0);
        assert!(l1.certificate_index <= 3);
        // Evaluation at index 1 may collapse dimensions without changing
        // the intrinsic limit.
        let t2 = QTower {
            prefix: vec![QMatrix::zeros(1, 2)],
            tail: QMatrix::identity(2),
        };
        let l2 = lim(&t2).unwrap();
        assert_eq!(l2.dim, 2);
        assert_eq!(l2.dim_at_1, 0);
    }
}
