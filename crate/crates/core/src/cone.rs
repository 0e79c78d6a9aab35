//! Euclidean projection onto descent cones of weighted ℓ1 norms.
//!
//! For a support `I` (`1 ≤ |I| ≤ d - 1`) and weights `w`, the descent cone
//! `D(I, w)` splits orthogonally into the lineality space
//! `L = {x : x_J = 0, Σ_{i∈I} w_i x_i = 0}` and a cone over a weighted
//! crosspolytope living in `L⊥ = span(e₀′, e_j : j ∈ J)` with
//! `e₀′ = -(1/a) Σ_{i∈I} w_i e_i` and `a = ‖w_I‖₂`. Projection onto the
//! second factor is closed form: sort the off-support coordinates by
//! `|z_j| / w_j`, build a non-decreasing threshold sequence `b`, and read off
//! the face that contains the projection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly positive per-coordinate weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyWeights);
        }
        for (index, &value) in values.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::NonPositiveWeight { index, value });
            }
        }
        Ok(Self(values))
    }

    /// The all-ones vector, i.e. the plain ℓ1 norm.
    pub fn ones(d: usize) -> Self {
        assert!(d > 0, "dimension must be positive");
        Self(vec![1.0; d])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|w| w * c).collect())
    }

    /// `Σ w_i |x_i|`.
    pub fn norm(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(w, x)| w * x.abs()).sum()
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

impl std::ops::Index<usize> for WeightVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Checks that `support` is strictly increasing and inside `0..d`.
pub fn validate_support(support: &[usize], d: usize) -> Result<()> {
    for pair in support.windows(2) {
        if pair[0] >= pair[1] {
            return Err(Error::UnsortedSupport);
        }
    }
    if let Some(&last) = support.last() {
        if last >= d {
            return Err(Error::IndexOutOfRange { index: last, d });
        }
    }
    Ok(())
}

/// The descent cone `D(I, w)` for a proper, non-empty support `I`.
#[derive(Debug, Clone)]
pub struct ConeSpec<'w> {
    weights: &'w [f64],
    support: Vec<usize>,
    complement: Vec<usize>,
    a: f64,
}

impl<'w> ConeSpec<'w> {
    pub fn new(weights: &'w WeightVector, support: &[usize]) -> Result<Self> {
        let d = weights.len();
        validate_support(support, d)?;
        let k = support.len();
        if k == 0 || k == d {
            return Err(Error::DegenerateSupport { k, d });
        }
        let w = weights.as_slice();
        let mut complement = Vec::with_capacity(d - k);
        let mut next = support.iter().peekable();
        for j in 0..d {
            if next.peek() == Some(&&j) {
                next.next();
            } else {
                complement.push(j);
            }
        }
        let a = support.iter().map(|&i| w[i] * w[i]).sum::<f64>().sqrt();
        Ok(Self {
            weights: w,
            support: support.to_vec(),
            complement,
            a,
        })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// `|I|`.
    pub fn k(&self) -> usize {
        self.support.len()
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// `J`, the complement of the support in ascending order.
    pub fn complement(&self) -> &[usize] {
        &self.complement
    }

    pub fn weights(&self) -> &[f64] {
        self.weights
    }

    /// `a = ‖w_I‖₂`.
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Orthonormal basis of `L`, in support-local coordinates (entry `r`
    /// multiplies `e_{I[r]}`). Gram–Schmidt on
    /// `w_{i_{r+1}} e_{i_r} - w_{i_r} e_{i_{r+1}}` in index order.
    pub fn lineality_basis(&self) -> Vec<Vec<f64>> {
        let k = self.k();
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k.saturating_sub(1));
        for r in 0..k.saturating_sub(1) {
            let mut v = vec![0.0; k];
            v[r] = self.weights[self.support[r + 1]];
            v[r + 1] = -self.weights[self.support[r]];
            for q in &basis {
                let proj: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= proj * qi;
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
        basis
    }

    /// `z₀ = -(Σ_{i∈I} w_i z_i) / a` for a canonical vector.
    pub fn apex_coordinate(&self, z: &[f64]) -> f64 {
        -self
            .support
            .iter()
            .map(|&i| self.weights[i] * z[i])
            .sum::<f64>()
            / self.a
    }

    /// Expresses a canonical vector in the `(e₀′, e_J, L)` basis.
    pub fn to_cone_coordinates(&self, z: &[f64]) -> Result<ConeCoordinates> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: z.len(),
            });
        }
        let z0 = self.apex_coordinate(z);
        let zj = self.complement.iter().map(|&j| z[j]).collect();
        let gl = self
            .lineality_basis()
            .iter()
            .map(|q| q.iter().zip(&self.support).map(|(qi, &i)| qi * z[i]).sum())
            .collect();
        Ok(ConeCoordinates {
            z0,
            zj,
            gl: Some(gl),
        })
    }

    /// Euclidean projection of `π_L(z)` where `L` is the lineality space.
    /// Closed form, independent of [`Self::lineality_basis`].
    pub fn lineality_projection(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        let s: f64 = self
            .support
            .iter()
            .map(|&i| self.weights[i] * z[i])
            .sum::<f64>()
            / (self.a * self.a);
        for &i in &self.support {
            out[i] = z[i] - s * self.weights[i];
        }
        out
    }

    /// The directional derivative of `‖·‖₁^w` at a point with support `I`
    /// and positive signs, in direction `x`. The cone is `{x : value ≤ 0}`.
    pub fn descent_functional(&self, x: &[f64]) -> f64 {
        let on: f64 = self.support.iter().map(|&i| self.weights[i] * x[i]).sum();
        let off: f64 = self
            .complement
            .iter()
            .map(|&j| self.weights[j] * x[j].abs())
            .sum();
        on + off
    }

    /// Projects coordinates onto the cone.
    pub fn project(&self, coords: &ConeCoordinates) -> Result<ProjectionWitness> {
        let n = self.complement.len();
        if coords.zj.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: coords.zj.len(),
            });
        }
        if let Some(gl) = &coords.gl {
            if gl.len() != self.k() - 1 {
                return Err(Error::DimensionMismatch {
                    expected: self.k() - 1,
                    got: gl.len(),
                });
            }
        }
        let wj: Vec<f64> = self.complement.iter().map(|&j| self.weights[j]).collect();
        let reduced = reduced_projection(self.a, coords.z0, &coords.zj, &wj);
        let lineality_sq: f64 = coords.gl.iter().flatten().map(|g| g * g).sum();
        let k = self.k();
        let d = self.dim();

        let ordering: Vec<usize> = reduced.order.iter().map(|&p| self.complement[p]).collect();
        let (face_dim, alphas) = match reduced.t {
            Some(t) => {
                let alphas = reduced.order[..reduced.m]
                    .iter()
                    .map(|&p| wj[p] * coords.zj[p].abs() - wj[p] * wj[p] * t)
                    .collect();
                (reduced.m + k - 1, alphas)
            }
            None => (d, Vec::new()),
        };

        let pi = coords.to_canonical(self).map(|z| match reduced.t {
            None => z,
            Some(_) => {
                let mut pi = self.lineality_projection(&z);
                let total: f64 = alphas.iter().sum();
                let apex = total / self.a;
                for &i in &self.support {
                    pi[i] -= apex * self.weights[i] / self.a;
                }
                for (alpha, &p) in alphas.iter().zip(&reduced.order) {
                    let j = self.complement[p];
                    pi[j] += alpha * coords.zj[p].signum() / wj[p];
                }
                pi
            }
        });

        Ok(ProjectionWitness {
            m: reduced.m,
            face_dim,
            t: reduced.t,
            alphas,
            pi,
            sq_norm: reduced.sq_norm + lineality_sq,
            ordering,
        })
    }

    /// Thresholds `b_0 ≤ … ≤ b_{d-k}` for the given coordinates.
    pub fn thresholds(&self, coords: &ConeCoordinates) -> Vec<f64> {
        let wj: Vec<f64> = self.complement.iter().map(|&j| self.weights[j]).collect();
        let absz: Vec<f64> = coords.zj.iter().map(|z| z.abs()).collect();
        let order = sorted_order(&absz, &wj);
        thresholds_sorted(self.a, &order, &absz, &wj)
    }
}

/// Coordinates of a vector in the orthonormal basis `(e₀′, e_j for j ∈ J, q_1..q_{k-1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeCoordinates {
    pub z0: f64,
    /// Indexed like [`ConeSpec::complement`].
    pub zj: Vec<f64>,
    /// Lineality coefficients; `None` for dimension-only queries.
    pub gl: Option<Vec<f64>>,
}

impl ConeCoordinates {
    /// Euclidean norm; equals the canonical norm when `gl` is present.
    pub fn norm(&self) -> f64 {
        let sq = self.z0 * self.z0
            + self.zj.iter().map(|z| z * z).sum::<f64>()
            + self.gl.iter().flatten().map(|g| g * g).sum::<f64>();
        sq.sqrt()
    }

    /// Back to canonical coordinates. Needs the lineality part.
    pub fn to_canonical(&self, cone: &ConeSpec<'_>) -> Option<Vec<f64>> {
        let gl = self.gl.as_ref()?;
        let mut z = vec![0.0; cone.dim()];
        let a = cone.a();
        for &i in cone.support() {
            z[i] = -self.z0 * cone.weights()[i] / a;
        }
        for (&j, &v) in cone.complement().iter().zip(&self.zj) {
            z[j] = v;
        }
        for (q, g) in cone.lineality_basis().iter().zip(gl) {
            for (qi, &i) in q.iter().zip(cone.support()) {
                z[i] += g * qi;
            }
        }
        Some(z)
    }
}

/// Output of [`ConeSpec::project`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionWitness {
    /// Number of off-support generators in the face; `d - k + 1` flags the interior.
    pub m: usize,
    /// Dimension of the face whose relative interior contains the projection.
    pub face_dim: usize,
    /// Multiplier `t`; `None` when the input already lies in the interior.
    pub t: Option<f64>,
    /// Face coefficients `α_1..α_m`, all strictly positive for generic input.
    pub alphas: Vec<f64>,
    /// Projection in canonical coordinates, when the lineality part was supplied.
    pub pi: Option<Vec<f64>>,
    /// `‖π_C(z)‖²`; excludes the lineality part when it was not supplied.
    pub sq_norm: f64,
    /// Off-support indices sorted by `|z_j| / w_j`, descending.
    pub ordering: Vec<usize>,
}

impl ProjectionWitness {
    pub fn is_interior(&self) -> bool {
        self.t.is_none()
    }
}

/// Result of projecting onto the crosspolytope factor only.
#[derive(Debug, Clone)]
pub(crate) struct ReducedProjection {
    /// Positions into `zj`, sorted by `|z_j| / w_j` descending.
    pub order: Vec<usize>,
    pub m: usize,
    pub t: Option<f64>,
    pub sq_norm: f64,
}

pub(crate) fn sorted_order(absz: &[f64], wj: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..absz.len()).collect();
    // Stable sort keeps ascending index order on ties.
    order.sort_by(|&p, &q| {
        let rp = absz[p] / wj[p];
        let rq = absz[q] / wj[q];
        rq.partial_cmp(&rp).expect("finite coordinates")
    });
    order
}

pub(crate) fn thresholds_sorted(a: f64, order: &[usize], absz: &[f64], wj: &[f64]) -> Vec<f64> {
    let n = order.len();
    let a2 = a * a;
    let mut b = Vec::with_capacity(n + 1);
    let mut lin = 0.0;
    let mut quad = a2;
    for l in 0..n {
        let next = order[l];
        b.push(lin - quad / wj[next] * absz[next]);
        lin += wj[next] * absz[next];
        quad += wj[next] * wj[next];
    }
    b.push(lin);
    b
}

pub(crate) fn reduced_projection(a: f64, z0: f64, zj: &[f64], wj: &[f64]) -> ReducedProjection {
    let absz: Vec<f64> = zj.iter().map(|z| z.abs()).collect();
    let order = sorted_order(&absz, wj);
    let n = order.len();
    let az0 = a * z0;

    // Running sums avoid materialising the whole threshold vector.
    let mut lin = 0.0;
    let mut quad = a * a;
    let mut m = n + 1;
    for l in 0..=n {
        let b = if l < n {
            let next = order[l];
            lin - quad / wj[next] * absz[next]
        } else {
            lin
        };
        if az0 <= b {
            m = l;
            break;
        }
        if l < n {
            let next = order[l];
            lin += wj[next] * absz[next];
            quad += wj[next] * wj[next];
        }
    }

    if m == n + 1 {
        let sq = z0 * z0 + zj.iter().map(|z| z * z).sum::<f64>();
        return ReducedProjection {
            order,
            m,
            t: None,
            sq_norm: sq,
        };
    }
    let t = (-az0 + lin) / quad;
    let apex = z0 + a * t;
    let face: f64 = order[..m]
        .iter()
        .map(|&p| {
            let r = absz[p] - wj[p] * t;
            r * r
        })
        .sum();
    ReducedProjection {
        order,
        m,
        t: Some(t),
        sq_norm: apex * apex + face,
    }
}

/// Residuals of the optimality conditions for a claimed projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessReport {
    /// How far the reconstructed projection is outside the cone.
    pub membership: f64,
    /// Largest `⟨z - π, g⟩` over unit generators `g` of the cone.
    pub polar: f64,
    /// `|⟨π, z - π⟩|`.
    pub complementarity: f64,
    /// Mismatch between the witness' own `pi` and the reconstruction.
    pub consistency: f64,
}

impl WitnessReport {
    pub fn failures(&self, tol: f64) -> Vec<(&'static str, f64)> {
        [
            ("membership", self.membership),
            ("polar", self.polar),
            ("complementarity", self.complementarity),
            ("consistency", self.consistency),
        ]
        .into_iter()
        .filter(|(_, r)| !(*r <= tol))
        .collect()
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.failures(tol).is_empty()
    }

    pub fn max_residual(&self) -> f64 {
        self.membership
            .max(self.polar)
            .max(self.complementarity)
            .max(self.consistency)
    }
}

/// Recomputes the projection from the witness' face data and checks the
/// primal, dual and complementarity conditions against the generators of
/// `D(I, w)`.
pub fn verify_witness(cone: &ConeSpec<'_>, z: &[f64], witness: &ProjectionWitness) -> Result<WitnessReport> {
    let d = cone.dim();
    if z.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: z.len(),
        });
    }
    let w = cone.weights();
    let a = cone.a();

    let pi = match witness.t {
        None => z.to_vec(),
        Some(_) => {
            let mut pi = cone.lineality_projection(z);
            let apex: f64 = witness.alphas.iter().sum::<f64>() / a;
            for &i in cone.support() {
                pi[i] -= apex * w[i] / a;
            }
            for (alpha, &j) in witness.alphas.iter().zip(&witness.ordering) {
                pi[j] += alpha * z[j].signum() / w[j];
            }
            pi
        }
    };
    let min_alpha = witness.alphas.iter().cloned().fold(0.0, f64::min);
    let membership = cone.descent_functional(&pi).max(-min_alpha).max(0.0);

    let residual: Vec<f64> = z.iter().zip(&pi).map(|(z, p)| z - p).collect();

    // Generators ±e_j/w_j - y with y = (1/k) Σ_{i∈I} e_i / w_i, plus ±L.
    let k = cone.k() as f64;
    let y_dot_r: f64 = cone.support().iter().map(|&i| residual[i] / (k * w[i])).sum();
    let y_sq: f64 = cone
        .support()
        .iter()
        .map(|&i| 1.0 / (k * k * w[i] * w[i]))
        .sum();
    let mut polar = f64::NEG_INFINITY;
    for &j in cone.complement() {
        let gen_norm = (1.0 / (w[j] * w[j]) + y_sq).sqrt();
        for sign in [1.0, -1.0] {
            let dot = sign * residual[j] / w[j] - y_dot_r;
            polar = polar.max(dot / gen_norm);
        }
    }
    let s = cone.support();
    for r in 0..s.len().saturating_sub(1) {
        let (p, q) = (s[r], s[r + 1]);
        let norm = (w[p] * w[p] + w[q] * w[q]).sqrt();
        let dot = (w[q] * residual[p] - w[p] * residual[q]) / norm;
        polar = polar.max(dot.abs());
    }
    let polar = polar.max(0.0);

    let complementarity = pi.iter().zip(&residual).map(|(p, r)| p * r).sum::<f64>().abs();

    let consistency = witness.pi.as_ref().map_or(0.0, |claimed| {
        claimed
            .iter()
            .zip(&pi)
            .map(|(c, p)| (c - p).abs())
            .fold(0.0, f64::max)
    });

    Ok(WitnessReport {
        membership,
        polar,
        complementarity,
        consistency,
    })
}
