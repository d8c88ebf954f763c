use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::basis::{CmBasis, CmElement};
use crate::error::{Error, Result};
use crate::math::{condition_number, inverse};
use crate::path::GridPath;
use crate::young::series::{heun, Algebra, Source, Term};
use crate::young::{endpoint_sensitivities, EndpointSensitivity, VectorFieldSystem};

/// Projection onto the kernel of `w -> phi^1_1(w)` at `gamma_bar`:
/// `pi w = w - sum phi^{1,j}_1(w) D_{jj'} #phi^{1,j'}` with `C = D^{-1}` the
/// Gram matrix of the representers `#phi^{1,j}` in the node basis.
#[derive(Debug, Clone)]
pub struct KernelProjection {
    pub basis: CmBasis,
    sens: EndpointSensitivity,
    /// `phi^1_1` on the basis: `n x (nodes * d)`.
    pub functional: DMatrix<f64>,
    pub representers: Vec<CmElement>,
    pub representer_paths: Vec<GridPath>,
    pub gram: DMatrix<f64>,
    pub gram_inv: DMatrix<f64>,
}

pub fn project_kernel<V: VectorFieldSystem + ?Sized>(
    vf: &V,
    a: &[f64],
    gamma_bar: &GridPath,
    basis: &CmBasis,
) -> Result<KernelProjection> {
    if basis.dims() != vf.driver_dim() {
        return Err(Error::invalid("basis does not match the driver dimension"));
    }
    let steps = gamma_bar.steps();
    let sens = endpoint_sensitivities(vf, gamma_bar, 0.0, a)?;
    let (n, d) = (vf.state_dim(), basis.dims());
    let mut functional = DMatrix::zeros(n, basis.len());
    for i in 0..basis.nodes().len() {
        for k in 0..d {
            let col = sens.apply(&basis.basis_path(i, k, steps));
            for r in 0..n {
                functional[(r, i * d + k)] = col[r];
            }
        }
    }
    let representers: Vec<CmElement> = (0..n)
        .map(|r| CmElement { coeffs: basis.solve_gram(&functional.row(r).iter().copied().collect::<Vec<_>>()) })
        .collect();
    let gram = DMatrix::from_fn(n, n, |i, j| basis.inner(&representers[i], &representers[j]));
    let singular = || Error::SingularMatrix("first-order Gram matrix C is singular".into());
    if !(condition_number(&gram) < 1e12) {
        return Err(singular());
    }
    let gram_inv = inverse(&gram).map_err(|_| singular())?;
    let representer_paths = representers.iter().map(|e| basis.path(e, steps)).collect();
    Ok(KernelProjection { basis: basis.clone(), sens, functional, representers, representer_paths, gram, gram_inv })
}

impl KernelProjection {
    /// `phi^1_1(w)`.
    pub fn phi1(&self, w: &GridPath) -> Vec<f64> {
        self.sens.apply(w)
    }

    pub fn apply(&self, w: &GridPath) -> Result<GridPath> {
        let f = DVector::from_vec(self.phi1(w));
        let coef = &self.gram_inv * f;
        let mut out = w.clone();
        for (j, p) in self.representer_paths.iter().enumerate() {
            out = out.axpy(-coef[j], p)?;
        }
        Ok(out)
    }

    /// The projection acting on basis coefficients.
    pub fn apply_element(&self, x: &CmElement) -> CmElement {
        let f = &self.functional * DVector::from_column_slice(&x.coeffs);
        let coef = &self.gram_inv * f;
        let mut out = x.clone();
        for (j, r) in self.representers.iter().enumerate() {
            out = out.axpy(-coef[j], r);
        }
        out
    }
}

/// `psi(w, w') = (1/2) d^2/dr ds phi^0_1(gamma_bar + r w + s w')`, symmetrized.
/// On the diagonal it is the second-order term `phi^2_1(w)` of the expansion.
pub fn second_order_form<V: VectorFieldSystem + ?Sized>(
    w: &GridPath,
    w_prime: &GridPath,
    vf: &V,
    a: &[f64],
    gamma_bar: &GridPath,
) -> Result<Vec<f64>> {
    let alg = Algebra::subsets(2);
    let run = |x: &GridPath, y: &GridPath| -> Result<Vec<f64>> {
        let terms = [
            Term { mono: 0, source: Source::Path(gamma_bar), scale: 1.0 },
            Term { mono: 1, source: Source::Path(x), scale: 1.0 },
            Term { mono: 2, source: Source::Path(y), scale: 1.0 },
        ];
        let out = heun(vf, &alg, a, gamma_bar.steps(), &terms)?;
        Ok(out[3].end().to_vec())
    };
    let p = run(w, w_prime)?;
    let q = run(w_prime, w)?;
    Ok(p.iter().zip(&q).map(|(x, y)| 0.25 * (x + y)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cameron_martin::{minimize_energy, MinimizerOptions};
    use crate::expansion::phi_hierarchy;
    use crate::fbm::{FbmSampler, HurstParam, SamplerKind};
    use crate::models;

    fn h(v: f64) -> HurstParam {
        HurstParam::new(v).unwrap()
    }

    fn fbm(d: usize, n: usize, idx: u64) -> GridPath {
        FbmSampler::new(h(0.75), n, SamplerKind::Auto).unwrap().sample_path(d, 5, idx)
    }

    fn setup_2d() -> (models::SeparableSystem, [f64; 2], GridPath, CmBasis) {
        let vf = models::elliptic_2d();
        let a = [0.1, -0.1];
        let opts = MinimizerOptions { steps: 256, ..Default::default() };
        let sol = minimize_energy(&vf, &a, &[0.5, 0.2], h(0.75), &opts).unwrap();
        let basis = CmBasis::chebyshev(h(0.75), 2, opts.nodes).unwrap();
        (vf, a, sol.gamma_bar, basis)
    }

    #[test]
    fn projection_annihilates_and_is_idempotent() {
        let vf = models::affine(0.5);
        let g = GridPath::from_fn(1, 256, |t, o| o[0] = t);
        let basis = CmBasis::chebyshev(h(0.75), 1, 32).unwrap();
        let p = project_kernel(&vf, &[0.0], &g, &basis).unwrap();
        for m in 0..5 {
            let w = fbm(1, 256, m);
            let pw = p.apply(&w).unwrap();
            assert!(p.phi1(&pw)[0].abs() < 1e-10);
            assert!(p.apply(&pw).unwrap().sup_distance(&pw).unwrap() < 1e-10);
        }
        // n = 1: the representer itself is annihilated.
        assert!(p.apply(&p.representer_paths[0]).unwrap().sup_norm() < 1e-10);
    }

    #[test]
    fn kernel_elements_are_fixed_and_norm_contracts() {
        let (vf, a, g, basis) = setup_2d();
        let p = project_kernel(&vf, &a, &g, &basis).unwrap();
        let w = fbm(2, g.steps(), 1);
        let pw = p.apply(&w).unwrap();
        assert!(p.apply(&pw).unwrap().sup_distance(&pw).unwrap() < 1e-10);
        let f = p.phi1(&pw);
        assert!(f.iter().all(|v| v.abs() < 1e-10));
        for s in 0..5 {
            let x = CmElement { coeffs: (0..basis.len()).map(|i| ((i * 7 + s * 3) as f64 * 0.61).sin()).collect() };
            let px = p.apply_element(&x);
            assert!(basis.norm_sq(&px) <= basis.norm_sq(&x) + 1e-10);
            let ppx = p.apply_element(&px);
            assert!(basis.norm_sq(&ppx.axpy(-1.0, &px)) < 1e-10);
        }
    }

    #[test]
    fn singular_first_order_gram() {
        let vf = models::rank_deficient_2d();
        let g = GridPath::zeros(2, 32);
        let basis = CmBasis::chebyshev(h(0.75), 2, 8).unwrap();
        assert!(matches!(project_kernel(&vf, &[0.0, 0.0], &g, &basis), Err(Error::SingularMatrix(_))));
    }

    #[test]
    fn second_order_form_identities() {
        let (vf, a, g, _) = setup_2d();
        let n = g.steps();
        let (w, w2) = (fbm(2, n, 2), fbm(2, n, 3));
        let p = second_order_form(&w, &w2, &vf, &a, &g).unwrap();
        let q = second_order_form(&w2, &w, &vf, &a, &g).unwrap();
        for k in 0..2 {
            assert!((p[k] - q[k]).abs() < 1e-10);
        }
        let diag = second_order_form(&w, &w, &vf, &a, &g).unwrap();
        let hier = phi_hierarchy(&g, &w, &vf, &a, h(0.75), 2.0).unwrap();
        let phi2 = hier.phi(2.0).unwrap().end();
        for k in 0..2 {
            assert!((diag[k] - phi2[k]).abs() < 1e-8, "{diag:?} {phi2:?}");
        }
        let c = models::constant(2, 2, &[1.0, 0.3, 0.2, 1.0], &[0.0, 0.0]);
        assert!(second_order_form(&w, &w2, &c, &a, &g).unwrap().iter().all(|v| *v == 0.0));
    }
}
