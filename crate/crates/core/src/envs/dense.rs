//! Tabular models whose kernel and cost are affine in the two distributions:
//!
//! ```text
//! p(y|x,a,μ,μ̃) = base[x][a][y] + Σ_z μ(z) glob[x][a][z][y] + Σ_z μ̃(z) loc[x][a][z][y]
//! f(x,a,μ,μ̃)   = base[x][a]    + Σ_z μ(z) glob[x][a][z]    + Σ_z μ̃(z) loc[x][a][z]
//! ```
//!
//! Because every expression is affine, validity on the simplex reduces to
//! validity at each pair of vertices, and the Lipschitz constants and cost
//! bound have exact finite formulas.

use serde::{Deserialize, Serialize};

use crate::error::{MfcgError, Result};
use crate::model::{check_row, validate_model_params, LipschitzConstants, MeanFieldModel};
use crate::types::{SimplexDist, SpaceDims};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    /// `[x][a][y]`
    pub base: Vec<Vec<Vec<f64>>>,
    /// `[x][a][z][y]`; absent means no dependence on μ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub glob: Option<Vec<Vec<Vec<Vec<f64>>>>>,
    /// `[x][a][z][y]`; absent means no dependence on μ̃.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loc: Option<Vec<Vec<Vec<Vec<f64>>>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSpec {
    /// `[x][a]`
    pub base: Vec<Vec<f64>>,
    /// `[x][a][z]`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub glob: Option<Vec<Vec<Vec<f64>>>>,
    /// `[x][a][z]`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loc: Option<Vec<Vec<Vec<f64>>>>,
}

/// Serializable description of an affine tabular model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseModelSpec {
    pub dims: SpaceDims,
    pub kernel: KernelSpec,
    pub cost: CostSpec,
    pub gamma: f64,
    pub phi: f64,
    /// Must not be smaller than the exact bound; computed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_bound: Option<f64>,
    /// Overrides the exact constants when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<LipschitzConstants>,
}

/// Model evaluated from flattened affine coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineModel {
    dims: SpaceDims,
    gamma: f64,
    phi: f64,
    // Flattened with y (or nothing, for costs) fastest.
    k_base: Vec<f64>,
    k_glob: Option<Vec<f64>>,
    k_loc: Option<Vec<f64>>,
    c_base: Vec<f64>,
    c_glob: Option<Vec<f64>>,
    c_loc: Option<Vec<f64>>,
    cost_bound: f64,
    lipschitz: LipschitzConstants,
    exact_lipschitz: LipschitzConstants,
}

fn spec_err(field: impl Into<String>, detail: impl Into<String>) -> MfcgError {
    MfcgError::InvalidSpec {
        field: field.into(),
        detail: detail.into(),
    }
}

fn flatten3(field: &str, v: &[Vec<Vec<f64>>], d: [usize; 3]) -> Result<Vec<f64>> {
    if v.len() != d[0] {
        return Err(spec_err(
            field,
            format!("expected {} entries, found {}", d[0], v.len()),
        ));
    }
    let mut out = Vec::with_capacity(d[0] * d[1] * d[2]);
    for (i, vi) in v.iter().enumerate() {
        if vi.len() != d[1] {
            return Err(spec_err(
                format!("{field}[{i}]"),
                format!("expected {} entries, found {}", d[1], vi.len()),
            ));
        }
        for (j, vij) in vi.iter().enumerate() {
            if vij.len() != d[2] {
                return Err(spec_err(
                    format!("{field}[{i}][{j}]"),
                    format!("expected {} entries, found {}", d[2], vij.len()),
                ));
            }
            if let Some(k) = vij.iter().position(|v| !v.is_finite()) {
                return Err(spec_err(
                    format!("{field}[{i}][{j}][{k}]"),
                    "value is not finite",
                ));
            }
            out.extend_from_slice(vij);
        }
    }
    Ok(out)
}

fn flatten4(field: &str, v: &[Vec<Vec<Vec<f64>>>], d: [usize; 4]) -> Result<Vec<f64>> {
    if v.len() != d[0] {
        return Err(spec_err(
            field,
            format!("expected {} entries, found {}", d[0], v.len()),
        ));
    }
    let mut out = Vec::with_capacity(d.iter().product());
    for (i, vi) in v.iter().enumerate() {
        out.extend(flatten3(&format!("{field}[{i}]"), vi, [d[1], d[2], d[3]])?);
    }
    Ok(out)
}

fn flatten2(field: &str, v: &[Vec<f64>], d: [usize; 2]) -> Result<Vec<f64>> {
    flatten3(field, &[v.to_vec()], [1, d[0], d[1]]).map_err(|e| match e {
        MfcgError::InvalidSpec { field: f, detail } => MfcgError::InvalidSpec {
            field: f.replacen(&format!("{field}[0]"), field, 1),
            detail,
        },
        other => other,
    })
}

/// Build and validate a model from its spec.
pub fn load_dense_model(spec: &DenseModelSpec) -> Result<AffineModel> {
    let dims = SpaceDims::new(spec.dims.n_states, spec.dims.n_actions)
        .map_err(|e| spec_err("dims", e.to_string()))?;
    let (nx, na) = (dims.n_states, dims.n_actions);
    if !(0.0..1.0).contains(&spec.gamma) {
        return Err(spec_err(
            "gamma",
            format!("must lie in [0,1), got {}", spec.gamma),
        ));
    }
    if !(spec.phi > 0.0 && spec.phi.is_finite()) {
        return Err(spec_err(
            "phi",
            format!("must be positive, got {}", spec.phi),
        ));
    }
    let k_base = flatten3("kernel.base", &spec.kernel.base, [nx, na, nx])?;
    let k_glob = spec
        .kernel
        .glob
        .as_ref()
        .map(|g| flatten4("kernel.glob", g, [nx, na, nx, nx]))
        .transpose()?;
    let k_loc = spec
        .kernel
        .loc
        .as_ref()
        .map(|g| flatten4("kernel.loc", g, [nx, na, nx, nx]))
        .transpose()?;
    let c_base = flatten2("cost.base", &spec.cost.base, [nx, na])?;
    let c_glob = spec
        .cost
        .glob
        .as_ref()
        .map(|g| flatten3("cost.glob", g, [nx, na, nx]))
        .transpose()?;
    let c_loc = spec
        .cost
        .loc
        .as_ref()
        .map(|g| flatten3("cost.loc", g, [nx, na, nx]))
        .transpose()?;

    let mut model = AffineModel {
        dims,
        gamma: spec.gamma,
        phi: spec.phi,
        k_base,
        k_glob,
        k_loc,
        c_base,
        c_glob,
        c_loc,
        cost_bound: 0.0,
        lipschitz: LipschitzConstants {
            p_glob: 0.0,
            p_loc: 0.0,
            f_glob: 0.0,
            f_loc: 0.0,
        },
        exact_lipschitz: LipschitzConstants {
            p_glob: 0.0,
            p_loc: 0.0,
            f_glob: 0.0,
            f_loc: 0.0,
        },
    };

    // Vertex validation of every kernel row.
    let mut row = vec![0.0; nx];
    for x in 0..nx {
        for a in 0..na {
            for z1 in 0..nx {
                for z2 in 0..nx {
                    model.row_at_vertices(x, a, z1, z2, &mut row);
                    if let Err(detail) = check_row(&mut row) {
                        let field = if model.k_glob.is_none() && model.k_loc.is_none() {
                            format!("kernel.base[{x}][{a}]")
                        } else {
                            format!("kernel[{x}][{a}] at mu = delta({z1}), mu_tilde = delta({z2})")
                        };
                        return Err(spec_err(field, format!("(x={x}, a={a}): {detail}")));
                    }
                }
            }
        }
    }

    let exact_bound = model.exact_cost_bound();
    model.cost_bound = match spec.cost_bound {
        Some(b) if !(b.is_finite() && b >= exact_bound - 1e-12) => {
            return Err(spec_err(
                "cost_bound",
                format!("declared {b} is below the attained maximum |f| = {exact_bound}"),
            ));
        }
        Some(b) => b,
        None => exact_bound,
    };
    model.exact_lipschitz = model.exact_constants();
    model.lipschitz = match spec.lipschitz {
        Some(l) => {
            l.validate()
                .map_err(|e| spec_err("lipschitz", e.to_string()))?;
            l
        }
        None => model.exact_lipschitz,
    };
    validate_model_params(model.gamma, model.phi, model.cost_bound)?;
    Ok(model)
}

impl AffineModel {
    /// A model whose kernel and cost ignore both distributions.
    pub fn tabular(
        kernel: Vec<Vec<Vec<f64>>>,
        cost: Vec<Vec<f64>>,
        gamma: f64,
        phi: f64,
    ) -> Result<Self> {
        let nx = kernel.len();
        let na = kernel.first().map_or(0, Vec::len);
        load_dense_model(&DenseModelSpec {
            dims: SpaceDims {
                n_states: nx,
                n_actions: na,
            },
            kernel: KernelSpec {
                base: kernel,
                glob: None,
                loc: None,
            },
            cost: CostSpec {
                base: cost,
                glob: None,
                loc: None,
            },
            gamma,
            phi,
            cost_bound: None,
            lipschitz: None,
        })
    }

    /// Constants computed from the coefficients, regardless of any declared override.
    pub fn exact_lipschitz(&self) -> LipschitzConstants {
        self.exact_lipschitz
    }

    #[inline]
    fn pair(&self, x: usize, a: usize) -> usize {
        self.dims.pair(x, a)
    }

    fn row_at_vertices(&self, x: usize, a: usize, z1: usize, z2: usize, out: &mut [f64]) {
        let n = self.dims.n_states;
        let i = self.pair(x, a);
        out.copy_from_slice(&self.k_base[i * n..(i + 1) * n]);
        if let Some(g) = &self.k_glob {
            let off = (i * n + z1) * n;
            out.iter_mut()
                .zip(&g[off..off + n])
                .for_each(|(o, v)| *o += v);
        }
        if let Some(l) = &self.k_loc {
            let off = (i * n + z2) * n;
            out.iter_mut()
                .zip(&l[off..off + n])
                .for_each(|(o, v)| *o += v);
        }
    }

    fn cost_at_vertices(&self, x: usize, a: usize, z1: usize, z2: usize) -> f64 {
        let n = self.dims.n_states;
        let i = self.pair(x, a);
        let mut c = self.c_base[i];
        if let Some(g) = &self.c_glob {
            c += g[i * n + z1];
        }
        if let Some(l) = &self.c_loc {
            c += l[i * n + z2];
        }
        c
    }

    fn exact_cost_bound(&self) -> f64 {
        let n = self.dims.n_states;
        let mut b: f64 = 0.0;
        for x in 0..n {
            for a in 0..self.dims.n_actions {
                for z1 in 0..n {
                    for z2 in 0..n {
                        b = b.max(self.cost_at_vertices(x, a, z1, z2).abs());
                    }
                }
            }
        }
        b
    }

    /// `½ max_{z,z'} ‖G_z − G_z'‖₁` over pairs, for kernel and cost coefficients.
    fn exact_constants(&self) -> LipschitzConstants {
        let n = self.dims.n_states;
        let kernel_const = |coef: &Option<Vec<f64>>| -> f64 {
            let Some(g) = coef else { return 0.0 };
            let mut best: f64 = 0.0;
            for i in 0..self.dims.n_pairs() {
                for z1 in 0..n {
                    for z2 in 0..z1 {
                        let r1 = &g[(i * n + z1) * n..(i * n + z1 + 1) * n];
                        let r2 = &g[(i * n + z2) * n..(i * n + z2 + 1) * n];
                        best = best.max(0.5 * crate::types::l1(r1, r2));
                    }
                }
            }
            best
        };
        let cost_const = |coef: &Option<Vec<f64>>| -> f64 {
            let Some(g) = coef else { return 0.0 };
            let mut best: f64 = 0.0;
            for i in 0..self.dims.n_pairs() {
                let s = &g[i * n..(i + 1) * n];
                let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
                best = best.max(0.5 * (hi - lo));
            }
            best
        };
        LipschitzConstants {
            p_glob: kernel_const(&self.k_glob),
            p_loc: kernel_const(&self.k_loc),
            f_glob: cost_const(&self.c_glob),
            f_loc: cost_const(&self.c_loc),
        }
    }
}

impl MeanFieldModel for AffineModel {
    fn dims(&self) -> SpaceDims {
        self.dims
    }
    fn gamma(&self) -> f64 {
        self.gamma
    }
    fn phi(&self) -> f64 {
        self.phi
    }

    fn transition(&self, x: usize, a: usize, mu: &SimplexDist, mt: &SimplexDist, out: &mut [f64]) {
        let n = self.dims.n_states;
        let i = self.pair(x, a);
        out.copy_from_slice(&self.k_base[i * n..(i + 1) * n]);
        for (coef, w) in [(&self.k_glob, mu), (&self.k_loc, mt)] {
            if let Some(g) = coef {
                for z in 0..n {
                    let wz = w[z];
                    let off = (i * n + z) * n;
                    for (o, v) in out.iter_mut().zip(&g[off..off + n]) {
                        *o += wz * v;
                    }
                }
            }
        }
    }

    fn cost(&self, x: usize, a: usize, mu: &SimplexDist, mt: &SimplexDist) -> f64 {
        let n = self.dims.n_states;
        let i = self.pair(x, a);
        let mut c = self.c_base[i];
        for (coef, w) in [(&self.c_glob, mu), (&self.c_loc, mt)] {
            if let Some(g) = coef {
                for z in 0..n {
                    c += w[z] * g[i * n + z];
                }
            }
        }
        c
    }

    fn cost_bound(&self) -> f64 {
        self.cost_bound
    }

    fn declared_lipschitz(&self) -> Option<LipschitzConstants> {
        Some(self.lipschitz)
    }

    fn kernel_is_distribution_free(&self) -> bool {
        self.k_glob.is_none() && self.k_loc.is_none()
    }
}
