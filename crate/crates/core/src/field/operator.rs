use nalgebra::{DMatrix, DVector, Vector2, Vector3};
use rayon::prelude::*;

use super::{field_2d_block, field_3d_block, FieldPoint};
use crate::error::{Error, Result};
use crate::geometry::{HalbachArray, ParameterLayout, ParameterVector};
use crate::observables::{observe, FieldEvaluator, ObservableSpec};

/// Explicit matrix `H` of the linear forward model `q = H p`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearOperator {
    pub matrix: DMatrix<f64>,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub layout: ParameterLayout,
}

impl LinearOperator {
    pub fn new(matrix: DMatrix<f64>, layout: ParameterLayout, row_labels: Vec<String>) -> Result<Self> {
        if matrix.ncols() != layout.dim() {
            return Err(Error::Dimension {
                context: "operator columns",
                expected: layout.dim(),
                got: matrix.ncols(),
            });
        }
        if row_labels.len() != matrix.nrows() {
            return Err(Error::Dimension {
                context: "operator row labels",
                expected: matrix.nrows(),
                got: row_labels.len(),
            });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Inference("operator has non-finite entries".into()));
        }
        Ok(LinearOperator {
            matrix,
            row_labels,
            col_labels: layout.labels(),
            layout,
        })
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn apply(&self, p: &DVector<f64>) -> Result<DVector<f64>> {
        if p.len() != self.ncols() {
            return Err(Error::Dimension {
                context: "operator argument",
                expected: self.ncols(),
                got: p.len(),
            });
        }
        Ok(&self.matrix * p)
    }

    pub fn evaluate(&self, p: &ParameterVector) -> Result<DVector<f64>> {
        if p.layout != self.layout {
            return Err(Error::Layout(format!(
                "parameter layout {:?} does not match operator layout {:?}",
                p.layout, self.layout
            )));
        }
        self.apply(&p.values)
    }
}

/// Direct superposition of closed-form block fields for a full parameter vector.
///
/// 2D layouts use the infinite-extrusion field of the cross-section; 3D layouts
/// place each ring's prisms at their axial extents.
pub struct AnalyticField<'a> {
    array: &'a HalbachArray,
    p: &'a ParameterVector,
    extents: Vec<(f64, f64)>,
}

impl<'a> AnalyticField<'a> {
    pub fn new(array: &'a HalbachArray, p: &'a ParameterVector) -> Result<Self> {
        check_layout(array, &p.layout)?;
        let extents = ring_extents(array, &p.layout)?;
        Ok(AnalyticField { array, p, extents })
    }
}

impl FieldEvaluator for AnalyticField<'_> {
    fn flux_density(&self, point: &FieldPoint) -> Result<Vector3<f64>> {
        let layout = self.p.layout;
        let mut b = Vector3::zeros();
        for j in 0..layout.n_rings {
            for (i, block) in self.array.blocks.iter().enumerate() {
                let m = self.p.magnetization(i, j);
                b += block_field(block, layout, self.extents.get(j).copied(), m, point)?;
            }
        }
        Ok(b)
    }
}

fn block_field(
    block: &crate::geometry::BlockPolygon,
    layout: ParameterLayout,
    extent: Option<(f64, f64)>,
    m: Vector3<f64>,
    point: &FieldPoint,
) -> Result<Vector3<f64>> {
    if layout.is_2d() {
        let b = field_2d_block(block, Vector2::new(m.x, m.y), point)?;
        Ok(Vector3::new(b.x, b.y, 0.0))
    } else {
        let (z0, z1) = extent.expect("3D layouts carry ring extents");
        field_3d_block(block, z0, z1, m, point)
    }
}

fn check_layout(array: &HalbachArray, layout: &ParameterLayout) -> Result<()> {
    if layout.n_blocks != array.blocks.len() {
        return Err(Error::Layout(format!(
            "layout has {} blocks, array has {}",
            layout.n_blocks,
            array.blocks.len()
        )));
    }
    if layout.is_2d() && layout.n_rings != 1 {
        return Err(Error::Layout("the 2D analytic model takes a single cross-section".into()));
    }
    if !layout.is_2d() && layout.n_rings != array.n_rings {
        return Err(Error::Layout(format!(
            "layout has {} rings, array has {}",
            layout.n_rings, array.n_rings
        )));
    }
    Ok(())
}

fn ring_extents(array: &HalbachArray, layout: &ParameterLayout) -> Result<Vec<(f64, f64)>> {
    if layout.is_2d() {
        return Ok(Vec::new());
    }
    (1..=layout.n_rings).map(|j| array.ring_extent(j)).collect()
}

/// Assembles `H` column by column: column `(i, j, c)` is the observable vector
/// of block `(i, j)` carrying unit magnetization along component `c`.
///
/// Iron and `mu_r` are ignored; the closed-form model is exact only for `μ_r = 1`.
pub fn assemble_linear_operator(array: &HalbachArray, spec: &ObservableSpec, layout: ParameterLayout) -> Result<LinearOperator> {
    check_layout(array, &layout)?;
    spec.validate(Some(array))?;
    if layout.is_2d() && !spec.is_2d_compatible() {
        return Err(Error::Observable("spec needs 3D fields but the layout is 2D".into()));
    }
    let extents = ring_extents(array, &layout)?;
    let rows = spec.len();
    let columns: Vec<DVector<f64>> = (0..layout.dim())
        .into_par_iter()
        .map(|k| {
            let (i, j, c) = layout.unflatten(k);
            let mut m = Vector3::zeros();
            m[c] = 1.0;
            let block = &array.blocks[i];
            let extent = extents.get(j).copied();
            let eval = |pt: &FieldPoint| block_field(block, layout, extent, m, pt);
            observe(&eval, spec)
        })
        .collect::<Result<_>>()?;
    let mut matrix = DMatrix::zeros(rows, layout.dim());
    for (k, col) in columns.iter().enumerate() {
        matrix.set_column(k, col);
    }
    LinearOperator::new(matrix, layout, spec.row_labels())
}

/// Directional derivative of the linear model along `delta`, which is `H Δ`.
pub fn gateaux_linear(h: &LinearOperator, delta: &ParameterVector) -> Result<DVector<f64>> {
    h.evaluate(delta)
}
