//! Corner-parametrization design matrices, sufficient statistics, ranks and kernels.

use num_bigint::BigInt;
use num_traits::Zero;

use crate::complex::{Complex, VSet};
use crate::error::{Error, Result};
use crate::exact::{self, IntVec, ModBasis, Q};
use crate::table::{Cell, CellSet, Counts, Schema, Space};

/// Upper limit on the number of parameters `|J|`.
pub const MAX_PARAMS: usize = 1 << 20;

#[derive(Clone, Debug)]
struct FaceBlock {
    set: VSet,
    vars: Vec<usize>,
    /// row stride of each variable inside the block, first variable most significant
    stride: Vec<usize>,
    offset: usize,
}

/// The 0/1 matrix `A` with rows `J` and columns generated per cell. Augmented
/// columns prepend a constant 1 at index 0.
#[derive(Clone, Debug)]
pub struct Design {
    complex: Complex,
    schema: Schema,
    space: Space,
    faces: Vec<FaceBlock>,
    n_rows: usize,
}

/// Sufficient statistic `t = A n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuffStat {
    pub t: Vec<u64>,
    pub n: u64,
}

impl Design {
    pub fn build(complex: &Complex, schema: &Schema) -> Result<Design> {
        if complex.vertex_names() != schema.names() {
            return Err(Error::Config("complex vertices differ from schema variables".into()));
        }
        let levels = schema.levels();
        let mut faces = Vec::new();
        let mut offset = 0usize;
        for set in complex.faces() {
            let vars = set.to_vec();
            let mut stride = vec![0usize; vars.len()];
            let mut s = 1usize;
            for k in (0..vars.len()).rev() {
                stride[k] = s;
                s = s.saturating_mul(levels[vars[k]] as usize - 1);
            }
            faces.push(FaceBlock { set, vars, stride, offset });
            offset = offset.saturating_add(s);
            if offset > MAX_PARAMS {
                return Err(Error::TooManyParams(offset, MAX_PARAMS));
            }
        }
        Ok(Design {
            complex: complex.clone(),
            schema: schema.clone(),
            space: schema.space(),
            faces,
            n_rows: offset,
        })
    }

    pub fn complex(&self) -> &Complex {
        &self.complex
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    /// `|J|`.
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    /// `|J| + 1`, the row count of the augmented matrix.
    pub fn dim(&self) -> usize {
        self.n_rows + 1
    }

    /// Row indices `j` with `a_{j,i} = 1`, ascending.
    pub fn column(&self, cell: Cell) -> Vec<u32> {
        let mut out = Vec::new();
        self.push_column(cell, 0, &mut out);
        out
    }

    /// Nonzero positions of the augmented column: 0 for the constant row, `j+1` otherwise.
    pub fn column_aug(&self, cell: Cell) -> Vec<u32> {
        let mut out = vec![0u32];
        self.push_column(cell, 1, &mut out);
        out
    }

    pub fn column_aug_into(&self, cell: Cell, out: &mut Vec<u32>) {
        out.clear();
        out.push(0);
        self.push_column(cell, 1, out);
    }

    fn push_column(&self, cell: Cell, shift: u32, out: &mut Vec<u32>) {
        let sup = self.space.support(cell);
        for f in &self.faces {
            if f.set.is_subset(sup) {
                let mut r = f.offset;
                for (k, &v) in f.vars.iter().enumerate() {
                    r += (self.space.digit(cell, v) as usize - 1) * f.stride[k];
                }
                out.push(r as u32 + shift);
            }
        }
    }

    /// The cell `j` indexing row `j`.
    pub fn row_cell(&self, j: usize) -> Cell {
        let f = self.face_of_row(j);
        let mut rem = j - f.offset;
        let mut digits = vec![0u32; self.space.n_vars()];
        for (k, &v) in f.vars.iter().enumerate() {
            digits[v] = (rem / f.stride[k]) as u32 + 1;
            rem %= f.stride[k];
        }
        self.space.index(&digits)
    }

    pub fn row_support(&self, j: usize) -> VSet {
        self.face_of_row(j).set
    }

    /// Row of the parameter with support `set` at the (nonzero) levels of `cell`.
    pub fn row_of(&self, set: VSet, cell: Cell) -> Option<usize> {
        let k = self.faces.binary_search_by(|f| f.set.size_lex_cmp(set)).ok()?;
        let f = &self.faces[k];
        let mut r = f.offset;
        for (i, &v) in f.vars.iter().enumerate() {
            let d = self.space.digit(cell, v);
            if d == 0 {
                return None;
            }
            r += (d as usize - 1) * f.stride[i];
        }
        Some(r)
    }

    fn face_of_row(&self, j: usize) -> &FaceBlock {
        let k = self.faces.partition_point(|f| f.offset <= j) - 1;
        &self.faces[k]
    }

    /// Row label `S(j)=a,b, levels=1,1`.
    pub fn row_label(&self, j: usize) -> String {
        let f = self.face_of_row(j);
        let cell = self.row_cell(j);
        let names: Vec<&str> = f.vars.iter().map(|&v| self.schema.names()[v].as_str()).collect();
        let levels: Vec<&str> = f
            .vars
            .iter()
            .map(|&v| self.schema.labels(v)[self.space.digit(cell, v) as usize].as_str())
            .collect();
        format!("S(j)={}, levels={}", names.join(","), levels.join(","))
    }

    pub fn sufficient_statistic(&self, counts: &Counts) -> SuffStat {
        let mut t = vec![0u64; self.n_rows];
        for (c, k) in counts.iter() {
            for j in self.column(c) {
                t[j as usize] += k;
            }
        }
        SuffStat { t, n: counts.total() }
    }

    /// Dense rational augmented matrix restricted to `cells` (columns in order).
    pub fn dense_aug(&self, cells: &[Cell]) -> Vec<Vec<Q>> {
        let d = self.dim();
        let mut m = vec![vec![Q::zero(); cells.len()]; d];
        for (k, &c) in cells.iter().enumerate() {
            for j in self.column_aug(c) {
                m[j as usize][k] = exact::q(1);
            }
        }
        m
    }

    /// Exact rank of `Ã_F` with a set of independent witness cells.
    pub fn rank_cells(&self, cells: &CellSet) -> (usize, Vec<Cell>) {
        let d = self.dim();
        let mut basis = ModBasis::new(d);
        let mut chosen = Vec::new();
        let mut col = Vec::new();
        for c in cells.iter() {
            if basis.rank() == d {
                break;
            }
            self.column_aug_into(c, &mut col);
            if basis.insert_support(&col) {
                chosen.push(c);
            }
        }
        if chosen.len() == d {
            return (d, chosen);
        }
        // verify exactly: every column must be orthogonal to the kernel of the chosen ones
        loop {
            let ker: Vec<IntVec> = self.kernel_of(&chosen).into_iter().map(IntVec::new).collect();
            let mut extra = None;
            for c in cells.iter() {
                self.column_aug_into(c, &mut col);
                if ker.iter().any(|k| k.sum_sign(&col) != 0) {
                    extra = Some(c);
                    break;
                }
            }
            match extra {
                Some(c) => chosen.push(c),
                None => return (chosen.len(), chosen),
            }
        }
    }

    /// Integer basis of `{g : <g, f̃_c> = 0 for all c}`.
    pub fn kernel_of(&self, cells: &[Cell]) -> Vec<Vec<BigInt>> {
        let d = self.dim();
        let rows: Vec<Vec<Q>> = cells
            .iter()
            .map(|&c| {
                let mut r = vec![Q::zero(); d];
                for j in self.column_aug(c) {
                    r[j as usize] = exact::q(1);
                }
                r
            })
            .collect();
        if rows.is_empty() {
            return (0..d)
                .map(|i| {
                    let mut v = vec![BigInt::zero(); d];
                    v[i] = BigInt::from(1);
                    v
                })
                .collect();
        }
        exact::kernel(&rows, d)
    }

    /// `rank(Ã_F) − 1`.
    pub fn face_dimension(&self, cells: &CellSet) -> Result<usize> {
        if cells.is_empty() {
            return Err(Error::EmptySet);
        }
        Ok(self.rank_cells(cells).0 - 1)
    }

    /// Exact basis of the equations vanishing on `F`; each vector decodes as
    /// `(−c, g)`, the equation `<g, x> = c`.
    pub fn kernel_basis(&self, cells: &CellSet) -> Vec<Vec<BigInt>> {
        let (_, chosen) = self.rank_cells(cells);
        self.kernel_of(&chosen)
    }
}

/// Rank of an explicit rational matrix.
pub fn exact_rank(m: &[Vec<Q>]) -> usize {
    exact::exact_rank(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abc() -> Design {
        let c = Complex::new(&["a", "b", "c"], &[vec!["a", "b"], vec!["b", "c"]]).unwrap();
        Design::build(&c, &Schema::binary(&["a", "b", "c"]).unwrap()).unwrap()
    }

    fn sat2() -> Design {
        let c = Complex::new(&["x", "y"], &[vec!["x", "y"]]).unwrap();
        Design::build(&c, &Schema::binary(&["x", "y"]).unwrap()).unwrap()
    }

    #[test]
    fn abc_matrix() {
        let d = abc();
        assert_eq!(d.n_rows(), 5);
        // cell 110 has index 3
        assert_eq!(d.column_aug(3), vec![0, 1, 2, 4]);
        let m = d.dense_aug(&(0..8).collect::<Vec<_>>());
        assert_eq!(exact_rank(&m), 6);
        let labels: Vec<String> = (0..5).map(|j| d.row_label(j)).collect();
        assert_eq!(labels[3], "S(j)=a,b, levels=1,1");
        assert_eq!(d.row_cell(4), 6);
    }

    #[test]
    fn sat2_matrix() {
        let d = sat2();
        let m = d.dense_aug(&[0, 1, 2, 3]);
        let ones = |r: &[i64]| r.iter().map(|&x| exact::q(x)).collect::<Vec<_>>();
        assert_eq!(m[0], ones(&[1, 1, 1, 1]));
        assert_eq!(m[1], ones(&[0, 1, 0, 1]));
        assert_eq!(m[2], ones(&[0, 0, 1, 1]));
        assert_eq!(m[3], ones(&[0, 0, 0, 1]));
        assert_eq!(exact_rank(&m), 4);
    }

    #[test]
    fn stats() {
        let d = sat2();
        let n = Counts::from_dense(d.schema().clone(), &[2, 3, 5, 0]).unwrap();
        assert_eq!(d.sufficient_statistic(&n).t, vec![3, 5, 0]);
        let d = abc();
        let n = Counts::from_dense(d.schema().clone(), &[1; 8]).unwrap();
        assert_eq!(d.sufficient_statistic(&n).t, vec![4, 4, 4, 2, 2]);
        let z = Counts::from_dense(d.schema().clone(), &[0; 8]).unwrap();
        assert_eq!(d.sufficient_statistic(&z).t, vec![0; 5]);
    }

    #[test]
    fn grid_params() {
        let g = crate::complex::grid_complex(4, 4).unwrap();
        let s = Schema::binary(g.vertex_names()).unwrap();
        assert_eq!(Design::build(&g, &s).unwrap().n_rows(), 40);
    }

    #[test]
    fn dims_and_kernels() {
        let d = sat2();
        assert_eq!(d.face_dimension(&CellSet::from_vec(vec![0, 1, 2])).unwrap(), 2);
        assert_eq!(d.face_dimension(&CellSet::full(4)).unwrap(), 3);
        assert_eq!(d.face_dimension(&CellSet::from_vec(vec![2])).unwrap(), 0);
        assert!(d.face_dimension(&CellSet::default()).is_err());
        let k = d.kernel_basis(&CellSet::from_vec(vec![0, 1, 2]));
        assert_eq!(k.len(), 1);
        let v: Vec<i64> = k[0].iter().map(|x| num_traits::ToPrimitive::to_i64(x).unwrap()).collect();
        assert!(v == vec![0, 0, 0, 1] || v == vec![0, 0, 0, -1]);
        assert!(d.kernel_basis(&CellSet::full(4)).is_empty());
        let k = d.kernel_basis(&CellSet::from_vec(vec![1, 2, 3]));
        let v: Vec<i64> = k[0].iter().map(|x| num_traits::ToPrimitive::to_i64(x).unwrap()).collect();
        assert!(v == vec![1, -1, -1, 1] || v == vec![-1, 1, 1, -1]);
    }
}
