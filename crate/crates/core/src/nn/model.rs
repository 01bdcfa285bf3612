use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::appnp_coefficients;
use crate::linalg::Mat;
use crate::nn::Activation;
use crate::rng;

/// Architecture plus its propagation hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Arch {
    /// `layers` graph convolutions; the last one has no activation.
    Gcn {
        layers: usize,
    },
    /// One `(alpha, beta)` pair per propagation layer.
    Gcnii {
        alpha: Vec<f64>,
        beta: Vec<f64>,
    },
    Sgc,
    Appnp {
        gamma: f64,
        k: usize,
    },
    Gpr {
        k: usize,
    },
}

impl Arch {
    pub fn gcn() -> Arch {
        Arch::Gcn { layers: 2 }
    }

    /// GCNII with `alpha = 0.1` and `beta_l = ln(0.5 / l + 1)` on every layer.
    pub fn gcnii(layers: usize) -> Arch {
        Arch::Gcnii {
            alpha: vec![0.1; layers],
            beta: (1..=layers).map(|l| (0.5 / l as f64 + 1.0).ln()).collect(),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Arch::Gcn { .. } => "gcn",
            Arch::Gcnii { .. } => "gcnii",
            Arch::Sgc => "sgc",
            Arch::Appnp { .. } => "appnp",
            Arch::Gpr { .. } => "gpr",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub arch: Arch,
    pub d: usize,
    pub h: usize,
    pub c: usize,
    pub act: Activation,
}

/// One contiguous slice of the flat parameter vector, stored column-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl Block {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }

    /// Weight matrices are subject to the spectral-norm bound; `gamma` is not.
    pub fn is_matrix(&self) -> bool {
        self.name != "gamma"
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub blocks: Vec<Block>,
}

impl Layout {
    fn from_shapes(shapes: Vec<(String, usize, usize)>) -> Layout {
        let mut offset = 0;
        let blocks = shapes
            .into_iter()
            .map(|(name, rows, cols)| {
                let b = Block {
                    name,
                    rows,
                    cols,
                    offset,
                };
                offset += rows * cols;
                b
            })
            .collect();
        Layout { blocks }
    }

    pub fn len(&self) -> usize {
        self.blocks.last().map(|b| b.offset + b.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn matrix(&self, w: &[f64], idx: usize) -> Mat {
        let b = &self.blocks[idx];
        Mat::from_col_major(b.rows, b.cols, &w[b.range()])
    }

    pub fn matrices(&self, w: &[f64]) -> Vec<Mat> {
        (0..self.blocks.len()).map(|i| self.matrix(w, i)).collect()
    }

    /// Check offsets are contiguous and shapes nonempty.
    pub fn validate(&self) -> Result<()> {
        let mut offset = 0;
        for b in &self.blocks {
            if b.offset != offset || b.is_empty() {
                return Err(Error::InvalidData(format!(
                    "layout block {} is malformed",
                    b.name
                )));
            }
            offset = b
                .rows
                .checked_mul(b.cols)
                .and_then(|l| l.checked_add(offset))
                .ok_or_else(|| Error::InvalidData("layout size overflows".into()))?;
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Layout> {
        let l: Layout = serde_json::from_str(s)?;
        l.validate()?;
        Ok(l)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("layout serializes")
    }
}

impl ModelSpec {
    pub fn new(arch: Arch, d: usize, h: usize, c: usize, act: Activation) -> Result<ModelSpec> {
        if d == 0 || h == 0 || c == 0 {
            return Err(Error::InvalidArgument(
                "model dimensions must be positive".into(),
            ));
        }
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        match &arch {
            Arch::Gcn { layers } if *layers < 2 => {
                return Err(Error::InvalidArgument("GCN needs at least 2 layers".into()))
            }
            Arch::Gcnii { alpha, beta } => {
                if alpha.is_empty() || alpha.len() != beta.len() {
                    return Err(Error::InvalidArgument(
                        "GCNII needs one alpha and one beta per layer".into(),
                    ));
                }
                if !alpha.iter().chain(beta).all(|&v| unit(v)) {
                    return Err(Error::InvalidArgument(
                        "GCNII alpha/beta outside [0,1]".into(),
                    ));
                }
            }
            Arch::Appnp { gamma, k } => {
                appnp_coefficients(*gamma, *k)?;
            }
            _ => {}
        }
        Ok(ModelSpec { arch, d, h, c, act })
    }

    pub fn layout(&self) -> Layout {
        let (d, h, c) = (self.d, self.h, self.c);
        let w = |i: usize, r: usize, k: usize| (format!("W{i}"), r, k);
        let shapes = match &self.arch {
            Arch::Gcn { layers } => {
                let mut s = vec![w(1, d, h)];
                for l in 2..*layers {
                    s.push(w(l, h, h));
                }
                s.push(w(*layers, h, c));
                s
            }
            Arch::Gcnii { alpha, .. } => {
                let mut s = vec![w(0, d, h)];
                for l in 1..=alpha.len() {
                    s.push(w(l, h, h));
                }
                s.push(w(alpha.len() + 1, h, c));
                s
            }
            Arch::Sgc | Arch::Appnp { .. } => vec![w(1, d, h), w(2, h, c)],
            Arch::Gpr { k } => vec![w(1, d, h), w(2, h, c), ("gamma".into(), k + 1, 1)],
        };
        Layout::from_shapes(shapes)
    }

    /// Uniform entries on `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`; GPR's `gamma`
    /// starts at the APPNP coefficients with teleport 0.1.
    pub fn init(&self, seed: u64) -> Vec<f64> {
        let layout = self.layout();
        let mut r = rng::stream(seed, "init");
        let mut w = vec![0.0; layout.len()];
        for b in &layout.blocks {
            if b.is_matrix() {
                let a = 1.0 / (b.rows as f64).sqrt();
                for v in &mut w[b.range()] {
                    *v = r.random_range(-a..=a);
                }
            } else if let Arch::Gpr { k } = self.arch {
                let c = appnp_coefficients(0.1, k.max(1)).expect("valid teleport");
                let c = if k == 0 { vec![1.0] } else { c };
                w[b.range()].copy_from_slice(&c);
            }
        }
        w
    }
}

/// Parameters together with their layout, serializable as raw little-endian
/// doubles plus a JSON sidecar.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub layout: Layout,
    pub values: Vec<f64>,
}

impl ParamVector {
    pub fn new(layout: Layout, values: Vec<f64>) -> Result<ParamVector> {
        if layout.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "layout expects {} values, got {}",
                layout.len(),
                values.len()
            )));
        }
        Ok(ParamVector { layout, values })
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub fn from_le_bytes(layout: Layout, bytes: &[u8]) -> Result<ParamVector> {
        if !bytes.len().is_multiple_of(8) {
            return Err(Error::InvalidData(
                "parameter file length is not a multiple of 8".into(),
            ));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        ParamVector::new(layout, values)
    }
}
