//! Closed convex (polyhedral) cones in coordinate space.
//!
//! Every cone here is a product of coordinate-wise orthant blocks, so the
//! Euclidean projection, the distance, and the polar cone all have exact
//! closed forms. The Moreau–Yosida penalty is `β(r) = ½ dist²(r, K)` with
//! gradient `Dβ(r) = r − Π_K(r)`, which always lies in the polar cone `K⁻`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Membership tolerance for `r ∈ K`.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

/// Closed convex cone descriptor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConeDescriptor", into = "ConeDescriptor")]
pub enum Cone {
    /// `{r : r ≥ 0}`
    Nonnegative(usize),
    /// `{r : r ≤ 0}`
    Nonpositive(usize),
    /// `{0}`
    Zero(usize),
    /// The whole space.
    Free(usize),
    /// Cartesian product, blocks laid out in order.
    Product(Vec<Cone>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Leaf {
    Nonnegative,
    Nonpositive,
    Zero,
    Free,
}

impl Leaf {
    fn project(self, r: f64) -> f64 {
        match self {
            Leaf::Nonnegative => r.max(0.0),
            Leaf::Nonpositive => r.min(0.0),
            Leaf::Zero => 0.0,
            Leaf::Free => r,
        }
    }

    fn polar(self) -> Leaf {
        match self {
            Leaf::Nonnegative => Leaf::Nonpositive,
            Leaf::Nonpositive => Leaf::Nonnegative,
            Leaf::Zero => Leaf::Free,
            Leaf::Free => Leaf::Zero,
        }
    }

    fn cone(self, dim: usize) -> Cone {
        match self {
            Leaf::Nonnegative => Cone::Nonnegative(dim),
            Leaf::Nonpositive => Cone::Nonpositive(dim),
            Leaf::Zero => Cone::Zero(dim),
            Leaf::Free => Cone::Free(dim),
        }
    }
}

impl Cone {
    pub fn product(children: Vec<Cone>) -> Result<Self> {
        if children.is_empty() {
            return Err(Error::invalid("product cone needs at least one child"));
        }
        Ok(Cone::Product(children))
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        match self {
            Cone::Nonnegative(d) | Cone::Nonpositive(d) | Cone::Zero(d) | Cone::Free(d) => *d,
            Cone::Product(children) => children.iter().map(Cone::dim).sum(),
        }
    }

    /// True when every block is an orthant (nonnegative or nonpositive).
    pub fn is_orthant(&self) -> bool {
        match self {
            Cone::Nonnegative(_) | Cone::Nonpositive(_) => true,
            Cone::Zero(_) | Cone::Free(_) => false,
            Cone::Product(children) => children.iter().all(Cone::is_orthant),
        }
    }

    fn leaves(&self, out: &mut Vec<(Leaf, usize)>) {
        match self {
            Cone::Nonnegative(d) => out.push((Leaf::Nonnegative, *d)),
            Cone::Nonpositive(d) => out.push((Leaf::Nonpositive, *d)),
            Cone::Zero(d) => out.push((Leaf::Zero, *d)),
            Cone::Free(d) => out.push((Leaf::Free, *d)),
            Cone::Product(children) => children.iter().for_each(|c| c.leaves(out)),
        }
    }

    fn map_coords(&self, r: &[f64], f: impl Fn(Leaf, f64) -> f64) -> Vec<f64> {
        let mut leaves = Vec::new();
        self.leaves(&mut leaves);
        let mut out = Vec::with_capacity(r.len());
        let mut offset = 0;
        for (leaf, d) in leaves {
            out.extend(r[offset..offset + d].iter().map(|&x| f(leaf, x)));
            offset += d;
        }
        out
    }

    /// The polar cone `K⁻ = {μ : ⟨μ, r⟩ ≤ 0 ∀ r ∈ K}`.
    pub fn polar(&self) -> Cone {
        match self {
            Cone::Product(children) => Cone::Product(children.iter().map(Cone::polar).collect()),
            other => {
                let mut leaves = Vec::new();
                other.leaves(&mut leaves);
                let (leaf, d) = leaves[0];
                leaf.polar().cone(d)
            }
        }
    }

    /// Euclidean projection onto the cone.
    pub fn project(&self, r: &[f64]) -> Result<Vec<f64>> {
        check_len("cone projection", self.dim(), r.len())?;
        Ok(self.map_coords(r, Leaf::project))
    }

    /// Euclidean projection onto the polar cone.
    pub fn project_polar(&self, r: &[f64]) -> Result<Vec<f64>> {
        check_len("polar projection", self.dim(), r.len())?;
        Ok(self.map_coords(r, |leaf, x| leaf.polar().project(x)))
    }

    /// `dist(r, K)`.
    pub fn distance(&self, r: &[f64]) -> Result<f64> {
        Ok((2.0 * self.penalty_beta(r)?).sqrt())
    }

    pub fn contains(&self, r: &[f64]) -> Result<bool> {
        Ok(self.distance(r)? <= MEMBERSHIP_TOL)
    }

    /// `β(r) = ½ dist²(r, K)`; zero exactly on the cone.
    pub fn penalty_beta(&self, r: &[f64]) -> Result<f64> {
        check_len("penalty", self.dim(), r.len())?;
        let excess = self.map_coords(r, |leaf, x| x - leaf.project(x));
        Ok(0.5 * excess.iter().map(|e| e * e).sum::<f64>())
    }

    /// `Dβ(r) = r − Π_K(r)`.
    pub fn penalty_beta_grad(&self, r: &[f64]) -> Result<Vec<f64>> {
        check_len("penalty gradient", self.dim(), r.len())?;
        Ok(self.map_coords(r, |leaf, x| x - leaf.project(x)))
    }

    /// `dist(μ, K⁻)`: how far a multiplier is from dual feasibility.
    pub fn polar_residual(&self, mu: &[f64]) -> Result<f64> {
        check_len("polar residual", self.dim(), mu.len())?;
        let excess = self.map_coords(mu, |leaf, x| x - leaf.polar().project(x));
        Ok(excess.iter().map(|e| e * e).sum::<f64>().sqrt())
    }
}

/// Wire form of a cone: `kind` + `dim`, plus `children` for products.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeDescriptor {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<ConeDescriptor>,
}

impl TryFrom<ConeDescriptor> for Cone {
    type Error = Error;

    fn try_from(desc: ConeDescriptor) -> Result<Self> {
        if desc.kind != "product-of-cones" && !desc.children.is_empty() {
            return Err(Error::invalid("only product cones take children"));
        }
        let leaf_dim = |kind: &str| -> Result<usize> {
            match desc.dim {
                Some(d) if d > 0 => Ok(d),
                _ => Err(Error::invalid(format!("cone `{kind}` needs a positive `dim`"))),
            }
        };
        let cone = match desc.kind.as_str() {
            "nonnegative-orthant" => Cone::Nonnegative(leaf_dim("nonnegative-orthant")?),
            "nonpositive-orthant" => Cone::Nonpositive(leaf_dim("nonpositive-orthant")?),
            "zero" => Cone::Zero(leaf_dim("zero")?),
            "free" => Cone::Free(leaf_dim("free")?),
            "product-of-cones" => {
                let children = desc
                    .children
                    .into_iter()
                    .map(Cone::try_from)
                    .collect::<Result<Vec<_>>>()?;
                let cone = Cone::product(children)?;
                if let Some(d) = desc.dim {
                    if d != cone.dim() {
                        return Err(Error::invalid(format!(
                            "product cone declares dim {d} but children sum to {}",
                            cone.dim()
                        )));
                    }
                }
                cone
            }
            other => return Err(Error::invalid(format!("unknown cone kind `{other}`"))),
        };
        Ok(cone)
    }
}

impl From<Cone> for ConeDescriptor {
    fn from(cone: Cone) -> Self {
        let dim = Some(cone.dim());
        let (kind, children) = match cone {
            Cone::Nonnegative(_) => ("nonnegative-orthant", Vec::new()),
            Cone::Nonpositive(_) => ("nonpositive-orthant", Vec::new()),
            Cone::Zero(_) => ("zero", Vec::new()),
            Cone::Free(_) => ("free", Vec::new()),
            Cone::Product(children) => (
                "product-of-cones",
                children.into_iter().map(ConeDescriptor::from).collect(),
            ),
        };
        ConeDescriptor {
            kind: kind.to_string(),
            dim,
            children,
        }
    }
}
