use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::nn::FeatureVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// `dims` unit rows of input width.
    pub basis: Vec<Vec<f64>>,
    /// Per-axis share of total variance, nonincreasing.
    pub explained_variance_ratio: Vec<f64>,
    /// One row of `dims` coordinates per input vector.
    pub coords: Vec<Vec<f64>>,
}

/// Projects mean-centred features onto the top `dims` principal axes. Each
/// axis is signed so its largest-magnitude component is positive.
pub fn pca_project(features: &[FeatureVector], dims: usize) -> Result<Pca> {
    if dims == 0 {
        return Err(Error::Validation("dims must be at least 1".into()));
    }
    if features.len() < dims + 1 {
        return Err(Error::Rank {
            needed: dims + 1,
            got: features.len(),
        });
    }
    let d = features[0].len();
    if let Some(f) = features.iter().find(|f| f.len() != d) {
        return Err(Error::Shape(format!("feature `{}` has width {}, expected {d}", f.source_id, f.len())));
    }
    if dims > d {
        return Err(Error::Validation(format!("dims {dims} exceeds feature width {d}")));
    }
    let n = features.len() as f64;
    let mut mean = vec![0.0; d];
    for f in features {
        for (m, &v) in mean.iter_mut().zip(&f.values) {
            *m += v as f64 / n;
        }
    }
    let centred: Vec<Vec<f64>> = features
        .iter()
        .map(|f| f.values.iter().zip(&mean).map(|(&v, m)| v as f64 - m).collect())
        .collect();
    let mut cov = vec![0.0; d * d];
    for x in &centred {
        for i in 0..d {
            if x[i] == 0.0 {
                continue;
            }
            for j in i..d {
                cov[i * d + j] += x[i] * x[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[i * d + j] / (n - 1.0);
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }
    let total: f64 = (0..d).map(|i| cov[i * d + i]).sum();
    let (values, vectors) = symmetric_eigen(&cov, d);
    let basis: Vec<Vec<f64>> = (0..dims)
        .map(|k| {
            let mut v: Vec<f64> = (0..d).map(|r| vectors[r * d + k]).collect();
            let lead = v.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
            if lead < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    let explained_variance_ratio = values[..dims]
        .iter()
        .map(|&l| if total > 0.0 { l.max(0.0) / total } else { 0.0 })
        .collect();
    let coords = centred
        .iter()
        .map(|x| basis.iter().map(|b| b.iter().zip(x).map(|(p, q)| p * q).sum()).collect())
        .collect();
    Ok(Pca {
        mean,
        basis,
        explained_variance_ratio,
        coords,
    })
}

impl Pca {
    /// `id,class,provenance,x,y,...` rows given per-feature labels.
    pub fn to_csv(&self, labels: &[(String, String, String)]) -> String {
        let axes = ["x", "y", "z"];
        let names: Vec<String> = (0..self.basis.len())
            .map(|k| axes.get(k).map_or(format!("pc{}", k + 1), |s| s.to_string()))
            .collect();
        let mut s = format!("id,class,provenance,{}\n", names.join(","));
        for ((id, class, prov), c) in labels.iter().zip(&self.coords) {
            let cs: Vec<String> = c.iter().map(|v| v.to_string()).collect();
            s.push_str(&format!("{id},{class},{prov},{}\n", cs.join(",")));
        }
        s
    }
}
