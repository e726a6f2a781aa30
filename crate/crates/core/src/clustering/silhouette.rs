use crate::data::{Matrix, Vector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Silhouette {
    pub per_point: Vector,
    pub mean: f64,
}

/// Silhouette values with Euclidean distance. Members of singleton clusters
/// score 0. Labels may be any integers; at least two distinct labels are required.
pub fn silhouette(x: &Matrix, labels: &[usize]) -> Result<Silhouette> {
    let m = x.nrows();
    if labels.len() != m {
        return Err(Error::validation("label count differs from row count"));
    }
    let mut ids: Vec<usize> = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < 2 {
        return Err(Error::validation("silhouette needs at least two clusters"));
    }
    let dense: Vec<usize> = labels
        .iter()
        .map(|l| ids.binary_search(l).expect("label present"))
        .collect();
    let k = ids.len();
    let mut sizes = vec![0usize; k];
    for &l in &dense {
        sizes[l] += 1;
    }

    let mut per_point = Vector::zeros(m);
    let mut sums = vec![0.0; k];
    for i in 0..m {
        let own = dense[i];
        if sizes[own] == 1 {
            continue;
        }
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..m {
            if j != i {
                sums[dense[j]] += (x.row(i) - x.row(j)).norm();
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        per_point[i] = if denom > 0.0 { (b - a) / denom } else { 0.0 };
    }
    let mean = per_point.mean();
    Ok(Silhouette { per_point, mean })
}
