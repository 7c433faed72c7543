//! Two-component PCA for embedding visualization export.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Project N×D embeddings onto their first two principal components.
///
/// Centers the rows, takes the top-2 right singular vectors of the centered
/// matrix, and fixes each component's sign so its first nonzero loading is
/// positive. Returns (coordinates, explained variance of each component).
pub fn pca2(embeddings: &[Vec<f64>]) -> Result<(Vec<[f64; 2]>, [f64; 2])> {
    let n = embeddings.len();
    if n < 2 {
        return Err(Error::protocol(format!("pca needs at least 2 points, got {n}")));
    }
    let d = embeddings[0].len();
    if d < 2 {
        return Err(Error::Dimension {
            op: "pca2",
            lhs: vec![n, d],
            rhs: vec![2],
        });
    }
    for (i, e) in embeddings.iter().enumerate() {
        if e.len() != d {
            return Err(Error::Dimension {
                op: "pca2",
                lhs: vec![i, e.len()],
                rhs: vec![d],
            });
        }
    }

    let mut centered = DMatrix::<f64>::zeros(n, d);
    let mut mean = vec![0.0f64; d];
    for e in embeddings {
        for (m, &v) in mean.iter_mut().zip(e) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    for (r, e) in embeddings.iter().enumerate() {
        for c in 0..d {
            centered[(r, c)] = e[c] - mean[c];
        }
    }

    let svd = centered.clone().svd(false, true);
    let vt = svd
        .v_t
        .ok_or_else(|| Error::Numeric("svd failed to produce singular vectors".into()))?;
    let mut components = [vec![0.0f64; d], vec![0.0f64; d]];
    for (ci, comp) in components.iter_mut().enumerate() {
        for c in 0..d {
            comp[c] = vt[(ci, c)];
        }
        // sign convention: first nonzero loading positive
        if let Some(&lead) = comp.iter().find(|v| v.abs() > 1e-12) {
            if lead < 0.0 {
                for v in comp.iter_mut() {
                    *v = -*v;
                }
            }
        }
    }

    let coords: Vec<[f64; 2]> = (0..n)
        .map(|r| {
            let mut xy = [0.0f64; 2];
            for (ci, comp) in components.iter().enumerate() {
                xy[ci] = (0..d).map(|c| centered[(r, c)] * comp[c]).sum();
            }
            xy
        })
        .collect();

    // per-component variance of the projected coordinates (population)
    let mut var = [0.0f64; 2];
    for ci in 0..2 {
        let mu: f64 = coords.iter().map(|c| c[ci]).sum::<f64>() / n as f64;
        var[ci] = coords.iter().map(|c| (c[ci] - mu).powi(2)).sum::<f64>() / n as f64;
    }
    Ok((coords, var))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force symmetric eigendecomposition by cyclic Jacobi rotations;
    /// kept independent of the SVD route used by the implementation.
    fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
        let d = a.len();
        for _ in 0..100 {
            let mut off = 0.0;
            for i in 0..d {
                for j in 0..d {
                    if i != j {
                        off += a[i][j] * a[i][j];
                    }
                }
            }
            if off < 1e-24 {
                break;
            }
            for p in 0..d {
                for q in (p + 1)..d {
                    if a[p][q].abs() < 1e-18 {
                        continue;
                    }
                    let theta = 0.5 * (2.0 * a[p][q]).atan2(a[q][q] - a[p][p]);
                    let (s, c) = theta.sin_cos();
                    for k in 0..d {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..d {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut eig: Vec<f64> = (0..d).map(|i| a[i][i]).collect();
        eig.sort_by(|x, y| y.partial_cmp(x).unwrap());
        eig
    }

    #[test]
    fn rank_one_input_has_negligible_second_component() {
        // points on a line in 5-D
        let dir = [0.3f64, -0.2, 0.9, 0.1, 0.5];
        let embeddings: Vec<Vec<f64>> = (0..8)
            .map(|i| dir.iter().map(|&v| v * i as f64).collect())
            .collect();
        let (_, var) = pca2(&embeddings).unwrap();
        assert!(var[1] / var[0] < 1e-8, "variance ratio {}", var[1] / var[0]);
    }

    #[test]
    fn projection_variance_matches_covariance_eigenvalues() {
        let embeddings: Vec<Vec<f64>> = vec![
            vec![1.0, 2.0, 0.5, -1.0],
            vec![0.0, 1.0, 1.5, 2.0],
            vec![-1.0, 0.5, 2.5, 0.0],
            vec![2.0, -1.0, 0.0, 1.0],
            vec![0.5, 0.5, -2.0, -0.5],
        ];
        let (_, var) = pca2(&embeddings).unwrap();
        let n = embeddings.len();
        let d = 4;
        let mut mean = vec![0.0f64; d];
        for e in &embeddings {
            for c in 0..d {
                mean[c] += e[c];
            }
        }
        for m in mean.iter_mut() {
            *m /= n as f64;
        }
        let mut cov = vec![vec![0.0f64; d]; d];
        for e in &embeddings {
            for i in 0..d {
                for j in 0..d {
                    cov[i][j] += (e[i] - mean[i]) * (e[j] - mean[j]) / n as f64;
                }
            }
        }
        let eig = jacobi_eigenvalues(cov);
        assert!((var[0] - eig[0]).abs() < 1e-8, "{} vs {}", var[0], eig[0]);
        assert!((var[1] - eig[1]).abs() < 1e-8, "{} vs {}", var[1], eig[1]);
    }

    #[test]
    fn rotation_preserves_pairwise_distances() {
        let embeddings: Vec<Vec<f64>> = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 2.0, 0.0],
            vec![0.0, 0.0, 3.0],
            vec![1.0, 1.0, 1.0],
        ];
        // rotate in the (0,1) plane by 40 degrees
        let th = 40f64.to_radians();
        let rotated: Vec<Vec<f64>> = embeddings
            .iter()
            .map(|e| {
                vec![
                    e[0] * th.cos() - e[1] * th.sin(),
                    e[0] * th.sin() + e[1] * th.cos(),
                    e[2],
                ]
            })
            .collect();
        let (a, _) = pca2(&embeddings).unwrap();
        let (b, _) = pca2(&rotated).unwrap();
        for i in 0..a.len() {
            for j in 0..a.len() {
                let da = ((a[i][0] - a[j][0]).powi(2) + (a[i][1] - a[j][1]).powi(2)).sqrt();
                let db = ((b[i][0] - b[j][0]).powi(2) + (b[i][1] - b[j][1]).powi(2)).sqrt();
                assert!((da - db).abs() < 1e-8, "pair ({i},{j}): {da} vs {db}");
            }
        }
    }

    #[test]
    fn too_few_points_or_dims_rejected() {
        assert!(pca2(&[vec![1.0, 2.0]]).is_err());
        assert!(pca2(&[vec![1.0], vec![2.0]]).is_err());
    }
}
