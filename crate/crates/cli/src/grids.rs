//! Parsing of numeric vectors and point grids given on the command line.

use anyhow::{bail, Context, Result};

/// `"0.3,0.1"` → `[0.3, 0.1]`.
pub fn parse_vector(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .with_context(|| format!("not a number: {v:?}"))
        })
        .collect()
}

/// Either `lo:hi:count`, applied to every coordinate (Cartesian product), or
/// explicit points separated by `;`, e.g. `0.1,0.2;0.3,0.4`.
pub fn parse_point_grid(s: &str, d: usize) -> Result<Vec<Vec<f64>>> {
    let pts = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            bail!("range must be lo:hi:count, got {s:?}");
        }
        let lo: f64 = parts[0].trim().parse().context("range start")?;
        let hi: f64 = parts[1].trim().parse().context("range end")?;
        let n: usize = parts[2].trim().parse().context("range count")?;
        if n == 0 {
            bail!("range count must be positive");
        }
        let axis: Vec<f64> = (0..n)
            .map(|i| {
                if n == 1 {
                    lo
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect();
        let total = n.pow(d as u32);
        (0..total)
            .map(|mut idx| {
                (0..d)
                    .map(|_| {
                        let v = axis[idx % n];
                        idx /= n;
                        v
                    })
                    .collect()
            })
            .collect()
    } else {
        s.split(';').map(parse_vector).collect::<Result<Vec<_>>>()?
    };
    if let Some(p) = pts.iter().find(|p| p.len() != d) {
        bail!(
            "point {p:?} has {} components, the model has d = {d}",
            p.len()
        );
    }
    Ok(pts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_and_list() {
        let g = parse_point_grid("-1:1:3", 2).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g[1], vec![0.0, -1.0]);
        assert_eq!(
            parse_point_grid("0.5;1", 1).unwrap(),
            vec![vec![0.5], vec![1.0]]
        );
        assert!(parse_point_grid("0.5,1", 1).is_err());
    }
}
