use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Shannon entropy in bits of a count vector.
pub fn entropy_bits(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Empirical H(Y | Z) in bits. `z[i]` holds the conditioning values of sample
/// `i`; an empty row for every sample gives the marginal entropy of `y`.
pub fn conditional_entropy(y: &[u8], z: &[Vec<i8>]) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::InvalidInput("conditional entropy of an empty sample".into()));
    }
    if y.len() != z.len() {
        return Err(Error::Shape(format!("{} targets but {} conditioning rows", y.len(), z.len())));
    }
    if let Some(i) = y.iter().position(|&v| v > 1) {
        return Err(Error::InvalidInput(format!("target {i} is {}, expected 0 or 1", y[i])));
    }
    let width = z[0].len();
    for (i, row) in z.iter().enumerate() {
        if row.len() != width {
            return Err(Error::Shape(format!("conditioning row {i} has {} columns, expected {width}", row.len())));
        }
        if row.iter().any(|v| !(-1..=1).contains(v)) {
            return Err(Error::InvalidInput(format!("conditioning row {i} has a value outside {{-1, 0, 1}}")));
        }
    }

    let mut cells: BTreeMap<&[i8], [usize; 2]> = BTreeMap::new();
    for (row, &label) in z.iter().zip(y) {
        cells.entry(row.as_slice()).or_default()[label as usize] += 1;
    }
    let n = y.len() as f64;
    let h: f64 = cells
        .values()
        .map(|c| (c[0] + c[1]) as f64 / n * entropy_bits(c))
        .sum();
    Ok(h.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_dependence_is_zero() {
        let y = vec![0, 1, 1, 0, 1];
        let z: Vec<Vec<i8>> = y.iter().map(|&v| vec![if v == 1 { -1 } else { 1 }]).collect();
        assert_eq!(conditional_entropy(&y, &z).unwrap(), 0.0);
    }

    #[test]
    fn balanced_independent_table_is_one_bit() {
        let mut y = Vec::new();
        let mut z = Vec::new();
        for zv in [-1i8, 0, 1] {
            for yv in [0u8, 1] {
                y.push(yv);
                z.push(vec![zv]);
            }
        }
        assert_eq!(conditional_entropy(&y, &z).unwrap(), 1.0);
    }

    #[test]
    fn three_variable_table_matches_enumeration() {
        // y and two conditioning columns, with uneven cell counts
        let rows: &[(u8, i8, i8, usize)] = &[
            (0, -1, 0, 3),
            (1, -1, 0, 1),
            (0, 1, 1, 2),
            (1, 1, 1, 5),
            (1, 0, -1, 4),
            (0, 0, 0, 1),
            (1, 0, 0, 1),
        ];
        let mut y = Vec::new();
        let mut z = Vec::new();
        for &(yv, a, b, count) in rows {
            for _ in 0..count {
                y.push(yv);
                z.push(vec![a, b]);
            }
        }
        let n = y.len() as f64;
        let mut oracle = 0.0;
        for a in -1i8..=1 {
            for b in -1i8..=1 {
                let nz: usize = rows.iter().filter(|r| r.1 == a && r.2 == b).map(|r| r.3).sum();
                for yv in 0u8..=1 {
                    let nyz: usize = rows.iter().filter(|r| r.0 == yv && r.1 == a && r.2 == b).map(|r| r.3).sum();
                    if nyz > 0 {
                        let p_joint = nyz as f64 / n;
                        let p_cond = nyz as f64 / nz as f64;
                        oracle -= p_joint * p_cond.log2();
                    }
                }
            }
        }
        let got = conditional_entropy(&y, &z).unwrap();
        assert!((got - oracle).abs() < 1e-12, "{got} vs {oracle}");
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(conditional_entropy(&[], &[]).is_err());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(conditional_entropy(&[2], &[vec![0]]).is_err());
        assert!(conditional_entropy(&[1], &[vec![3]]).is_err());
    }
}
