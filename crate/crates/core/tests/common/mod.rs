#![allow(dead_code)]

use causal_cdr::synth::OrdinalScm;

/// Smallest feature set S (then lexicographically first) with
/// P(Y | all features) = P(Y | S) everywhere, from the exact joint.
pub fn brute_force_markov_blanket(scm: &OrdinalScm, tol: f64) -> Vec<usize> {
    let joint = scm.joint();
    let t = scm.target;
    let features: Vec<usize> = (0..scm.num_vars()).filter(|&v| v != t).collect();
    let f = features.len();

    let full = conditional_table(&joint, &features, t);
    let mut best: Option<Vec<usize>> = None;
    for mask in 0u32..(1 << f) {
        let subset: Vec<usize> = (0..f).filter(|i| mask & (1 << i) != 0).map(|i| features[i]).collect();
        if let Some(b) = &best {
            if subset.len() > b.len() || (subset.len() == b.len() && subset >= *b) {
                continue;
            }
        }
        let part = conditional_table(&joint, &subset, t);
        let fits = joint.iter().filter(|(_, p)| *p > 0.0).all(|(codes, _)| {
            let a = full.get(&key(codes, &features)).copied().unwrap_or(0.0);
            let b = part.get(&key(codes, &subset)).copied().unwrap_or(0.0);
            (a - b).abs() <= tol
        });
        if fits {
            best = Some(subset);
        }
    }
    best.expect("the full feature set always fits")
}

fn key(codes: &[u8], vars: &[usize]) -> Vec<u8> {
    vars.iter().map(|&v| codes[v]).collect()
}

/// P(target = 1 | vars) for every observed assignment of `vars`.
fn conditional_table(joint: &[(Vec<u8>, f64)], vars: &[usize], target: usize) -> std::collections::HashMap<Vec<u8>, f64> {
    let mut num = std::collections::HashMap::new();
    let mut den = std::collections::HashMap::new();
    for (codes, p) in joint.iter().filter(|(_, p)| *p > 0.0) {
        let k = key(codes, vars);
        *den.entry(k.clone()).or_insert(0.0) += p;
        if codes[target] == 1 {
            *num.entry(k).or_insert(0.0) += p;
        }
    }
    den.into_iter()
        .map(|(k, d)| {
            let n = num.get(&k).copied().unwrap_or(0.0);
            (k, n / d)
        })
        .collect()
}
