//! Number-basis unitaries generated by quadratic and linear Hamiltonians.
//!
//! A gate with symplectic generator `L` (so that `S = exp(t L)`) is realized
//! as `U = exp(−i t H)` with `H = ½ rᵀ K r`, `K = −½ Ω L`, which gives
//! `U† r U = S r`. `H` is evaluated exactly on number states inside a working
//! box larger than the cutoff, split into the connected blocks it couples,
//! exponentiated block by block and restricted back to the cutoff.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64 as C;

use crate::linalg::symplectic_form;

/// `H = ½ rᵀ K r + gᵀ r` on one or two modes.
#[derive(Debug, Clone)]
pub(crate) struct Generator {
    pub modes: usize,
    pub k: DMatrix<f64>,
    pub g: Vec<f64>,
}

impl Generator {
    pub fn from_symplectic(l: &DMatrix<f64>) -> Self {
        let modes = l.nrows() / 2;
        let k = -0.5 * symplectic_form(modes) * l;
        let k = 0.5 * (&k + k.transpose());
        Self {
            modes,
            k,
            g: vec![0.0; 2 * modes],
        }
    }

    /// Displacement of the quadrature means by `(dx, dp)`.
    pub fn displacement(dx: f64, dp: f64) -> Self {
        Self {
            modes: 1,
            k: DMatrix::zeros(2, 2),
            g: vec![-0.5 * dp, 0.5 * dx],
        }
    }

    fn scaled(&self, t: f64) -> Self {
        Self {
            modes: self.modes,
            k: &self.k * t,
            g: self.g.iter().map(|v| v * t).collect(),
        }
    }

    /// `H |s⟩`, dropping components outside `[0, working)`.
    fn apply(&self, s: [usize; 2], working: usize, out: &mut Vec<([usize; 2], C)>) {
        out.clear();
        let dim = 2 * self.modes;
        for j in 0..dim {
            for k in 0..dim {
                let c = 0.5 * self.k[(j, k)];
                if c == 0.0 {
                    continue;
                }
                for (m1, r1, c1) in quadrature(k) {
                    let Some((f1, s1)) = ladder(s, m1, r1, working) else { continue };
                    for (m2, r2, c2) in quadrature(j) {
                        let Some((f2, s2)) = ladder(s1, m2, r2, working) else { continue };
                        out.push((s2, c * c1 * c2 * (f1 * f2)));
                    }
                }
            }
            if self.g[j] != 0.0 {
                for (m1, r1, c1) in quadrature(j) {
                    if let Some((f1, s1)) = ladder(s, m1, r1, working) {
                        out.push((s1, self.g[j] * c1 * f1));
                    }
                }
            }
        }
        // Contributions that cancel exactly must not link otherwise separate blocks.
        out.sort_by(|a, b| a.0.cmp(&b.0));
        let mut merged: Vec<([usize; 2], C)> = Vec::with_capacity(out.len());
        for &(s, v) in out.iter() {
            match merged.last_mut() {
                Some((last, acc)) if *last == s => *acc += v,
                _ => merged.push((s, v)),
            }
        }
        let scale = merged.iter().map(|(_, v)| v.norm()).fold(0.0, f64::max);
        merged.retain(|(_, v)| v.norm() > 1e-14 * scale);
        *out = merged;
    }
}

/// `r_j` as a combination of ladder operators: `(mode, raise, coefficient)`.
fn quadrature(j: usize) -> [(usize, bool, C); 2] {
    let m = j / 2;
    if j % 2 == 0 {
        [(m, false, C::new(1.0, 0.0)), (m, true, C::new(1.0, 0.0))]
    } else {
        [(m, false, C::new(0.0, -1.0)), (m, true, C::new(0.0, 1.0))]
    }
}

fn ladder(mut s: [usize; 2], mode: usize, raise: bool, working: usize) -> Option<(f64, [usize; 2])> {
    let n = s[mode];
    if raise {
        if n + 1 >= working {
            return None;
        }
        s[mode] = n + 1;
        Some((((n + 1) as f64).sqrt(), s))
    } else if n == 0 {
        None
    } else {
        s[mode] = n - 1;
        Some(((n as f64).sqrt(), s))
    }
}

/// A unitary block acting on a subset of the truncated basis.
#[derive(Debug, Clone)]
pub(crate) struct Block {
    /// Flattened local indices `i` (one mode) or `i·d + j` (two modes).
    pub states: Vec<usize>,
    pub u: DMatrix<C>,
}

/// Working box used for a cutoff: wide enough that edge effects of the
/// truncated generator do not reach the retained states.
pub(crate) fn working_dim(cutoff: usize) -> usize {
    2 * cutoff + 20
}

/// `exp(−i t H)` restricted to states with every index below `cutoff`.
pub(crate) fn exponentiate(generator: &Generator, t: f64, cutoff: usize) -> Vec<Block> {
    let generator = generator.scaled(t);
    let working = working_dim(cutoff);
    let two = generator.modes == 2;
    let targets: Vec<[usize; 2]> = if two {
        (0..cutoff).flat_map(|i| (0..cutoff).map(move |j| [i, j])).collect()
    } else {
        (0..cutoff).map(|i| [i, 0]).collect()
    };
    let flat = |s: [usize; 2]| if two { s[0] * cutoff + s[1] } else { s[0] };
    let is_target = |s: [usize; 2]| s[0] < cutoff && s[1] < cutoff;

    let mut assigned: HashMap<[usize; 2], usize> = HashMap::new();
    let mut blocks = Vec::new();
    let mut scratch = Vec::new();
    for &start in &targets {
        if assigned.contains_key(&start) {
            continue;
        }
        let id = blocks.len();
        let mut members = vec![start];
        let mut local: HashMap<[usize; 2], usize> = HashMap::from([(start, 0)]);
        assigned.insert(start, id);
        let mut cursor = 0;
        let mut columns: Vec<Vec<([usize; 2], C)>> = Vec::new();
        while cursor < members.len() {
            generator.apply(members[cursor], working, &mut scratch);
            for &(s, _) in &scratch {
                if !local.contains_key(&s) {
                    local.insert(s, members.len());
                    members.push(s);
                    if is_target(s) {
                        assigned.insert(s, id);
                    }
                }
            }
            columns.push(scratch.clone());
            cursor += 1;
        }
        let n = members.len();
        let mut h = DMatrix::<C>::zeros(n, n);
        for (col, entries) in columns.iter().enumerate() {
            for &(s, v) in entries {
                h[(local[&s], col)] += v;
            }
        }
        let u = (h * C::new(0.0, -1.0)).exp();
        let keep: Vec<usize> = (0..n)
            .filter(|&i| is_target(members[i]))
            .collect();
        let restricted = DMatrix::from_fn(keep.len(), keep.len(), |a, b| u[(keep[a], keep[b])]);
        blocks.push(Block {
            states: keep.iter().map(|&i| flat(members[i])).collect(),
            u: restricted,
        });
    }
    blocks
}

/// Assembles single-mode blocks into a dense `d × d` matrix.
pub(crate) fn dense(blocks: &[Block], cutoff: usize) -> DMatrix<C> {
    let mut u = DMatrix::zeros(cutoff, cutoff);
    for b in blocks {
        for (a, &i) in b.states.iter().enumerate() {
            for (c, &j) in b.states.iter().enumerate() {
                u[(i, j)] = b.u[(a, c)];
            }
        }
    }
    u
}
