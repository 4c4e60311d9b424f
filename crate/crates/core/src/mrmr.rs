//! Empirical mutual information and greedy mRMR feature ranking (MID,
//! the difference scheme), used to pick the unknown part for the
//! attribute inference attacks.

use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MethodMeta {
    pub relevance_scheme: String,
    pub log_base: f64,
}

/// Features ordered by decreasing mRMR score.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FeatureRanking {
    /// (feature index, score), highest mRMR first.
    pub entries: Vec<(usize, f64)>,
    pub method_meta: MethodMeta,
}

impl FeatureRanking {
    pub fn indices(&self) -> Vec<usize> {
        self.entries.iter().map(|&(i, _)| i).collect()
    }

    /// CSV rows: rank, feature_index, score.
    pub fn to_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("rank,feature_index,score\n");
        for (rank, &(idx, score)) in self.entries.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", rank + 1, idx, score));
        }
        let mut f =
            std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        f.write_all(out.as_bytes())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Plug-in mutual information of two discrete columns, in bits.
/// `0 log 0` terms contribute zero.
pub fn mutual_information(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Domain(format!(
            "column length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Domain("empty columns".into()));
    }
    let ka = a.iter().max().unwrap() + 1;
    let kb = b.iter().max().unwrap() + 1;
    let n = a.len() as f64;
    let mut joint = vec![0usize; ka * kb];
    let mut marg_a = vec![0usize; ka];
    let mut marg_b = vec![0usize; kb];
    for (&x, &y) in a.iter().zip(b) {
        joint[x * kb + y] += 1;
        marg_a[x] += 1;
        marg_b[y] += 1;
    }
    let mut mi = 0.0;
    for x in 0..ka {
        for y in 0..kb {
            let c = joint[x * kb + y];
            if c == 0 {
                continue;
            }
            let p_xy = c as f64 / n;
            let p_x = marg_a[x] as f64 / n;
            let p_y = marg_b[y] as f64 / n;
            mi += p_xy * (p_xy / (p_x * p_y)).log2();
        }
    }
    // clamp tiny negative rounding residue
    Ok(mi.max(0.0))
}

fn feature_column(data: &Dataset, j: usize) -> Vec<usize> {
    data.records()
        .iter()
        .map(|r| r.get(j) as usize)
        .collect()
}

/// Greedy mRMR (difference scheme): pick argmax I(f; class), then
/// repeatedly argmax of I(f; class) − mean_{s ∈ selected} I(f; f_s).
/// Ties break to the lower feature index.
pub fn mrmr_rank(data: &Dataset, top_k: usize) -> Result<FeatureRanking> {
    let labels = data
        .labels()
        .ok_or_else(|| Error::Domain("mRMR requires class labels".into()))?
        .to_vec();
    let m = data.width();
    if top_k == 0 || top_k > m {
        return Err(Error::Domain(format!(
            "top_k {top_k} out of range 1..={m}"
        )));
    }
    if labels.windows(2).all(|w| w[0] == w[1]) {
        return Err(Error::Domain(
            "constant label column: relevance is zero everywhere".into(),
        ));
    }

    let columns: Vec<Vec<usize>> = (0..m).map(|j| feature_column(data, j)).collect();
    let relevance: Vec<f64> =
        exec::map_indexed(m, |j| mutual_information(&columns[j], &labels).unwrap());

    let mut selected: Vec<(usize, f64)> = Vec::with_capacity(top_k);
    let mut in_selected = vec![false; m];
    // cached pairwise MI against already-selected features, per candidate
    let mut redundancy_sum = vec![0.0; m];

    // first pick: pure relevance, lowest index on ties
    let first = argmax_tie_low(&relevance, &in_selected);
    selected.push((first, relevance[first]));
    in_selected[first] = true;

    while selected.len() < top_k {
        let last = selected.last().unwrap().0;
        // extend every candidate's redundancy sum with the newest pick
        let new_mi: Vec<f64> = exec::map_indexed(m, |j| {
            if in_selected[j] {
                0.0
            } else {
                mutual_information(&columns[j], &columns[last]).unwrap()
            }
        });
        for j in 0..m {
            if !in_selected[j] {
                redundancy_sum[j] += new_mi[j];
            }
        }
        let k = selected.len() as f64;
        let scores: Vec<f64> = (0..m)
            .map(|j| relevance[j] - redundancy_sum[j] / k)
            .collect();
        let pick = argmax_tie_low(&scores, &in_selected);
        selected.push((pick, scores[pick]));
        in_selected[pick] = true;
    }

    Ok(FeatureRanking {
        entries: selected,
        method_meta: MethodMeta {
            relevance_scheme: "MID".into(),
            log_base: 2.0,
        },
    })
}

fn argmax_tie_low(scores: &[f64], excluded: &[bool]) -> usize {
    let mut best: Option<usize> = None;
    for (j, &s) in scores.iter().enumerate() {
        if excluded[j] {
            continue;
        }
        match best {
            None => best = Some(j),
            Some(b) if s > scores[b] => best = Some(j),
            _ => {}
        }
    }
    best.expect("at least one candidate")
}
