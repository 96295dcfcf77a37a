use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::manifest::DatasetIndex;
use crate::error::{Error, Result};
use crate::tensor::RngState;

/// Which drivers went where.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train_drivers: BTreeSet<String>,
    pub val_drivers: BTreeSet<String>,
    pub seed: u64,
}

impl SplitPlan {
    pub fn is_disjoint(&self) -> bool {
        self.train_drivers.is_disjoint(&self.val_drivers)
    }
}

fn check_fraction(val_fraction: f64) -> Result<()> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::config(format!("val_fraction must be in (0, 1), got {val_fraction}")));
    }
    Ok(())
}

/// Driver-disjoint split.
///
/// Drivers (in first-appearance order) are shuffled with `seed`, then moved
/// into validation one at a time until validation holds at least
/// `val_fraction` of the images. At least one driver always stays in
/// training. Rows keep their manifest order inside each split.
pub fn split_by_driver(
    index: &DatasetIndex,
    val_fraction: f64,
    seed: u64,
) -> Result<(DatasetIndex, DatasetIndex, SplitPlan)> {
    check_fraction(val_fraction)?;
    let mut drivers = index.drivers();
    if drivers.len() < 2 {
        return Err(Error::UnsatisfiableSplit {
            drivers: drivers.len(),
        });
    }
    RngState::new(seed).shuffle(&mut drivers);

    let total = index.len() as f64;
    let images_of = |d: &str| index.rows().iter().filter(|r| r.driver == d).count();
    let mut val_drivers = BTreeSet::new();
    let mut val_images = 0usize;
    for d in &drivers[..drivers.len() - 1] {
        if val_images as f64 / total >= val_fraction {
            break;
        }
        val_images += images_of(d);
        val_drivers.insert(d.clone());
    }
    let train_drivers: BTreeSet<String> = drivers.into_iter().filter(|d| !val_drivers.contains(d)).collect();
    let train = index.filter(|r| train_drivers.contains(&r.driver));
    let val = index.filter(|r| val_drivers.contains(&r.driver));
    Ok((
        train,
        val,
        SplitPlan {
            train_drivers,
            val_drivers,
            seed,
        },
    ))
}

/// Image-level random split that ignores drivers. Leaks driver identity
/// into validation; kept only to measure that effect.
pub fn split_by_image(index: &DatasetIndex, val_fraction: f64, seed: u64) -> Result<(DatasetIndex, DatasetIndex)> {
    check_fraction(val_fraction)?;
    if index.len() < 2 {
        return Err(Error::data("need at least two images to split"));
    }
    let mut order: Vec<usize> = (0..index.len()).collect();
    RngState::new(seed).shuffle(&mut order);
    let n_val = ((index.len() as f64 * val_fraction).round() as usize).clamp(1, index.len() - 1);
    let mut in_val = vec![false; index.len()];
    for &i in &order[..n_val] {
        in_val[i] = true;
    }
    let mut pos = 0;
    let train = index.filter(|_| {
        pos += 1;
        !in_val[pos - 1]
    });
    let mut pos = 0;
    let val = index.filter(|_| {
        pos += 1;
        in_val[pos - 1]
    });
    Ok((train, val))
}
