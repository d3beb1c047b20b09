use serde::{Deserialize, Serialize};

use crate::multiscale::ErrorField;
use crate::pointset::Domain;

/// Nodes above `median + MAD_FACTOR * MAD` are anomalous.
pub const MAD_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nodes: usize,
    pub peak: f64,
}

impl AnomalyBox {
    pub fn intersects(&self, r: &Domain) -> bool {
        self.x_min <= r.x_max && r.x_min <= self.x_max && self.y_min <= r.y_max && r.y_min <= self.y_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub median: f64,
    pub mad: f64,
    pub threshold: f64,
    pub mask: Vec<bool>,
    pub boxes: Vec<AnomalyBox>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Flags nodes far above the robust background and boxes their
/// 8-connected components of at least `window` nodes. A box covers the grid
/// cells of its nodes.
pub fn anomaly_scan(field: &ErrorField, window: usize) -> AnomalyReport {
    let values = &field.values;
    if values.is_empty() {
        return AnomalyReport { median: 0.0, mad: 0.0, threshold: 0.0, mask: Vec::new(), boxes: Vec::new() };
    }
    let med = median(&mut values.clone());
    let mad = median(&mut values.iter().map(|v| (v - med).abs()).collect::<Vec<_>>());
    let threshold = med + MAD_FACTOR * mad;
    let mask: Vec<bool> = values.iter().map(|&v| v > threshold).collect();

    let g = &field.grid;
    let (nx, ny) = (g.nx, g.ny);
    let mut seen = vec![false; mask.len()];
    let mut boxes = Vec::new();
    let half = 0.5 * g.step;
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let mut members = Vec::new();
        while let Some(k) = stack.pop() {
            members.push(k);
            let (i, j) = ((k % nx) as isize, (k / nx) as isize);
            for dj in -1..=1 {
                for di in -1..=1 {
                    let (a, b) = (i + di, j + dj);
                    if a < 0 || b < 0 || a >= nx as isize || b >= ny as isize {
                        continue;
                    }
                    let n = b as usize * nx + a as usize;
                    if mask[n] && !seen[n] {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
        if members.len() < window.max(1) {
            continue;
        }
        let mut b = AnomalyBox {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
            nodes: members.len(),
            peak: 0.0,
        };
        for &k in &members {
            let p = g.node(k);
            b.x_min = b.x_min.min(p[0] - half);
            b.x_max = b.x_max.max(p[0] + half);
            b.y_min = b.y_min.min(p[1] - half);
            b.y_max = b.y_max.max(p[1] + half);
            b.peak = b.peak.max(values[k]);
        }
        boxes.push(b);
    }
    AnomalyReport { median: med, mad, threshold, mask, boxes }
}

/// Peak error inside `rect` relative to the median error of the whole field.
pub fn contrast_ratio(field: &ErrorField, rect: &Domain) -> f64 {
    let med = median(&mut field.values.clone());
    let peak = field
        .values
        .iter()
        .enumerate()
        .filter(|(k, _)| rect.contains(&field.grid.node(*k)))
        .map(|(_, v)| *v)
        .fold(0.0, f64::max);
    peak / med
}
