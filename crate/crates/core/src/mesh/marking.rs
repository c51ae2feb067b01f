use crate::{Error, Result};

use super::ElementId;

/// Dörfler marking: the shortest prefix of elements sorted by decreasing
/// indicator (ties by ascending id) whose indicator sum reaches
/// `fraction × total`.
pub fn mark_doerfler(indicators: &[(ElementId, f64)], fraction: f64) -> Result<Vec<ElementId>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "marking fraction {fraction} outside (0, 1]"
        )));
    }
    if let Some((id, v)) = indicators.iter().find(|(_, v)| !(*v >= 0.0)) {
        return Err(Error::InvalidInput(format!(
            "indicator of element {id} is negative or NaN ({v})"
        )));
    }
    let total: f64 = indicators.iter().map(|(_, v)| v).sum();
    if total == 0.0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<(ElementId, f64)> = indicators.to_vec();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let goal = fraction * total * (1.0 - 1e-14);
    let mut acc = 0.0;
    let mut marked = Vec::new();
    for (id, v) in order {
        if acc >= goal {
            break;
        }
        acc += v;
        marked.push(id);
    }
    Ok(marked)
}
